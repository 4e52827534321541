"""Grid checks for submaximal functions.

A function ``g`` on ``A = {kappa, 2 kappa, ...}`` is submaximal when

  (i)  ``g(y + z) <= max(g(y), g(z))`` and
  (ii) for every ``eps`` and ``a`` there is ``N`` with
       ``g(y + t) <= g(y) + eps`` whenever ``y >= N`` and ``t <= a``;

this forces ``limsup g = inf g``.  The two-parameter version replaces (i) by
``f(x, y + z) <= max(f(x, y), f(x + y, z))``.  Everything here works on
tabulated values only.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TOL = 1e-12


@dataclass
class Submax1DReport:
    condition_i: bool
    condition_i_witness: tuple[float, float] | None
    condition_ii_N: float | None
    tail_sup: float
    infimum: float
    notes: list[str] = field(default_factory=list)

    @property
    def submaximal_on_grid(self) -> bool:
        return self.condition_i and self.condition_ii_N is not None

    @property
    def limit_gap(self) -> float:
        """``sup`` over the grid tail minus ``inf``; near 0 when the limit is visible."""
        return self.tail_sup - self.infimum


def check_submax_1d(g, eps: float, a: float, kappa: float = 1.0, tol: float = TOL) -> Submax1DReport:
    """Check (i) on all pairs and search the smallest ``N`` witnessing (ii).

    ``g[i]`` is ``g((i + 1) * kappa)``.  A witness ``N`` is only accepted when
    at least half of the grid lies beyond it, so that (ii) is tested on a
    nontrivial tail.
    """
    g = np.asarray(g, dtype=float)
    L = g.size
    if L < 2:
        raise ValueError("need at least two samples")
    # (i): g[i + j + 1] <= max(g[i], g[j]) for i + j + 1 < L
    idx = np.arange(L)
    I, J = np.meshgrid(idx, idx, indexing="ij")
    S = I + J + 1
    ok = S < L
    lhs = np.where(ok, g[np.minimum(S, L - 1)], -np.inf)
    bad = ok & (lhs > np.maximum(g[I], g[J]) + tol)
    witness = None
    if bad.any():
        i, j = np.argwhere(bad)[0]
        witness = ((i + 1) * kappa, (j + 1) * kappa)
    # (ii): steps t = kappa, ..., a on the grid
    steps = int(np.floor(a / kappa + 1e-9))
    notes = []
    N = None
    if steps < 1:
        notes.append("a is below the grid spacing; condition (ii) is vacuous on this grid")
        N_idx = 0
    else:
        # worst increase from position y over the admissible steps
        worst = np.full(L, -np.inf)
        for t in range(1, steps + 1):
            inc = np.full(L, -np.inf)
            inc[:L - t] = g[t:] - g[:L - t]
            worst = np.maximum(worst, inc)
        fails = np.flatnonzero(worst > eps + tol)
        N_idx = 0 if fails.size == 0 else int(fails[-1]) + 1
    if N_idx <= L // 2:
        N = (N_idx + 1) * kappa
    else:
        notes.append("condition (ii) not witnessed on grid")
    # limsup proxy: sup over the second half of the grid (or beyond N)
    tail_start = max(N_idx, L // 2)
    tail_sup = float(g[tail_start:].max())
    return Submax1DReport(witness is None, witness, N, tail_sup, float(g.min()), notes)


@dataclass
class SubaddReport:
    triples_checked: int
    hypothesis_violations: list[tuple[float, float, float]]
    conclusion_i_violations: list[tuple[float, float, float]]
    conclusion_ii_violations: list[tuple[float, float, float, float]]
    bounded_by_C: bool
    nonnegative: bool

    @property
    def hypothesis_holds(self) -> bool:
        return not self.hypothesis_violations

    @property
    def passes(self) -> bool:
        """Conclusions hold (they must whenever the hypothesis does and ``0 <= f <= C``)."""
        return not self.conclusion_i_violations and not self.conclusion_ii_violations


def check_subadd_implies_submax(f, C: float, eps: float = 0.1, kappa: float = 1.0,
                                x0: float = 0.0, tol: float = TOL,
                                max_witnesses: int = 20) -> SubaddReport:
    """Check weighted subadditivity and its two submaximality conclusions.

    ``f[i, j] = f(x0 + i kappa, (j + 1) kappa)``.  Hypothesis, for every
    representable triple: ``f(x, y+z) <= (y f(x, y) + z f(x+y, z)) / (y+z)``.
    Conclusions: (i) ``f(x, y+z) <= max(f(x, y), f(x+y, z))``; (ii)
    ``f(x, y+t) <= f(x', y) + eps`` for ``t <= eps y / C`` and
    ``x <= x' <= x + t``.  Violations are reported as grid coordinates.
    """
    f = np.asarray(f, dtype=float)
    X, Y = f.shape
    hyp, c1, c2 = [], [], []
    count = 0
    for i in range(X):
        x = x0 + i * kappa
        for j in range(Y):
            y = (j + 1) * kappa
            for k in range(Y):
                z = (k + 1) * kappa
                jz = j + k + 1          # index of y + z
                ix = i + j + 1          # index of x + y
                if jz >= Y or ix >= X:
                    continue
                count += 1
                lhs = f[i, jz]
                rhs = (y * f[i, j] + z * f[ix, k]) / (y + z)
                if lhs > rhs + tol and len(hyp) < max_witnesses:
                    hyp.append((x, y, z))
                if lhs > max(f[i, j], f[ix, k]) + tol and len(c1) < max_witnesses:
                    c1.append((x, y, z))
            # (ii): t on the grid with t <= eps * y / C
            tmax = int(np.floor(eps * y / (C * kappa) + 1e-9))
            for t in range(1, tmax + 1):
                if j + t >= Y:
                    break
                for dx in range(0, t + 1):
                    if i + dx >= X:
                        break
                    if f[i, j + t] > f[i + dx, j] + eps + tol and len(c2) < max_witnesses:
                        c2.append((x, y, t * kappa, x + dx * kappa))
    return SubaddReport(count, hyp, c1, c2, bool(np.all(f <= C + tol)), bool(np.all(f >= -tol)))
