"""Generated level sequences with exceptional behaviour.

* ``unbounded``: two maps per level, every pressure zero below ``epsilon``,
  open set condition on (0, 1), and yet weak tangents containing the
  evenly spaced sets ``{1/(k+1), ..., k/(k+1)}``, so the Assouad dimension
  is 1.  Neighbourhood counts grow, but only as slowly as a prescribed
  divergent function ``f``.
* ``arbitrary``: homogeneous levels ``{x -> r1^m x + y : y in E_m}`` built
  from the left endpoints ``E_m`` of a two-map Cantor set with ratio ``r2``;
  every pressure zero equals ``s`` while the Assouad dimension is ``t``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded, InfeasibleEpsilon, SpecError
from .ifs_core import (AmbientSet, Generator, GeneratorFacts, IFSSpec, LevelSystem, Periodic,
                       register_generator)


def similarity_two_ratio(r1: float, r2: float, tol: float = 1e-14) -> float:
    """Unique ``s > 0`` with ``r1**s + r2**s == 1`` (bisection)."""
    if not (0 < r1 < 1 and 0 < r2 < 1):
        raise ValueError("ratios must lie in (0, 1)")

    def h(s):
        return r1 ** s + r2 ** s - 1.0

    lo, hi = 0.0, 1.0
    while h(hi) > 0:
        lo, hi = hi, 2 * hi
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        v = h(mid)
        if v > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi) and abs(h(hi)) <= tol:
            break
    return lo if abs(h(lo)) < abs(h(hi)) else hi


def cantor_endpoints(n: int, r2: float) -> np.ndarray:
    """Sorted left endpoints of the level-``n`` intervals of ``{r2 x, r2 x + 1 - r2}``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not 0 < r2 <= 0.5:
        raise ValueError("r2 must lie in (0, 1/2]")
    pts = np.zeros(1)
    for _ in range(n):
        pts = np.concatenate([r2 * pts, r2 * pts + (1.0 - r2)])
    return pts


# ---------------------------------------------------------------------------
# unbounded neighbourhood counts with small pressure zeros


def tuple_levels(ell: int, epsilon: float, on_infeasible: str = "raise") -> tuple[list[LevelSystem], list[float]]:
    """The ``ell - 1`` levels ``(x -> a_j x, x -> b_j x + a_j)``, ``j = 1..ell-1``.

    ``a_j = (ell - j) / (ell - j + 1)`` so that ``a_1 ... a_j = 1 - j/ell``, and
    ``b_j`` solves ``a_j**eps + b_j**eps = 1``.  Returns the levels and the
    actual two-ratio dimensions (equal to ``epsilon`` unless capped).
    """
    if ell < 2:
        raise ValueError("ell must be at least 2")
    levels, dims = [], []
    for j in range(1, ell):
        a = (ell - j) / (ell - j + 1)
        b = (1.0 - a ** epsilon) ** (1.0 / epsilon)
        if not a + b < 1:
            if on_infeasible == "raise":
                raise InfeasibleEpsilon(f"epsilon={epsilon} forces r1 + r2 >= 1 at ell={ell}, j={j}")
            b = (1.0 - a) * (1.0 - 2.0 ** -20)
        levels.append(LevelSystem(np.array([a, b]), np.ones((1, 1)), np.array([[0.0], [a]])))
        dims.append(similarity_two_ratio(a, b))
    return levels, dims


def _f_threshold_log_radius(f, target: float, log_r_prev: float) -> float | None:
    """Log of the largest ``r <= r_prev`` with ``f(r') >= target`` for every ``r' <= r``.

    Radii are handled in log space since they fall below the float range
    after a few stages.
    """
    if f == "log":
        return min(log_r_prev, -target)
    # monotone table of (r, f(r)) pairs, f nonincreasing in r
    table = sorted(f, key=lambda p: -p[0])
    for r, val in table:
        if r > 0 and math.log(r) <= log_r_prev and val >= target:
            return math.log(r)
    return None


def _log_max_left_ratio(ells: Sequence[int]) -> float:
    # a tuple's largest cylinder ratio is the left-branch product 1/ell
    return -math.fsum(math.log(e) for e in ells)


@dataclass
class UnboundedSchedule:
    ells: list[int]
    stage_ends: list[int]
    m: list[int]
    n: list[int]
    log_r: list[float]
    N: list[int]
    levels_total: int
    completed_stages: int


@register_generator("unbounded")
class UnboundedExample(Generator):
    """Concatenation of tuples ``Phi^ell`` in the block scheme.

    Params: ``epsilon`` in (0, 1), ``f`` (``"log"`` for ``log(1/r)`` or a list of
    ``[r, f(r)]`` pairs), ``depth_budget`` (number of levels to construct),
    ``radii`` (exponent ``J``: neighbourhood constants are estimated at
    ``r = 2^-1, ..., 2^-J``), ``on_infeasible`` (``"raise"`` or ``"cap"``).
    """

    def __init__(self, params: dict):
        super().__init__(params)
        self.epsilon = float(params.get("epsilon", 0.25))
        if not self.epsilon > 0:
            raise SpecError("epsilon must be positive")
        self.f = params.get("f", "log")
        if self.f != "log" and not isinstance(self.f, (list, tuple)):
            raise SpecError("f must be 'log' or a table of [r, f(r)] pairs")
        self.depth_budget = int(params.get("depth_budget", 1024))
        self.radii = int(params.get("radii", 16))
        self.refine = int(params.get("refine", 2))
        self.on_infeasible = params.get("on_infeasible", "raise")
        self._tuples: dict[int, list[LevelSystem]] = {}
        self._dims: dict[int, list[float]] = {}
        self.schedule = self._build()
        self._level_map = []
        for ell in self.schedule.ells:
            for j in range(ell - 1):
                self._level_map.append((ell, j))

    def tuple_for(self, ell: int) -> list[LevelSystem]:
        if ell not in self._tuples:
            self._tuples[ell], self._dims[ell] = tuple_levels(ell, self.epsilon, self.on_infeasible)
        return self._tuples[ell]

    def _block_spec(self, ells: Sequence[int]) -> IFSSpec:
        levels = [lv for e in ells for lv in self.tuple_for(e)]
        return IFSSpec(1, AmbientSet.unit_interval(), (), Periodic(tuple(levels)))

    def _neighbourhood_constant(self, ells: Sequence[int]) -> int:
        from .geometry import max_neighbourhood
        spec = self._block_spec(ells)
        best = 1
        for i in range(1, self.radii + 1):
            best = max(best, max_neighbourhood(spec, 2.0 ** -i, refinement_depth=self.refine).M_upper)
        return best

    def _build(self) -> UnboundedSchedule:
        budget = self.depth_budget
        ells: list[int] = []
        stage_ends, ms, ns, logr, Ns = [], [], [], [], []
        # stage 1: (2, ..., 2) with m_1 - 1 tuples already below r_1
        N1 = self._neighbourhood_constant([2])
        log_r1 = _f_threshold_log_radius(self.f, 4 * N1, 0.0)
        if log_r1 is None:
            raise SpecError("the f table does not reach the first threshold")
        m1 = 1 + max(1, math.ceil(log_r1 / math.log(0.5) - 1e-12))
        block = [2] * m1
        ells.extend(block)
        stage_ends.append(len(ells))
        ms.append(m1)
        logr.append(log_r1)
        Ns.append(N1)
        levels = sum(e - 1 for e in ells)
        k = 1
        log_rk = log_r1
        while levels < budget:
            # the first block repeats Phi^2 only, whose constant is already known
            Nk = N1 if k == 1 else self._neighbourhood_constant(block)
            Ns.append(Nk)
            log_next = _f_threshold_log_radius(self.f, Nk * 2 ** (k + 1), log_rk)
            if log_next is None:
                break
            log_P = _log_max_left_ratio(block)
            nk = max(1, math.ceil(log_next / log_P - 1e-12))
            # each stage repeats the previous block and appends one longer tuple
            block = block * nk + [k + 2]
            ells = list(block)
            ns.append(nk)
            ms.append(len(block))
            logr.append(log_next)
            stage_ends.append(len(ells))
            levels = sum(e - 1 for e in ells)
            log_rk = log_next
            k += 1
        completed = sum(1 for t in stage_ends if self.levels_in(ells[:t]) <= budget)
        return UnboundedSchedule(ells, stage_ends, ms, ns, logr, Ns, levels, completed)

    @staticmethod
    def levels_in(ells: Sequence[int]) -> int:
        return sum(e - 1 for e in ells)

    def level(self, n: int) -> LevelSystem:
        if n > min(self.depth_budget, len(self._level_map)):
            raise BudgetExceeded(f"level {n} lies beyond the depth budget {self.depth_budget}")
        ell, j = self._level_map[n - 1]
        return self.tuple_for(ell)[j]

    def levels_before_tuple(self, t: int) -> int:
        """Number of levels in the first ``t`` tuples."""
        return self.levels_in(self.schedule.ells[:t])

    def facts(self) -> GeneratorFacts:
        return GeneratorFacts(
            rn_lim=("levels come in complete tuples Phi^ell whose largest cylinder ratio is "
                    "1/ell <= 1/2, so level-n products are at most 2^-(number of completed tuples) -> 0"),
            homogeneous=False, r_min=0.0, max_maps=2, branching_bounded=False,
            bnc="falsified" if self.epsilon < 1 else None,
            notes=("weak tangents contain {1/(k+1), ..., k/(k+1)} for every k, so the Assouad "
                   "dimension is 1 while every pressure zero is <= epsilon"))

    def metadata(self) -> dict:
        s = self.schedule
        return {"ells_per_stage_end": s.stage_ends, "m": s.m, "n": s.n,
                "log_r": [float(v) for v in s.log_r], "N": s.N,
                "levels_constructed": min(s.levels_total, self.depth_budget),
                "completed_stages": s.completed_stages}


def build_unbounded_example(epsilon: float = 0.25, f="log", depth_budget: int = 1024,
                            radii: int = 16, on_infeasible: str = "raise") -> IFSSpec:
    params = {"epsilon": epsilon, "f": f if f == "log" else [list(map(float, p)) for p in f],
              "depth_budget": depth_budget, "radii": radii, "on_infeasible": on_infeasible}
    return IFSSpec.from_generator("unbounded", params)


# ---------------------------------------------------------------------------
# homogeneous example with prescribed pressure zero s and Assouad dimension t


def _k_rule(rule, n: int) -> int:
    if rule == "linear":
        return max(n, 2)
    if rule == "exponential":
        return 2 ** n
    if isinstance(rule, (list, tuple)):
        return int(rule[min(n, len(rule)) - 1])
    raise SpecError(f"unknown k rule {rule!r}")


@register_generator("arbitrary")
class ArbitraryValuesExample(Generator):
    """Levels ``Phi_{m_n}`` with ``m_n`` the largest ``m`` such that ``2^m <= k_n``.

    Params: ``s``, ``t`` with ``0 < s <= t <= 1``; ``k`` is ``"linear"``
    (``k_n = max(n, 2)``), ``"exponential"`` (``k_n = 2^n``) or an explicit
    list (its last entry repeats).
    """

    def __init__(self, params: dict):
        super().__init__(params)
        self.s = float(params.get("s", 0.5))
        self.t = float(params.get("t", 1.0))
        if not 0 < self.s <= self.t <= 1:
            raise SpecError("need 0 < s <= t <= 1")
        self.k = params.get("k", "linear")
        if isinstance(self.k, (list, tuple)) and any(int(v) < 2 for v in self.k):
            raise SpecError("every k_n must be at least 2 (each level needs two maps)")
        self.r1 = 2.0 ** (-1.0 / self.s)
        self.r2 = 2.0 ** (-1.0 / self.t)
        self._cache = lru_cache(maxsize=64)(self._level_for_m)

    def k_n(self, n: int) -> int:
        return _k_rule(self.k, n)

    def m_n(self, n: int) -> int:
        k = self.k_n(n)
        return k.bit_length() - 1

    def _level_for_m(self, m: int) -> LevelSystem:
        ys = cantor_endpoints(m, self.r2)
        return LevelSystem.homogeneous_line(self.r1 ** m, ys)

    def level(self, n: int) -> LevelSystem:
        return self._cache(self.m_n(n))

    def first_level_with(self, m: int) -> int:
        """Smallest ``n`` with ``m_n >= m`` (for the builtin rules)."""
        if self.k == "linear":
            return max(2 ** m, 1)
        if self.k == "exponential":
            return max(m, 1)
        for n in range(1, len(self.k) + 1):
            if self.m_n(n) >= m:
                return n
        raise ValueError(f"no level with m_n >= {m}")

    def facts(self) -> GeneratorFacts:
        bounded = isinstance(self.k, (list, tuple))
        mmax = max(self.m_n(n) for n in range(1, len(self.k) + 1)) if bounded else None
        bnc = None
        if not bounded:
            bnc = "falsified"
        elif self.s < self.t:
            bnc = "falsified"
        return GeneratorFacts(
            rn_lim=f"every ratio is a power r1^m with m >= 1 and r1 = {self.r1:.12g} < 1, so level-n products are <= r1^n -> 0",
            homogeneous=True,
            r_min=0.0 if not bounded else self.r1 ** mmax,
            max_maps=None if not bounded else 2 ** mmax,
            branching_bounded=bounded,
            bnc=bnc,
            notes=("#J_n = 2^{m_n} is unbounded, so branching is unbounded and the bounded "
                   "neighbourhood condition fails" if not bounded else
                   "Assouad dimension t exceeds the symbolic value s" if bnc else ""))

    def metadata(self) -> dict:
        return {"r1": self.r1, "r2": self.r2}


def build_arbitrary_values_example(s: float = 0.5, t: float = 1.0, k="linear") -> IFSSpec:
    return IFSSpec.from_generator("arbitrary", {"s": s, "t": t, "k": k})


# ---------------------------------------------------------------------------
# weak tangent witnesses


@dataclass
class TangentWitness:
    E_sample: np.ndarray
    rescaled: np.ndarray
    p_H: float
    sampling_error: float
    depth: int


def one_sided_hausdorff(E: np.ndarray, F: np.ndarray) -> float:
    """``max_{e in E} dist(e, F)``."""
    E = np.atleast_2d(np.asarray(E, dtype=float).T).T if np.ndim(E) == 1 else np.asarray(E, float)
    F = np.atleast_2d(np.asarray(F, dtype=float).T).T if np.ndim(F) == 1 else np.asarray(F, float)
    if E.shape[1] == 1:
        f = np.sort(F[:, 0])
        e = E[:, 0]
        i = np.clip(np.searchsorted(f, e), 1, f.size - 1) if f.size > 1 else np.zeros(e.size, int)
        if f.size == 1:
            return float(np.max(np.abs(e - f[0])))
        d = np.minimum(np.abs(e - f[i - 1]), np.abs(e - f[i]))
        return float(d.max())
    d = np.sqrt(((E[:, None, :] - F[None, :, :]) ** 2).sum(-1)).min(axis=1)
    return float(d.max())


def tangent_witness(spec: IFSSpec, target_E, word_prefix: Sequence[int], depth: int = 4,
                    cap: int = 10**7) -> TangentWitness:
    """Compare ``target_E`` with the limit set inside a cylinder, rescaled to unit size.

    The cylinder of ``word_prefix`` is ``g(K')`` where ``K'`` is the limit set
    of the shifted sequence and ``g`` the composite map, so
    ``(K cap g(X) - g(0)) / rho = O K'`` exactly.  ``K'`` is sampled by the
    coding points of all words of length ``<= depth``.  ``sampling_error``
    bounds how far each sample point may lie from ``K'`` (plus 1e-12 of
    floating-point slack).
    """
    from .geometry import composite, sample_limit_set
    g = composite(spec, word_prefix)
    sub = spec.shifted(len(word_prefix))
    pts, err = sample_limit_set(sub, depth, cap=cap)
    rescaled = pts @ g.orthogonal.T
    E = np.asarray(target_E, dtype=float)
    if E.ndim == 1:
        E = E[:, None]
    pH = one_sided_hausdorff(E, rescaled)
    return TangentWitness(E, rescaled, pH, float(err.max()) + 1e-12, depth)
