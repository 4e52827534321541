"""Pressure functions, their zeros and the symbolic Assouad formula.

For a window of levels ``n, ..., n+m-1`` the pressure is

    phi_{n,m}(t) = (1/m) * sum_k log sum_j r_{n+k,j}^t

(the m-fold sum over words factorizes level by level).  ``theta(n, m)``
is its unique zero.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import BracketFailure
from .ifs_core import IFSSpec
from .submax import check_subadd_implies_submax, check_submax_1d  # noqa: F401

SUBMAX_TOL = 1e-9


@dataclass(frozen=True)
class _Window:
    """Grouped log ratios of levels ``n..n+m-1``, concatenated level by level."""

    logr: np.ndarray
    logc: np.ndarray
    starts: np.ndarray
    m: int

    @classmethod
    def build(cls, spec: IFSSpec, n: int, m: int) -> "_Window":
        if n < 1 or m < 1:
            raise ValueError("n and m must be positive")
        groups = [spec.level(n + k).ratio_groups for k in range(m)]
        sizes = [g[0].size for g in groups]
        starts = np.r_[0, np.cumsum(sizes)[:-1]].astype(np.intp)
        return cls(np.concatenate([g[0] for g in groups]), np.concatenate([g[1] for g in groups]), starts, m)

    def pressure(self, t: float) -> float:
        a = self.logc + t * self.logr
        top = np.maximum.reduceat(a, self.starts)
        per_level = top + np.log(np.add.reduceat(np.exp(a - np.repeat(top, np.diff(np.r_[self.starts, a.size]))), self.starts))
        return math.fsum(per_level.tolist()) / self.m


def pressure(spec: IFSSpec, n: int, m: int, t: float) -> float:
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    return _Window.build(spec, n, m).pressure(t)


def pressure_derivative(spec: IFSSpec, n: int, m: int, t: float) -> float:
    """``d/dt phi_{n,m}(t)``: average over levels of the ``r^t``-weighted mean log ratio."""
    total = []
    for k in range(m):
        logr, logc = spec.level(n + k).ratio_groups
        a = logc + t * logr
        w = np.exp(a - a.max())
        total.append(float(np.dot(w, logr) / w.sum()))
    return math.fsum(total) / m


@dataclass(frozen=True)
class ThetaResult:
    theta: float
    residual: float
    iterations: int


def theta(spec: IFSSpec, n: int, m: int, tol: float = 1e-12) -> ThetaResult:
    """Zero of ``phi_{n,m}`` by bisection on ``[0, B]``, ``B`` doubled from 1.

    Stops when the bracket is narrower than ``tol`` and returns the endpoint
    with the smaller ``|phi|``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    win = _Window.build(spec, n, m)
    pressure_at = win.pressure
    f0 = pressure_at(0.0)
    if f0 <= 0:
        raise BracketFailure(f"phi_{{{n},{m}}}(0) = {f0} is not positive")
    lo, hi = 0.0, 1.0
    flo, fhi = f0, pressure_at(hi)
    it = 0
    while fhi >= 0:
        lo, flo = hi, fhi
        hi *= 2
        fhi = pressure_at(hi)
        it += 1
        if hi > 1e12:
            raise BracketFailure("could not bracket the zero of the pressure")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = pressure_at(mid)
        it += 1
        if fm == 0:
            return ThetaResult(mid, 0.0, it)
        if fm > 0:
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    if abs(flo) <= abs(fhi):
        return ThetaResult(lo, abs(flo), it)
    return ThetaResult(hi, abs(fhi), it)


def theta_value(spec: IFSSpec, n: int, m: int, tol: float = 1e-12) -> float:
    return theta(spec, n, m, tol).theta


def pressure_derivative_at_zero(spec: IFSSpec, n: int, m: int) -> float:
    """``phi'_{n,m}(theta(n, m))``; strictly negative when every ratio is < 1."""
    return pressure_derivative(spec, n, m, theta(spec, n, m).theta)


def check_theta_submax(spec: IFSSpec, n: int, m: int, k: int, tol: float = SUBMAX_TOL,
                       cache: dict | None = None) -> bool:
    """``theta(n, m+k) <= max(theta(n, m), theta(n+m, k)) + tol``."""
    th = _cached_theta(spec, cache)
    return th(n, m + k) <= max(th(n, m), th(n + m, k)) + tol


def _cached_theta(spec: IFSSpec, cache: dict | None):
    cache = {} if cache is None else cache

    def th(n, m):
        if (n, m) not in cache:
            cache[(n, m)] = theta(spec, n, m).theta
        return cache[(n, m)]
    return th


# ---------------------------------------------------------------------------
# tables and reports


@dataclass
class ThetaTable:
    entries: dict[tuple[int, int], ThetaResult] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.entries[key]

    def __len__(self):
        return len(self.entries)

    def values(self) -> dict[tuple[int, int], float]:
        return {k: v.theta for k, v in self.entries.items()}

    def max_residual(self) -> float:
        return max((v.residual for v in self.entries.values()), default=0.0)

    def rows(self):
        for (n, m) in sorted(self.entries):
            e = self.entries[(n, m)]
            yield n, m, e.theta, e.residual

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "m", "theta", "residual"])
        for n, m, t, r in self.rows():
            w.writerow([n, m, f"{t:.12g}", f"{r:.12g}"])
        return buf.getvalue()


def theta_table(spec: IFSSpec, ns: Iterable[int], ms: Iterable[int], tol: float = 1e-12) -> ThetaTable:
    ms = list(ms)
    tab = ThetaTable()
    for n in ns:
        for m in ms:
            tab.entries[(n, m)] = theta(spec, n, m, tol)
    return tab


@dataclass
class DimensionReport:
    """``s_m = sup_n theta(n, m)`` over a window and ``estimate = min_m s_m``.

    ``estimate`` is the Assouad dimension only under the bounded
    neighbourhood condition; ``bnc`` records whether that was verified.
    """

    s_by_m: list[tuple[int, float]]
    estimate: float
    upper_certificates: list[tuple[int, float]]
    window: str
    window_limited: bool
    bnc: str = "unknown"
    first_level: list[tuple[int, float]] = field(default_factory=list)

    @property
    def dimension_claimed(self) -> bool:
        return self.bnc == "verified"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "sup_theta"])
        for m, s in self.s_by_m:
            w.writerow([m, f"{s:.12g}"])
        return buf.getvalue()


def assouad_symbolic(spec: IFSSpec, m_max: int, n_window: Iterable[int] | None = None,
                     bnc: str = "unknown", tol: float = 1e-12) -> DimensionReport:
    """Evaluate ``lim_m sup_n theta(n, m)`` as ``min_m`` over ``m = 1..m_max``.

    Periodic specs default to the fundamental domain as ``n``-window (exact);
    generator specs need ``n_window`` and are flagged as window-limited.
    """
    if m_max < 1:
        raise ValueError("m_max must be positive")
    if n_window is None:
        ns = list(spec.default_window())
        limited = not spec.is_periodic
    else:
        ns = list(n_window)
        limited = not spec.is_periodic or set(spec.default_window()) - set(ns) != set()
    s_by_m, first = [], []
    for m in range(1, m_max + 1):
        vals = [theta(spec, n, m, tol) for n in ns]
        s_by_m.append((m, max(v.theta for v in vals)))
        first.append((m, theta(spec, 1, m, tol).theta))
    est = min(s for _, s in s_by_m)
    slack = 2 * tol
    certs = [(m, s + slack) for m, s in s_by_m]
    desc = f"n in [{ns[0]}, {ns[-1]}]" if ns == list(range(ns[0], ns[-1] + 1)) else f"n in {ns}"
    if spec.is_periodic and n_window is None:
        desc += " (fundamental domain)"
    return DimensionReport(s_by_m, est, certs, desc, limited, bnc, first)
