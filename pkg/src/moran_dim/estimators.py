"""Formula-free dimension estimators.

Covering numbers of localized pieces ``B(x, R) cap K`` are bracketed from
both sides: greedy covers of cylinder hulls from above, greedily built
separated sets of sample points from below.  On top of these sit

* ``psi(r, delta) = sup_x N_{r delta}(B(x, r) cap K)`` and
  ``Psi = log psi / log(1/delta)``, whose iterated limit is the Assouad
  dimension, and
* centred disc packings ``{B(x_i, r_i)}`` inside ``B(x, R)``, whose sums
  ``sum r_i^alpha / R^alpha`` stay bounded exactly when ``alpha`` exceeds
  the Assouad dimension.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BudgetExceeded
from .ifs_core import DEFAULT_CAP, TIE_ABS, Cylinders, IFSSpec, stratify
from .geometry import _descend_with_owner, words_at_depth

# ---------------------------------------------------------------------------
# covering numbers


@dataclass(frozen=True)
class CoverWitness:
    """``lower <= N_r(B(x, R) cap K) <= upper``.

    ``conversion`` is the number of ``r``-balls charged per hull when the
    upper bound counts hulls (dimension 2); 1-d bounds cover the union of
    hulls by intervals.
    """

    x: np.ndarray
    R: float
    r: float
    lower: int
    upper: int
    conversion: int
    method: str


def _cover_intervals(a: np.ndarray, b: np.ndarray, length: float) -> int:
    """Number of closed intervals of ``length`` in a cover of a union of intervals.

    Overlapping pieces are merged into components.  Components longer than
    ``length`` are tiled on their own; the rest are covered left to right,
    each interval starting at the left end of the first component it has
    to cover and taking every component that fits.  The chain of starts is
    counted by binary lifting, so nothing loops over pieces in Python.
    Exact whenever no interval can reach across a gap into the next
    component (e.g. for T(2r)-hulls of sets with gaps at least their size).
    """
    if a.size == 0:
        return 0
    order = np.argsort(a, kind="stable")
    a, b = a[order], np.maximum.accumulate(b[order])
    start = np.r_[True, a[1:] > b[:-1] + TIE_ABS]
    A = a[start]
    B = b[np.r_[np.flatnonzero(start)[1:] - 1, a.size - 1]]
    long_ = B - A > length + TIE_ABS
    count = int(np.ceil((B[long_] - A[long_]) / length - 1e-12).sum())
    A, B = A[~long_], B[~long_]
    n = A.size
    if n == 0:
        return count
    # nxt[i]: first component not inside [A_i, A_i + length]
    return count + _chain_length(np.searchsorted(B, A + length + TIE_ABS, "right"))


def _chain_length(nxt: np.ndarray) -> int:
    """Length of the chain ``0, nxt[0], nxt[nxt[0]], ...`` until it leaves ``range(n)``.

    ``nxt`` must be increasing along the chain (``nxt[i] > i``); counted by
    binary lifting.
    """
    n = nxt.size
    if n == 0:
        return 0
    table = [np.r_[nxt, n]]
    while (1 << len(table)) <= n:
        table.append(table[-1][table[-1]])
    steps, pos = 0, 0
    for k in range(len(table) - 1, -1, -1):
        if table[k][pos] < n:
            pos = int(table[k][pos])
            steps += 1 << k
    return steps + 1


def _cover_in_set_1d(a: np.ndarray, b: np.ndarray, z: np.ndarray, r: float) -> int:
    """Balls of radius ``r`` centred at the points ``z`` covering pieces ``[a, b]``.

    ``z[i]`` lies in piece ``i`` and every piece is at most ``r`` long, so
    the ball at ``z[i]`` reaches back over the whole piece.  Greedily, the
    first uncovered piece ``i`` gets the ball at the rightmost ``z`` within
    ``a[i] + r`` (just ``z[i]`` if the points are out of order); the next
    uncovered piece is the first one sticking out past that ball.
    """
    if a.size == 0:
        return 0
    order = np.argsort(a, kind="stable")
    a, b, z = a[order], np.maximum.accumulate(b[order]), z[order]
    n = a.size
    if np.all(np.diff(z) >= 0):
        z = z[np.searchsorted(z, a + r, "right") - 1]
    nxt = np.searchsorted(b, z + r, "right")
    return _chain_length(np.maximum(nxt, np.arange(1, n + 1)))


def _separated_count_1d(p: np.ndarray, gap: float) -> int:
    """Greedy size of a subset with consecutive distances ``> gap`` (optimal on a line)."""
    p = np.sort(p)
    nxt = np.searchsorted(p, p + gap, "right")
    i, count = 0, 0
    n = p.size
    while i < n:
        count += 1
        i = int(nxt[i])
    return count


def _separated_count(points: np.ndarray, gap: float) -> int:
    if points.shape[0] == 0:
        return 0
    if points.shape[1] == 1:
        return _separated_count_1d(points[:, 0], gap)
    chosen: dict[tuple, list[np.ndarray]] = {}
    count = 0
    for p in points[np.lexsort(points.T[::-1])]:
        cell = tuple(np.floor(p / gap).astype(int))
        ok = True
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for q in chosen.get((cell[0] + dx, cell[1] + dy), ()):
                    if np.linalg.norm(p - q) <= gap:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            chosen.setdefault(cell, []).append(p)
            count += 1
    return count


def _cover_upper(spec: IFSSpec, x: np.ndarray, R: float, r: float, refine: int,
                 cap: int, in_set: bool = False) -> tuple[int, int, str]:
    d = spec.dimension
    # centres in K: hulls of diameter at most r, one ball at a point of each
    scale = r / spec.ambient.diameter if in_set else 2 * r
    hulls = stratify(spec, min(scale, 0.999999), within=(x, R), cap=cap, keep_codes=False)
    # refine as far as the budget allows; coarser hulls still give a valid bound
    for k in range(refine, 0, -1):
        if not len(hulls):
            break
        try:
            hulls = _descend_with_owner(spec, hulls, k, within=(x, R), cap=cap)[-1][0]
            break
        except BudgetExceeded:
            continue
    if len(hulls) == 0:
        return 0, 1, "empty"
    if in_set:
        if d > 1:
            return len(hulls), 1, "hull count"
        z, e = hulls.coding_points(spec, "first")
        z2, e2 = hulls.coding_points(spec, "last")
        right = z2[:, 0] > z[:, 0]
        z, e = np.where(right, z2[:, 0], z[:, 0]), np.where(right, e2, e)
        c = hulls.centers(spec)[:, 0]
        h = hulls.rho * spec.ambient.radius
        reach = r - float(e.max()) + TIE_ABS
        if 2 * float(h.max()) > reach:
            return len(hulls), 1, "hull count"
        a = np.maximum(c - h, x[0] - R)
        b = np.minimum(c + h, x[0] + R)
        return _cover_in_set_1d(a, b, z, reach), 1, "centred cover"
    if d == 1:
        c = hulls.centers(spec)[:, 0]
        h = hulls.rho * spec.ambient.radius
        a = np.maximum(c - h, x[0] - R)
        b = np.minimum(c + h, x[0] + R)
        return _cover_intervals(a, b, 2 * r), 1, "interval cover"
    # each hull sits in a ball of radius rho * rad(X); cover that ball's
    # bounding cube by cubes of side 2r / sqrt(d), each inside an r-ball
    a = float(hulls.rho.max() * spec.ambient.radius)
    side = 2 * r / math.sqrt(d)
    conv = max(1, math.ceil(2 * a / side - 1e-12)) ** d
    return len(hulls) * conv, conv, "hull count"


def covering_number(spec: IFSSpec, x, R: float, r: float, refine: int = 2,
                    cap: int = DEFAULT_CAP, centers: str = "anywhere") -> CoverWitness:
    """Bracket ``N_r(B(x, R) cap K)`` for ``0 < r <= R``.

    ``centers="anywhere"`` counts balls centred anywhere in space;
    ``centers="in_set"`` counts balls centred in ``K`` (the covering number
    of ``K`` as a metric space in its own right, at most the former at
    radius ``r / 2``).

    Upper: cylinders of ``T(2r)`` meeting ``B(x, R)``, refined ``refine``
    levels, covered greedily by intervals of length ``2r`` (clipped to the
    ball) in dimension 1, or charged ``conversion`` balls each otherwise;
    never more than the ball-grid bound for ``B(x, R)`` itself.  With
    centres in ``K`` the hulls have diameter below ``r`` instead and get a
    ball at one of their points.  Lower (valid for both): a greedy subset of
    sample points of ``K`` inside ``B(x, R)`` whose pairwise distances
    exceed ``2r`` plus their errors.
    """
    if not 0 < r <= R:
        raise ValueError("need 0 < r <= R")
    if centers not in ("anywhere", "in_set"):
        raise ValueError("centers must be 'anywhere' or 'in_set'")
    x = np.asarray(x, dtype=float).reshape(-1)
    d = spec.dimension
    in_set = centers == "in_set"
    upper, conv, method = _cover_upper(spec, x, R, r, refine, cap, in_set)
    if not in_set:
        # B(x, R) itself: a grid of cubes of side 2r/sqrt(d), each inside an r-ball
        grid = max(1, math.ceil(2 * R * math.sqrt(d) / (2 * r) - 1e-12)) ** d
        if r >= R:
            grid = 1
        if grid < upper:
            upper, method = grid, "ball grid"
    elif r >= 2 * R and upper > 1:
        upper, method = 1, "single ball"
    lower = _cover_lower(spec, x, R, r, cap)
    return CoverWitness(x, R, r, min(lower, upper), upper, conv, method)


def _sample_points_in_ball(spec: IFSSpec, x: np.ndarray, R: float, scale: float,
                           cap: int) -> tuple[np.ndarray, np.ndarray]:
    if scale >= 1:
        cyl = Cylinders.root(spec.dimension)
    else:
        cyl = stratify(spec, scale, within=(x, R), cap=cap, keep_codes=False)
    pts, errs = [], []
    for which in ("first", "last"):
        p, e = cyl.coding_points(spec, which)
        pts.append(p)
        errs.append(e)
    P, E = np.concatenate(pts), np.concatenate(errs)
    inside = np.linalg.norm(P - x, axis=1) <= R - E + TIE_ABS
    return P[inside], E[inside]


def _cover_lower(spec: IFSSpec, x: np.ndarray, R: float, r: float, cap: int) -> int:
    P, E = _sample_points_in_ball(spec, x, R, r, cap)
    if P.shape[0] == 0:
        return 0
    return _separated_count(P, 2 * r + 2 * float(E.max()) + TIE_ABS)


class _LineCovers:
    """One stratification of a 1-d set, sorted, answering many balls by slicing.

    Selects exactly the cylinders the per-ball routines would enumerate
    (hulls are nested, so pruning ancestors outside a ball loses nothing),
    hence gives the same bounds as ``_cover_lower`` and the centred
    ``_cover_upper``.
    """

    def __init__(self, spec: IFSSpec, r: float, refine: int, cap: int, within=None):
        if r >= 1:
            cyl = Cylinders.root(1)
        else:
            cyl = stratify(spec, r, within=within, cap=cap, keep_codes=False)
        P, E = zip(*(cyl.coding_points(spec, w) for w in ("first", "last")))
        P, E = np.concatenate(P)[:, 0], np.concatenate(E)
        order = np.argsort(P, kind="stable")
        self.P, self.E = P[order], E[order]
        self.Emax = float(E.max()) if E.size else 0.0
        hulls = stratify(spec, min(r / spec.ambient.diameter, 0.999999), within=within, cap=cap,
                         keep_codes=False)
        # as in _cover_upper: refine as far as the budget allows
        for k in range(refine, 0, -1):
            if not len(hulls):
                break
            try:
                hulls = _descend_with_owner(spec, hulls, k, within=within, cap=cap)[-1][0]
                break
            except BudgetExceeded:
                continue
        if len(hulls) == 0:
            self.a = self.b = self.z = self.e = self.h = np.zeros(0)
            self.hmax = 0.0
            return
        z, e = hulls.coding_points(spec, "first")
        z2, e2 = hulls.coding_points(spec, "last")
        right = z2[:, 0] > z[:, 0]
        z, e = np.where(right, z2[:, 0], z[:, 0]), np.where(right, e2, e)
        c = hulls.centers(spec)[:, 0]
        h = hulls.rho * spec.ambient.radius
        order = np.argsort(c - h, kind="stable")
        self.a, self.b, self.z, self.e, self.h = (c - h)[order], (c + h)[order], z[order], e[order], h[order]
        self.hmax = float(h.max())

    def lower(self, x: float, R: float, r: float) -> int:
        if self.P.size == 0:
            return 0
        lo = np.searchsorted(self.P, x - R - self.Emax - TIE_ABS, "left")
        hi = np.searchsorted(self.P, x + R + TIE_ABS, "right")
        P, E = self.P[lo:hi], self.E[lo:hi]
        inside = np.abs(P - x) <= R - E + TIE_ABS
        if not inside.any():
            return 0
        return _separated_count_1d(P[inside], 2 * r + 2 * float(E[inside].max()) + TIE_ABS)

    def upper(self, x: float, R: float, r: float) -> int:
        if self.a.size == 0:
            return 0
        lo = np.searchsorted(self.a, x - R - TIE_ABS - 2 * self.hmax, "left")
        hi = np.searchsorted(self.a, x + R + TIE_ABS, "right")
        keep = np.flatnonzero(self.b[lo:hi] >= x - R - TIE_ABS) + lo
        if keep.size == 0:
            return 0
        reach = r - float(self.e[keep].max()) + TIE_ABS
        if 2 * float(self.h[keep].max()) > reach:
            return int(keep.size)
        a = np.maximum(self.a[keep], x - R)
        b = np.minimum(self.b[keep], x + R)
        return _cover_in_set_1d(a, b, self.z[keep], reach)


def _answer_on_line(spec: IFSSpec, r: float, refine: int, cap: int, queries, fallback) -> list[int]:
    """Answer ``(kind, x, R)`` queries (kind ``"lower"`` or ``"upper"``) at scale ``r``.

    Queries are grouped by position; each group shares one ``_LineCovers``
    over the window spanning its balls, halved until it fits the budget.
    A single query that still does not fit goes to ``fallback``.
    """
    out = [0] * len(queries)
    order = sorted(range(len(queries)), key=lambda i: queries[i][1])

    def run(idx):
        lo = min(queries[i][1] - queries[i][2] for i in idx)
        hi = max(queries[i][1] + queries[i][2] for i in idx)
        try:
            line = _LineCovers(spec, r, refine, cap, within=(np.array([(lo + hi) / 2]), (hi - lo) / 2))
        except BudgetExceeded:
            if len(idx) == 1:
                out[idx[0]] = fallback(*queries[idx[0]])
                return
            run(idx[: len(idx) // 2])
            run(idx[len(idx) // 2:])
            return
        for i in idx:
            kind, x, R = queries[i]
            out[i] = line.lower(x, R, r) if kind == "lower" else line.upper(x, R, r)

    # neighbouring balls share most of their cylinders: group them while the
    # window stays within 1.5 ball diameters
    group, left = [], math.inf
    for i in order:
        _, x, R = queries[i]
        if group and max(x + R, right) - min(x - R, left) > 3 * max(R, widest):
            run(group)
            group = []
        if not group:
            left, right, widest = x - R, x + R, R
        group.append(i)
        left, right, widest = min(left, x - R), max(right, x + R), max(widest, R)
    if group:
        run(group)
    return out


# ---------------------------------------------------------------------------
# psi and Psi


@dataclass(frozen=True)
class PsiSample:
    r: float
    delta: float
    psi: tuple[int, int]
    Psi: tuple[float, float]
    n_centers: int


def _Psi(v: int, delta: float) -> float:
    return math.log(v) / math.log(1 / delta) if v > 0 else -math.inf


def _centers(spec: IFSSpec, r: float, refine: int, cap: int):
    """Sample points of ``K`` (for the lower end) and hull balls (for the upper end)."""
    if r >= 1:
        base = Cylinders.root(spec.dimension)
        base = Cylinders(base.offset, base.orth, base.rho, base.log_rho, base.depth, None)
    else:
        base = stratify(spec, r, cap=cap, keep_codes=False)
    pts, errs = [], []
    for which in ("first", "last"):
        p, e = base.coding_points(spec, which)
        pts.append(p)
        errs.append(e)
    leaves = _descend_with_owner(spec, base, refine, cap=cap)[-1][0] if refine else base
    return (np.concatenate(pts), np.concatenate(errs), leaves.centers(spec),
            leaves.rho * spec.ambient.radius)


def psi(spec: IFSSpec, r: float, delta: float, refine: int = 1, cover_refine: int = 1,
        cap: int = DEFAULT_CAP, max_centers: int | None = None, seed: int = 0) -> PsiSample:
    """Bracket ``psi(r, delta) = sup_{x in K} N_{r delta}(B(x, r) cap K)``.

    Covers use balls centred in ``K``, so that ``psi`` is the function of
    ``K`` as a metric space and is submultiplicative:
    ``psi(r, d1 d2) <= psi(r, d1) psi(r d1, d2)``.  Centred and free covering
    numbers differ at most by halving the radius, which leaves the limit of
    ``Psi`` unchanged.

    The lower end is the largest lower covering bound around sample points
    of ``K`` (radius shrunk by the point's error).  The upper end bounds every
    ``x in K``: such ``x`` lies in some refined hull ``H`` of ``T(r)``, and
    ``B(x, r)`` sits inside ``B(center(H), r + rad(H))``.  ``max_centers``
    subsamples both center sets with a seeded generator (the upper end is
    then no longer a bound over all of ``K``).
    """
    if not 0 < delta < 1 or r <= 0:
        raise ValueError("need r > 0 and delta in (0, 1)")
    P, E, C, H = _centers(spec, r, refine, cap)
    if max_centers is not None:
        rng = np.random.default_rng(seed)
        if P.shape[0] > max_centers:
            keep = np.sort(rng.choice(P.shape[0], max_centers, replace=False))
            P, E = P[keep], E[keep]
        if C.shape[0] > max_centers:
            keep = np.sort(rng.choice(C.shape[0], max_centers, replace=False))
            C, H = C[keep], H[keep]
    rd = r * delta
    amb = spec.ambient

    def whole(c, rad):
        if amb.kind == "ball":
            return float(np.linalg.norm(c - amb.center)) + amb.radius <= rad
        return float(np.linalg.norm(amb.extreme_points() - c, axis=1).max()) <= rad

    # balls containing all of X give the same count; ask for it once
    queries, slots, seen_whole = [], [], {}
    for kind, pts, rads in (("lower", P, r - E), ("upper", C, r + H)):
        for p, rad in zip(pts, rads):
            if kind == "lower" and rad < rd:
                continue
            key = kind if whole(p, rad) else None
            if key is not None and key in seen_whole:
                slots.append((kind, seen_whole[key]))
                continue
            if key is not None:
                seen_whole[key] = len(queries)
            slots.append((kind, len(queries)))
            queries.append((kind, p, float(rad)))

    def direct(kind, x, R):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if kind == "lower":
            return _cover_lower(spec, x, R, rd, cap)
        return _cover_upper(spec, x, R, rd, cover_refine, cap, True)[0]

    if spec.dimension == 1:
        line_q = [(k, float(x[0]), R) for k, x, R in queries]
        answers = _answer_on_line(spec, rd, cover_refine, cap, line_q, direct)
    else:
        answers = [direct(*q) for q in queries]
    lo = max((answers[i] for k, i in slots if k == "lower"), default=0)
    hi = max((answers[i] for k, i in slots if k == "upper"), default=0)
    lo = min(lo, hi)
    return PsiSample(r, delta, (lo, hi), (_Psi(lo, delta), _Psi(hi, delta)), P.shape[0])


@dataclass
class AssouadInterval:
    lower: float
    upper: float
    delta: float
    samples: list[PsiSample]
    skipped: list[tuple[float, float]] = field(default_factory=list)
    caveat: str = ("finite truncation of lim_{delta->0} sup_r Psi(r, delta): the interval "
                   "brackets Psi at the smallest delta over the sampled r, not the limit")

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "delta", "psi_lo", "psi_hi", "Psi_lo", "Psi_hi"])
        for s in self.samples:
            w.writerow([f"{s.r:.12g}", f"{s.delta:.12g}", s.psi[0], s.psi[1],
                        f"{s.Psi[0]:.12g}", f"{s.Psi[1]:.12g}"])
        return buf.getvalue()


def empirical_assouad(spec: IFSSpec, delta_schedule: Sequence[float], r_schedule: Sequence[float],
                      anchors: Sequence[int] = (0,), cap: int = 10**6, refine: int = 1,
                      max_centers: int | None = None, seed: int = 0,
                      workers: int = 1) -> AssouadInterval:
    """``[max_r Psi_lo, max_r Psi_hi]`` at the smallest feasible ``delta``.

    ``anchors`` lists level offsets ``a``: each sample is taken in the
    shifted system (the limit set inside a level-``a`` cylinder, rescaled),
    which reaches deep scales of generated examples without enumerating
    the levels above.  Pairs that exceed the enumeration budget are skipped
    and recorded.  ``workers > 1`` evaluates samples on a thread pool; the
    results are collected in schedule order, so the output does not depend
    on it.
    """
    jobs = [(a, r, delta) for a in anchors for r in r_schedule for delta in delta_schedule]
    subs = {a: (spec.shifted(a) if a else spec) for a in anchors}

    def run(job):
        a, r, delta = job
        try:
            return psi(subs[a], r, delta, refine=refine, cap=cap,
                       max_centers=max_centers, seed=seed)
        except BudgetExceeded:
            return None

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    samples = [s for s in results if s is not None]
    skipped = [(r, delta) for (a, r, delta), s in zip(jobs, results) if s is None]
    if not samples:
        raise BudgetExceeded("no (r, delta) pair fits the enumeration budget")
    dmin = min(s.delta for s in samples)
    at = [s for s in samples if s.delta == dmin]
    return AssouadInterval(max(s.Psi[0] for s in at), max(s.Psi[1] for s in at), dmin, samples, skipped)


# ---------------------------------------------------------------------------
# centred packings


@dataclass
class PackingRecord:
    x: np.ndarray
    R: float
    centers: np.ndarray
    radii: np.ndarray
    depth: int

    def __len__(self):
        return self.radii.size

    def alpha_sum(self, alpha: float) -> float:
        return float(np.sum(self.radii ** alpha))

    def check(self) -> bool:
        """Independent O(k^2) check: closed balls inside ``B(x, R)``, pairwise disjoint, radii ``<= R``."""
        if np.any(self.radii <= 0) or np.any(self.radii > self.R):
            return False
        if np.any(np.linalg.norm(self.centers - self.x, axis=1) + self.radii > self.R):
            return False
        for i in range(len(self)):
            dist = np.linalg.norm(self.centers[i + 1:] - self.centers[i], axis=1)
            if np.any(dist <= self.radii[i + 1:] + self.radii[i]):
                return False
        return True


def greedy_packing(spec: IFSSpec, x, R: float, depth: int, margin: float = 0.01,
                   cap: int = DEFAULT_CAP) -> PackingRecord:
    """Centred packing of ``B(x, R)`` by balls around the depth-``depth`` cylinders.

    Each cylinder offers its hull center (the image of the center of ``X``,
    within ``rho * rad(X)`` of ``K``) if it lies in ``B(x, R(1 - margin))``.
    Cylinders are taken by decreasing ratio, then lexicographically; the
    radius is capped by the cylinder ratio, the distance to the boundary of
    ``B(x, R)`` and the gap to every ball already placed, then shrunk by
    1e-9 so closed balls stay disjoint.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    batch = words_at_depth(spec, depth, cap, keep_codes=True)[-1].sort_lex()
    cand = batch.centers(spec)
    order = np.argsort(-batch.rho, kind="stable")
    inner = R * (1 - margin)
    centers, radii = [], []
    for i in order:
        c = cand[i]
        dc = float(np.linalg.norm(c - x))
        if dc > inner:
            continue
        rad = min(float(batch.rho[i]), R - dc)
        if centers:
            gaps = np.linalg.norm(np.asarray(centers) - c, axis=1) - np.asarray(radii)
            rad = min(rad, float(gaps.min()))
        rad *= 1 - 1e-9
        if rad > 0:
            centers.append(c)
            radii.append(rad)
    C = np.asarray(centers).reshape(-1, spec.dimension)
    return PackingRecord(x, R, C, np.asarray(radii, dtype=float), depth)


@dataclass(frozen=True)
class PackingTest:
    alpha: float
    max_ratio: float
    ratios: tuple[float, ...]


def packing_exponent_test(packings: Sequence[PackingRecord], alpha: float) -> PackingTest:
    """``max`` over packings of ``sum r_i^alpha / R^alpha``."""
    ratios = tuple(p.alpha_sum(alpha) / p.R ** alpha for p in packings)
    return PackingTest(alpha, max(ratios), ratios)
