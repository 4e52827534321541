"""Geometric cylinders, neighbourhood counts and separation conditions.

Membership in the limit set is only semi-decidable, so neighbourhood counts
come as intervals: the upper end counts cylinders whose (refined) hulls come
close enough, the lower end counts cylinders holding a sample point of the
limit set that is provably close enough.  Balls are closed throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import BudgetExceeded, SpecError
from .ifs_core import (DEFAULT_CAP, TIE_ABS, Cylinders, IFSSpec, Word, _expand, expand_mixed, stratify)

FRACTION_LIMIT = 4096


# ---------------------------------------------------------------------------
# composites and coding points


@dataclass(frozen=True, eq=False)
class AffineComposite:
    """``x -> linear @ x + offset`` with ``linear = scale * orthogonal``."""

    scale: float
    orthogonal: np.ndarray
    offset: np.ndarray

    @property
    def linear(self) -> np.ndarray:
        return self.scale * self.orthogonal

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.linear.T + self.offset


def _indices(word) -> tuple[int, ...]:
    return word.indices if isinstance(word, Word) else tuple(int(j) for j in word)


def composite(spec: IFSSpec, word) -> AffineComposite:
    """``S_{1,j_1} o ... o S_{n,j_n}``; the identity for the empty word."""
    d = spec.dimension
    orth = np.eye(d)
    off = np.zeros(d)
    scale = 1.0
    for n, j in enumerate(_indices(word), start=1):
        lv = spec.level(n)
        if not 0 <= j < len(lv):
            raise IndexError(f"index {j} out of range for level {n}")
        off = off + scale * (orth @ lv.translations[j])
        orth = orth @ lv.orth[j]
        scale = scale * float(lv.ratios[j])
    return AffineComposite(scale, orth, off)


@dataclass(frozen=True)
class CodingPoint:
    point: np.ndarray
    error_radius: float


def coding_point(spec: IFSSpec, word, depth_extension: int = 20) -> CodingPoint:
    """Image of the center of ``X`` under the word extended by ``depth_extension`` zeros.

    The point of ``K`` coded by any infinite extension of the extended word
    lies within ``error_radius = rho(extended word) * radius(X)``.
    """
    idx = _indices(word)
    ext = idx + (0,) * depth_extension
    g = composite(spec, ext)
    return CodingPoint(g(spec.ambient.center), g.scale * spec.radius)


def words_at_depth(spec: IFSSpec, depth: int, cap: int = DEFAULT_CAP, keep_codes: bool = True) -> list[Cylinders]:
    """All cylinders of length ``0..depth``, one batch per length."""
    out = [Cylinders.root(spec.dimension)]
    if not keep_codes:
        out[0] = Cylinders(out[0].offset, out[0].orth, out[0].rho, out[0].log_rho, out[0].depth, None)
    total = 1
    for k in range(depth):
        total += len(out[-1]) * len(spec.level(k + 1))
        if total > cap:
            raise BudgetExceeded(f"enumerating words up to length {depth} exceeds {cap}")
        out.append(_expand(spec, out[-1], k, keep_codes))
    return out


def sample_limit_set(spec: IFSSpec, depth: int, cap: int = DEFAULT_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Coding points (both extensions) of every word of length ``<= depth``."""
    pts, errs = [], []
    for batch in words_at_depth(spec, depth, cap, keep_codes=False):
        for which in ("first", "last"):
            p, e = batch.coding_points(spec, which)
            pts.append(p)
            errs.append(e)
    return np.concatenate(pts), np.concatenate(errs)


def render_points(spec: IFSSpec, depth: int, cap: int = DEFAULT_CAP) -> tuple[np.ndarray, np.ndarray]:
    """Coding points (first extension) of the words of length exactly ``depth``, lexicographic.

    The error column is the cylinder diameter ``rho * diam(X)``: every point
    of ``K`` coded by the word lies that close to the reported point.
    """
    batch = words_at_depth(spec, depth, cap, keep_codes=True)[-1].sort_lex()
    pts, _ = batch.coding_points(spec, "first")
    return pts, batch.rho * spec.ambient.diameter


# ---------------------------------------------------------------------------
# bounding balls of hulls


def _hull_balls(spec: IFSSpec, cyl: Cylinders) -> tuple[np.ndarray, np.ndarray]:
    """Center and radius of a ball containing each hull (exact for intervals)."""
    return cyl.centers(spec), cyl.rho * spec.ambient.radius


def _descend_with_owner(spec: IFSSpec, cyl: Cylinders, levels: int, within=None,
                        cap: int = DEFAULT_CAP) -> list[tuple[Cylinders, np.ndarray]]:
    """Descendants of each cylinder, generation by generation, tagged with the ancestor's index."""
    owner = np.arange(len(cyl))
    cur = Cylinders(cyl.offset, cyl.orth, cyl.rho, cyl.log_rho, cyl.depth, None)
    gens = [(cur, owner)]
    total = len(cur)
    for _ in range(levels):
        total += sum(len(spec.level(int(k) + 1)) * int(c)
                     for k, c in zip(*np.unique(cur.depth, return_counts=True)))
        if total > cap:
            raise BudgetExceeded(f"refinement exceeds {cap} cylinders")
        cur, parent = expand_mixed(spec, cur)
        owner = owner[parent]
        if within is not None:
            keep = cur.hull_distance(spec, within[0]) <= within[1] + TIE_ABS
            cur, owner = cur.take(keep), owner[keep]
        gens.append((cur, owner))
    return gens


# ---------------------------------------------------------------------------
# neighbourhood counts


@dataclass(frozen=True)
class NeighbourhoodCount:
    lower: int
    upper: int
    x: np.ndarray
    r: float
    refinement_depth: int
    slack: float = TIE_ABS


def neighbourhood_count(spec: IFSSpec, x, r: float, refinement_depth: int = 8,
                        cap: int = DEFAULT_CAP) -> NeighbourhoodCount:
    """Bracket ``#{Q in T(r) : pi(Q) meets B(x, r)}``.

    upper: cylinders with a depth-``refinement_depth`` descendant hull meeting
    the closed ball; lower: cylinders with a descendant coding point ``p``
    (any depth up to the refinement) satisfying ``|p - x| <= r - err(p)``.
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    x = np.asarray(x, dtype=float).reshape(-1)
    cand = stratify(spec, r, within=(x, r), cap=cap, keep_codes=False)
    if len(cand) == 0:
        return NeighbourhoodCount(0, 0, x, r, refinement_depth)
    gens = _descend_with_owner(spec, cand, refinement_depth, within=(x, r), cap=cap)
    upper = np.unique(gens[-1][1]).size
    hit = np.zeros(len(cand), dtype=bool)
    for cyl, own in gens:
        if len(cyl) == 0:
            continue
        for which in ("first", "last"):
            p, e = cyl.coding_points(spec, which)
            dist = np.linalg.norm(p - x, axis=1)
            hit[own[dist <= r - e + TIE_ABS]] = True
    return NeighbourhoodCount(int(hit.sum()), int(upper), x, r, refinement_depth)


def _pairs_within(c1: np.ndarray, rad1: np.ndarray, c2: np.ndarray, rad2: np.ndarray,
                  reach: float) -> tuple[np.ndarray, np.ndarray]:
    """Index pairs ``(i, j)`` with ``|c1_i - c2_j| <= rad1_i + rad2_j + reach``.

    Sweeps along the first coordinate; a pair can only qualify when its
    first coordinates differ by at most ``max(rad1) + max(rad2) + reach``.
    """
    order = np.argsort(c2[:, 0], kind="stable")
    key = c2[order, 0]
    w = (rad1.max() if rad1.size else 0.0) + (rad2.max() if rad2.size else 0.0) + reach + TIE_ABS
    lo = np.searchsorted(key, c1[:, 0] - w, "left")
    hi = np.searchsorted(key, c1[:, 0] + w, "right")
    cnt = hi - lo
    ii = np.repeat(np.arange(c1.shape[0]), cnt)
    start = np.repeat(lo - np.concatenate([[0], np.cumsum(cnt)[:-1]]), cnt)
    jj = order[np.arange(ii.size) + start]
    dist = np.linalg.norm(c1[ii] - c2[jj], axis=1)
    ok = dist <= rad1[ii] + rad2[jj] + reach + TIE_ABS
    return ii[ok], jj[ok]


def _count_distinct(ii: np.ndarray, owners: np.ndarray, n: int) -> np.ndarray:
    """For each ``i < n`` the number of distinct owners paired with it."""
    if ii.size == 0:
        return np.zeros(n, dtype=int)
    m = int(owners.max()) + 1
    keys = np.unique(ii.astype(np.int64) * m + owners.astype(np.int64))
    return np.bincount(keys // m, minlength=n)


@dataclass(frozen=True)
class MaxNeighbourhood:
    M_lower: int
    M_upper: int
    r: float
    n_centers: int
    refinement_depth: int


def max_neighbourhood(spec: IFSSpec, r: float, refinement_depth: int = 4,
                      cap: int = DEFAULT_CAP) -> MaxNeighbourhood:
    """Bracket ``M(r) = sup_{x in K} #N(x, r)``.

    Lower: counts around sample points of ``K`` (coding points of every
    refined cylinder, both extensions), each using the radius shrunk by its
    own error.  Upper: every ``x`` in ``K`` lies in some refined hull ``H``,
    and any cylinder counted at ``x`` has a refined hull within ``r`` of
    ``H``; hull-to-hull distances use bounding balls (exact for intervals).
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    sl = stratify(spec, r, cap=cap, keep_codes=False)
    gens = _descend_with_owner(spec, sl, refinement_depth, cap=cap)
    leaves, owner = gens[-1]
    c, rad = _hull_balls(spec, leaves)
    ii, jj = _pairs_within(c, rad, c, rad, r)
    M_upper = int(_count_distinct(ii, owner[jj], len(leaves)).max())
    # sample points of K at every generation
    pts, errs, owns = [], [], []
    for cyl, own in gens:
        for which in ("first", "last"):
            p, e = cyl.coding_points(spec, which)
            pts.append(p)
            errs.append(e)
            owns.append(own)
    P, E, O = np.concatenate(pts), np.concatenate(errs), np.concatenate(owns)
    # p_i counts owner O_j when |p_i - p_j| <= r - E_i - E_j
    ii, jj = _pairs_within(P, np.zeros_like(E), P, np.zeros_like(E), r)
    ok = np.linalg.norm(P[ii] - P[jj], axis=1) <= r - E[ii] - E[jj] + TIE_ABS
    M_lower = int(_count_distinct(ii[ok], O[jj[ok]], P.shape[0]).max())
    return MaxNeighbourhood(M_lower, M_upper, r, P.shape[0], refinement_depth)


# ---------------------------------------------------------------------------
# branching


def branching_count(spec: IFSSpec, r: float, cap: int = DEFAULT_CAP) -> int:
    """``beta(r) = max_{Q in T(r)} #{Q' in T(r) : Q' extends parent(Q)}`` (symbolic)."""
    sl = stratify(spec, r, cap=cap, keep_codes=True)
    counts: dict[bytes, int] = {}
    rows = sl.codes
    depths = sl.depth
    for row, k in zip(rows, depths):
        for p in range(int(k)):
            key = row[:p].tobytes()
            counts[key] = counts.get(key, 0) + 1
    return max(counts[row[:int(k) - 1].tobytes()] for row, k in zip(rows, depths))


# ---------------------------------------------------------------------------
# open set condition


@dataclass
class OSCReport:
    status: str
    witness: dict | None
    levels_checked: int
    notes: list[str] = field(default_factory=list)


def _osc_level_1d(spec: IFSSpec, n: int):
    lv = spec.level(n)
    lo, hi = float(spec.ambient.lo[0]), float(spec.ambient.hi[0])
    a = lv.ratios * lv.orth[:, 0, 0]
    t = lv.translations[:, 0]
    left = np.minimum(a * lo, a * hi) + t
    right = np.maximum(a * lo, a * hi) + t
    order = np.lexsort((right, left))
    exact = len(lv) <= FRACTION_LIMIT
    if exact:
        L = [Fraction(float(lv.ratios[j])) * Fraction(float(lv.orth[j, 0, 0])) for j in range(len(lv))]
        T = [Fraction(float(v)) for v in t]
        Flo, Fhi = Fraction(lo), Fraction(hi)
        ends = [sorted((L[j] * Flo + T[j], L[j] * Fhi + T[j])) for j in range(len(lv))]
        order = sorted(range(len(lv)), key=lambda j: (ends[j][0], ends[j][1]))
        reach, who = None, None
        for j in order:
            if reach is not None and ends[j][0] < reach:
                ov = (float(ends[j][0]), float(min(reach, ends[j][1])))
                return "fail", {"level": n, "maps": (who, j), "overlap": ov}
            if reach is None or ends[j][1] > reach:
                reach, who = ends[j][1], j
        return "pass", None
    # large levels: floating point with a symmetric slack band
    reach = -np.inf
    who = None
    band = TIE_ABS
    status = "pass"
    for j in order:
        if left[j] < reach - band:
            return "fail", {"level": n, "maps": (who, int(j)), "overlap": (float(left[j]), float(min(reach, right[j])))}
        if left[j] < reach + band:
            status = "unknown"
        if right[j] > reach:
            reach, who = right[j], int(j)
    return status, None


def _rect_corners(spec: IFSSpec, lv, j) -> np.ndarray:
    pts = spec.ambient.extreme_points()
    return lv.ratios[j] * pts @ lv.orth[j].T + lv.translations[j]


def _osc_level_2d(spec: IFSSpec, n: int):
    lv = spec.level(n)
    k = len(lv)
    corners = [_rect_corners(spec, lv, j) for j in range(k)]
    status = "pass"
    for a in range(k):
        for b in range(a + 1, k):
            A, B = corners[a], corners[b]
            axes = []
            for P in (A, B):
                e1, e2 = P[1] - P[0], P[2] - P[0]
                for e in (e1, e2):
                    nrm = np.linalg.norm(e)
                    if nrm > 0:
                        axes.append(np.array([-e[1], e[0]]) / nrm)
            gaps = []
            for ax in axes:
                pa, pb = A @ ax, B @ ax
                gaps.append(max(pb.min() - pa.max(), pa.min() - pb.max()))
            g = max(gaps)
            aligned = all(abs(ax[0]) in (0.0, 1.0) for ax in axes)
            # open interiors may touch; rotated images get a slack band
            separated = g >= 0 if aligned else g >= TIE_ABS
            if separated:
                continue
            if g > -TIE_ABS and not aligned:
                status = "unknown"
                continue
            lo = np.maximum(A.min(0), B.min(0))
            hi = np.minimum(A.max(0), B.max(0))
            return "fail", {"level": n, "maps": (a, b), "overlap": (lo.tolist(), hi.tolist())}
    return status, None


def check_osc(spec: IFSSpec, max_level: int | None = None) -> OSCReport:
    """Pairwise disjointness of ``S_{n,j}(X°)`` within each level.

    Periodic specs are checked on their fundamental domain; generator specs
    on ``max_level`` levels (default 64).  Dimension 1 uses exact rational
    arithmetic on the float inputs; dimension 2 a separating-axis test,
    exact for axis-parallel images and with a 1e-12 ``unknown`` band otherwise.
    """
    if spec.ambient.kind != "box":
        raise SpecError("the open set check needs a box as X")
    if spec.dimension not in (1, 2):
        raise SpecError("geometry is implemented for dimensions 1 and 2")
    fd = spec.fundamental_domain
    L = max_level if max_level is not None else (fd if fd is not None else 64)
    if fd is not None:
        L = min(L, fd)
    worst = "pass"
    checked = 0
    for n in range(1, L + 1):
        try:
            lv_status, wit = (_osc_level_1d if spec.dimension == 1 else _osc_level_2d)(spec, n)
        except BudgetExceeded:
            break
        checked = n
        if lv_status == "fail":
            return OSCReport("fail", wit, n)
        if lv_status == "unknown":
            worst = "unknown"
    notes = []
    if fd is None:
        notes.append(f"generator spec: checked the first {checked} levels only")
    return OSCReport(worst, None, checked, notes)


# ---------------------------------------------------------------------------
# cone condition


def _quarter_disc_in_rect(rad: float, w: float, h: float) -> float:
    """Area of ``{x, y >= 0, x^2 + y^2 <= rad^2, x <= w, y <= h}``."""
    def F(u):  # integral of sqrt(rad^2 - x^2) from 0 to u
        u = min(max(u, 0.0), rad)
        return 0.5 * (u * math.sqrt(rad * rad - u * u) + rad * rad * math.asin(u / rad))
    xmax = min(w, rad)
    xs = math.sqrt(max(rad * rad - h * h, 0.0)) if h < rad else 0.0
    xs = min(xs, xmax)
    return h * xs + (F(xmax) - F(xs))


def cone_constant(spec: IFSSpec, normalization: str = "radius") -> float:
    """``inf_{x in X, r in (0,1)} r^-d Leb(B(x, r) cap X°)`` for a box ``X``.

    The infimum is attained at a corner as ``r -> 1``.  With
    ``normalization="ball"`` the ratio is taken against ``Leb(B(x, r))`` over
    ``r in (0, diam X)`` instead, which is the constant in the neighbourhood bound.
    """
    amb = spec.ambient
    if amb.kind != "box":
        raise SpecError("the cone constant is implemented for boxes")
    sides = amb.hi - amb.lo
    d = spec.dimension
    if normalization == "radius":
        rmax, vol = 1.0, 1.0
    elif normalization == "ball":
        rmax = amb.diameter
        vol = 2.0 if d == 1 else math.pi
    else:
        raise ValueError("normalization must be 'radius' or 'ball'")
    if d == 1:
        return min(rmax, float(sides[0])) / rmax / vol
    if d == 2:
        return _quarter_disc_in_rect(rmax, float(sides[0]), float(sides[1])) / rmax ** 2 / vol
    raise SpecError("the cone constant is implemented for dimensions 1 and 2")


def cone_ratio(spec: IFSSpec, x, r: float, samples: int = 200_001) -> float:
    """``r^-d Leb(B(x, r) cap X°)`` at one point; exact in dimension 1."""
    amb = spec.ambient
    x = np.asarray(x, dtype=float).reshape(-1)
    if spec.dimension == 1:
        a, b = float(amb.lo[0]), float(amb.hi[0])
        return max(0.0, min(b, x[0] + r) - max(a, x[0] - r)) / r
    if spec.dimension == 2 and amb.kind == "box":
        # midpoint rule over the horizontal extent of the disc
        u = x[0] - r + (np.arange(samples) + 0.5) * (2 * r / samples)
        half = np.sqrt(np.maximum(r * r - (u - x[0]) ** 2, 0.0))
        inside = (u > amb.lo[0]) & (u < amb.hi[0])
        top = np.minimum(x[1] + half, amb.hi[1])
        bot = np.maximum(x[1] - half, amb.lo[1])
        area = np.sum(np.where(inside, np.maximum(top - bot, 0.0), 0.0)) * (2 * r / samples)
        return float(area / r ** 2)
    raise SpecError("cone ratio is implemented for intervals and boxes")


# ---------------------------------------------------------------------------
# bounded neighbourhood verdict


def default_r_schedule(K: int = 12) -> list[float]:
    return [2.0 ** -k for k in range(1, K + 1)]


def ratio_floor(spec: IFSSpec) -> float:
    """Smallest ratio over the fundamental domain (generator certificate otherwise)."""
    fd = spec.fundamental_domain
    if fd is None:
        return spec.generator.facts().r_min
    return min(float(spec.level(n).ratios.min()) for n in range(1, fd + 1))


def is_homogeneous(spec: IFSSpec) -> bool:
    fd = spec.fundamental_domain
    if fd is None:
        return spec.generator.facts().homogeneous
    return all(spec.level(n).homogeneous for n in range(1, fd + 1))


@dataclass
class BNCVerdict:
    status: str
    clauses: dict[str, float]
    bound: float | None
    reason: str
    branching: dict[float, int] = field(default_factory=dict)
    branching_bounded: bool | None = None
    r_min: float = 0.0
    cone: float | None = None
    witness: dict | None = None


def bnc_verdict(spec: IFSSpec, r_schedule: Iterable[float] | None = None,
                osc: OSCReport | None = None, bound_limit: float | None = None,
                cap: int = 10**6) -> BNCVerdict:
    """Decide the bounded neighbourhood condition where the sufficient or necessary conditions allow.

    ``verified`` when the open set condition holds together with one of:
    (a) cone condition and bounded branching, (b) homogeneity and bounded
    branching, (c) ratios bounded below.  Every satisfied clause is listed
    with its bound on ``#N(x, r)``.  ``falsified`` when the generator
    certifies failure (e.g. unbounded branching) or when sampled
    neighbourhood counts exceed ``bound_limit``.
    """
    rs = list(r_schedule) if r_schedule is not None else default_r_schedule()
    osc = osc or check_osc(spec)
    d = spec.dimension
    amb = spec.ambient
    vol_ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    geom = (2 * amb.diameter) ** d * vol_ball / amb.volume
    r_min = ratio_floor(spec)
    facts = spec.generator.facts() if spec.generator is not None else None

    branching: dict[float, int] = {}
    for r in rs:
        try:
            branching[r] = branching_count(spec, r, cap=cap)
        except BudgetExceeded:
            break
    if facts is not None:
        bounded = facts.branching_bounded
    else:
        # periodic: every ratio is >= r_min > 0, which bounds the depth gap
        # between a parent and its descendants in T(r)
        bounded = True
    N = max(branching.values()) if branching else None
    cone = None
    if amb.kind == "box" and d in (1, 2):
        cone = cone_constant(spec, "ball")

    clauses: dict[str, float] = {}
    if osc.status == "pass":
        if bounded and N is not None and cone:
            clauses["a"] = 2 ** d * N / cone
        if bounded and N is not None and is_homogeneous(spec):
            clauses["b"] = N * geom
        if r_min > 0:
            clauses["c"] = r_min ** -d * geom
    if clauses:
        best = min(clauses, key=clauses.get)
        return BNCVerdict("verified", clauses, clauses[best],
                          f"open set condition with clause(s) {', '.join(sorted(clauses))}",
                          branching, bounded, r_min, cone)
    if facts is not None and facts.bnc == "falsified":
        return BNCVerdict("falsified", {}, None, facts.notes, branching, bounded, r_min, cone,
                          {"branching": branching})
    if bound_limit is not None:
        for r in rs:
            try:
                mn = max_neighbourhood(spec, r, cap=cap)
            except BudgetExceeded:
                break
            if mn.M_lower > bound_limit:
                return BNCVerdict("falsified", {}, None,
                                  f"M({r:g}) >= {mn.M_lower} exceeds {bound_limit}",
                                  branching, bounded, r_min, cone, {"r": r, "M_lower": mn.M_lower})
    reason = "open set condition failed" if osc.status == "fail" else "no sufficient condition applies"
    return BNCVerdict("unknown", {}, None, reason, branching, bounded, r_min, cone)


@dataclass
class ConditionReport:
    osc: OSCReport
    cone_constant: float | None
    r_min: float
    branching: dict[float, int]
    bnc: BNCVerdict


def condition_report(spec: IFSSpec, r_schedule: Sequence[float] | None = None,
                     cap: int = 10**6) -> ConditionReport:
    osc = check_osc(spec)
    cone = cone_constant(spec) if spec.ambient.kind == "box" else None
    verdict = bnc_verdict(spec, r_schedule, osc=osc, cap=cap)
    return ConditionReport(osc, cone, verdict.r_min, verdict.branching, verdict)
