"""Non-autonomous IFS specifications and the cylinder tree.

A specification is an infinite sequence of finite families of contracting
similarities ``Phi_1, Phi_2, ...`` acting on a compact ambient set ``X``.
Only two kinds of infinite sequence are representable: an explicit prefix
followed by a periodic tail, or a prefix followed by a registered generator
(see :mod:`moran_dim.examples`).  Level indices are 1-based, map indices
inside a level are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import BudgetExceeded, NonContracting, NotInvariant, SpecError, TooFewMaps

DEFAULT_CAP = 10**7
# relative slack on scale comparisons rho(Q) <= r
TIE_RTOL = 1e-12
# absolute slack on geometric incidence tests
TIE_ABS = 1e-12
ORTHO_TOL = 1e-12
INVARIANCE_TOL = 1e-9
LOG_SPACE_DEPTH = 64


# ---------------------------------------------------------------------------
# maps and levels


@dataclass(frozen=True, eq=False)
class Similarity:
    """``x -> ratio * orthogonal @ x + translation``."""

    ratio: float
    orthogonal: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        orth = np.atleast_2d(np.asarray(self.orthogonal, dtype=float))
        t = np.atleast_1d(np.asarray(self.translation, dtype=float))
        d = t.shape[0]
        if orth.shape != (d, d):
            raise SpecError(f"orthogonal part has shape {orth.shape}, expected {(d, d)}")
        if not np.all(np.abs(orth.T @ orth - np.eye(d)) <= ORTHO_TOL):
            raise SpecError("linear part is not orthogonal within 1e-12")
        if not math.isfinite(self.ratio):
            raise SpecError("ratio must be finite")
        orth.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "ratio", float(self.ratio))
        object.__setattr__(self, "orthogonal", orth)
        object.__setattr__(self, "translation", t)

    @classmethod
    def line(cls, ratio: float, translation: float, reflect: bool = False) -> "Similarity":
        return cls(ratio, np.array([[-1.0 if reflect else 1.0]]), np.array([translation]))

    @classmethod
    def plane(cls, ratio: float, rotation_degrees: float, translation) -> "Similarity":
        a = math.radians(rotation_degrees)
        c, s = math.cos(a), math.sin(a)
        # exact entries for quarter turns keep box images exact
        q = rotation_degrees / 90.0
        if float(q).is_integer():
            c, s = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(q) % 4]
        return cls(ratio, np.array([[c, -s], [s, c]]), np.asarray(translation, dtype=float))

    @property
    def dimension(self) -> int:
        return self.translation.shape[0]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.ratio * (x @ self.orthogonal.T) + self.translation

    def __repr__(self):
        return (f"Similarity(ratio={self.ratio!r}, orthogonal={self.orthogonal.tolist()!r}, "
                f"translation={self.translation.tolist()!r})")


@dataclass(frozen=True, eq=False)
class LevelSystem:
    """One family ``Phi_n`` stored column-wise.

    Levels of the generated examples can hold ~10^6 maps, so the maps are
    kept as arrays and only materialized as :class:`Similarity` on request.
    """

    ratios: np.ndarray
    orth: np.ndarray
    translations: np.ndarray

    def __post_init__(self):
        ratios = np.asarray(self.ratios, dtype=float).reshape(-1)
        trans = np.asarray(self.translations, dtype=float)
        if trans.ndim == 1:
            trans = trans.reshape(-1, 1)
        orth = np.asarray(self.orth, dtype=float)
        if orth.ndim == 2:
            orth = np.broadcast_to(orth, (ratios.size,) + orth.shape)
        if ratios.size == 0:
            raise SpecError("a level needs at least one map")
        if trans.shape[0] != ratios.size or orth.shape[0] != ratios.size:
            raise SpecError("ratios, orthogonal parts and translations disagree in length")
        for a in (ratios, orth, trans):
            a.setflags(write=False)
        object.__setattr__(self, "ratios", ratios)
        object.__setattr__(self, "orth", orth)
        object.__setattr__(self, "translations", trans)

    @classmethod
    def from_maps(cls, maps: Sequence[Similarity]) -> "LevelSystem":
        maps = list(maps)
        if not maps:
            raise SpecError("a level needs at least one map")
        return cls(np.array([s.ratio for s in maps]),
                   np.stack([s.orthogonal for s in maps]),
                   np.stack([s.translation for s in maps]))

    @classmethod
    def homogeneous_line(cls, ratio: float, translations) -> "LevelSystem":
        t = np.asarray(translations, dtype=float).reshape(-1, 1)
        return cls(np.full(t.shape[0], float(ratio)), np.ones((1, 1)), t)

    def __len__(self) -> int:
        return self.ratios.size

    def __getitem__(self, j: int) -> Similarity:
        return Similarity(self.ratios[j], self.orth[j], self.translations[j])

    @property
    def maps(self) -> tuple[Similarity, ...]:
        return tuple(self[j] for j in range(len(self)))

    @property
    def dimension(self) -> int:
        return self.translations.shape[1]

    @cached_property
    def log_ratios(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.ratios)

    @cached_property
    def ratio_groups(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct log-ratios and the log of their multiplicities."""
        vals, counts = np.unique(self.ratios, return_counts=True)
        with np.errstate(divide="ignore"):
            return np.log(vals), np.log(counts.astype(float))

    @property
    def homogeneous(self) -> bool:
        return bool(np.all(self.ratios == self.ratios[0]))


# ---------------------------------------------------------------------------
# ambient set


@dataclass(frozen=True, eq=False)
class AmbientSet:
    """Compact invariant set ``X``: an axis-parallel box or a closed ball."""

    kind: str
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    center_: np.ndarray | None = None
    radius_: float | None = None

    def __post_init__(self):
        if self.kind == "box":
            lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
            hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
            if lo.shape != hi.shape or not np.all(hi > lo):
                raise SpecError("box needs lo < hi in every coordinate")
            object.__setattr__(self, "lo", lo)
            object.__setattr__(self, "hi", hi)
        elif self.kind == "ball":
            c = np.atleast_1d(np.asarray(self.center_, dtype=float))
            if self.radius_ is None or not self.radius_ > 0:
                raise SpecError("ball needs a positive radius")
            object.__setattr__(self, "center_", c)
            object.__setattr__(self, "radius_", float(self.radius_))
        else:
            raise SpecError(f"unknown ambient kind {self.kind!r}")

    @classmethod
    def box(cls, lo, hi) -> "AmbientSet":
        return cls("box", lo=lo, hi=hi)

    @classmethod
    def ball(cls, center, radius: float) -> "AmbientSet":
        return cls("ball", center_=center, radius_=radius)

    @classmethod
    def unit_interval(cls) -> "AmbientSet":
        return cls.box([0.0], [1.0])

    @property
    def dimension(self) -> int:
        return (self.lo if self.kind == "box" else self.center_).shape[0]

    @property
    def center(self) -> np.ndarray:
        return (self.lo + self.hi) / 2 if self.kind == "box" else self.center_

    @property
    def radius(self) -> float:
        """Circumradius about :attr:`center`."""
        if self.kind == "box":
            return float(np.linalg.norm(self.hi - self.lo) / 2)
        return self.radius_

    @property
    def diameter(self) -> float:
        return 2 * self.radius

    @property
    def volume(self) -> float:
        if self.kind == "box":
            return float(np.prod(self.hi - self.lo))
        d = self.dimension
        return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * self.radius_ ** d

    def distance(self, y: np.ndarray) -> np.ndarray:
        """Euclidean distance from each row of ``y`` to ``X``."""
        y = np.atleast_2d(y)
        if self.kind == "box":
            gap = np.maximum(np.maximum(self.lo - y, y - self.hi), 0.0)
            return np.sqrt(np.sum(gap * gap, axis=1))
        return np.maximum(np.linalg.norm(y - self.center_, axis=1) - self.radius_, 0.0)

    def extreme_points(self) -> np.ndarray:
        if self.kind != "box":
            raise SpecError("extreme points are only enumerated for boxes")
        d = self.dimension
        corners = np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij")).reshape(d, -1).T
        return self.lo + corners * (self.hi - self.lo)

    def to_dict(self) -> dict:
        if self.kind == "box":
            return {"box": {"lo": self.lo.tolist(), "hi": self.hi.tolist()}}
        return {"ball": {"center": self.center_.tolist(), "radius": self.radius_}}


# ---------------------------------------------------------------------------
# tails, generators and the specification


@dataclass(frozen=True)
class Periodic:
    levels: tuple[LevelSystem, ...]

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise SpecError("periodic tail must contain at least one level")


@dataclass(frozen=True)
class GeneratorRef:
    name: str
    params: dict = field(default_factory=dict)

    def __hash__(self):
        return hash((self.name, repr(sorted(self.params.items()))))


@dataclass(frozen=True)
class GeneratorFacts:
    """What a generator can certify about its infinite level sequence.

    ``r_min`` is a lower bound for all ratios (0.0 when ratios accumulate
    at zero), ``max_maps`` bounds ``#J_n`` (``None`` when unbounded).
    ``bnc`` is ``"falsified"`` when the construction is known to violate the
    bounded neighbourhood condition, else ``None``.
    """

    rn_lim: str
    homogeneous: bool
    r_min: float
    max_maps: int | None
    branching_bounded: bool | None
    bnc: str | None = None
    notes: str = ""


class Generator:
    """Base class for registered level generators."""

    name: str = ""

    def __init__(self, params: dict):
        self.params = dict(params)

    def level(self, n: int) -> LevelSystem:
        raise NotImplementedError

    def facts(self) -> GeneratorFacts:
        raise NotImplementedError

    @property
    def ambient(self) -> AmbientSet:
        return AmbientSet.unit_interval()

    def metadata(self) -> dict:
        return {}


GENERATORS: dict[str, Callable[[dict], Generator]] = {}


def register_generator(name: str):
    def deco(cls):
        cls.name = name
        GENERATORS[name] = cls
        return cls
    return deco


def resolve_generator(ref: GeneratorRef) -> Generator:
    if ref.name not in GENERATORS:
        from . import examples  # noqa: F401  (registers the builtin generators)
    try:
        factory = GENERATORS[ref.name]
    except KeyError:
        raise SpecError(f"unknown generator {ref.name!r}") from None
    return factory(ref.params)


@dataclass(frozen=True, eq=False)
class IFSSpec:
    """A presentable infinite sequence ``(Phi_n)`` with its ambient set.

    ``shift`` drops the first ``shift`` levels; ``spec.shifted(k)`` describes
    the limit set inside a level-``k`` cylinder, rescaled to unit size.
    """

    dimension: int
    ambient: AmbientSet
    prefix: tuple[LevelSystem, ...]
    tail: Periodic | GeneratorRef
    shift: int = 0
    certificate: str | None = None
    _generator: Generator | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(self.prefix))
        if self.dimension < 1:
            raise SpecError("dimension must be positive")
        if self.ambient.dimension != self.dimension:
            raise SpecError("ambient set dimension differs from the spec dimension")
        for lv in self.prefix + (self.tail.levels if isinstance(self.tail, Periodic) else ()):
            if lv.dimension != self.dimension:
                raise SpecError("level dimension differs from the spec dimension")
        if isinstance(self.tail, GeneratorRef) and self._generator is None:
            object.__setattr__(self, "_generator", resolve_generator(self.tail))
        object.__setattr__(self, "_ext_cache", {})

    # construction helpers -------------------------------------------------

    @classmethod
    def periodic(cls, levels: Sequence[LevelSystem | Sequence[Similarity]], prefix=(),
                 ambient: AmbientSet | None = None) -> "IFSSpec":
        def as_level(x):
            return x if isinstance(x, LevelSystem) else LevelSystem.from_maps(x)
        tail = Periodic(tuple(as_level(x) for x in levels))
        pre = tuple(as_level(x) for x in prefix)
        d = tail.levels[0].dimension
        amb = ambient or AmbientSet.box(np.zeros(d), np.ones(d))
        return cls(d, amb, pre, tail)

    @classmethod
    def autonomous(cls, maps: Sequence[Similarity], ambient: AmbientSet | None = None) -> "IFSSpec":
        return cls.periodic([maps], ambient=ambient)

    @classmethod
    def from_generator(cls, name: str, params: dict | None = None, prefix=()) -> "IFSSpec":
        ref = GeneratorRef(name, dict(params or {}))
        gen = resolve_generator(ref)
        amb = gen.ambient
        return cls(amb.dimension, amb, tuple(prefix), ref, _generator=gen)

    # level access ---------------------------------------------------------

    @property
    def generator(self) -> Generator | None:
        return self._generator

    @property
    def is_periodic(self) -> bool:
        return isinstance(self.tail, Periodic)

    def _raw_level(self, n: int) -> LevelSystem:
        q = len(self.prefix)
        if n <= q:
            return self.prefix[n - 1]
        if isinstance(self.tail, Periodic):
            p = len(self.tail.levels)
            return self.tail.levels[(n - q - 1) % p]
        return self._generator.level(n - q)

    def level(self, n: int) -> LevelSystem:
        if n < 1:
            raise ValueError("levels are indexed from 1")
        return self._raw_level(n + self.shift)

    def levels(self, ns: Iterable[int]) -> list[LevelSystem]:
        return [self.level(n) for n in ns]

    def shifted(self, k: int) -> "IFSSpec":
        if k < 0:
            raise ValueError("shift must be nonnegative")
        return replace(self, shift=self.shift + k)

    @property
    def fundamental_domain(self) -> int | None:
        """Number of leading levels after which the sequence is periodic.

        ``theta(n, m)`` and every other window statistic take all their
        values on ``n <= fundamental_domain``.  ``None`` for generators.
        """
        if not isinstance(self.tail, Periodic):
            return None
        return max(len(self.prefix) - self.shift, 0) + len(self.tail.levels)

    def default_window(self, n_max: int | None = None) -> range:
        fd = self.fundamental_domain
        if fd is not None:
            return range(1, fd + 1)
        if n_max is None:
            raise ValueError("generator-backed specs need an explicit n-window")
        return range(1, n_max + 1)

    @property
    def radius(self) -> float:
        return self.ambient.radius

    # extension points ----------------------------------------------------

    def extension(self, depth: int, which: str = "first", tol: float = 1e-18,
                  max_levels: int = 256) -> tuple[np.ndarray, float]:
        """Point of ``K`` reached by repeating the first (or last) map below ``depth``.

        Composes ``S_{depth+1,j} o S_{depth+2,j} o ...`` until the accumulated
        ratio drops below ``tol`` (or the levels run out) and applies the
        result to the fixed point of the last map used, which lies in ``X``.
        Returns the point and the accumulated ratio ``s``: the true coding
        point is within ``s * diam(X)`` of it.
        """
        key = (depth, which, tol, max_levels)
        cache = self._ext_cache
        if key in cache:
            return cache[key]
        d = self.dimension
        lin = np.eye(d)
        off = np.zeros(d)
        scale = 1.0
        anchor = self.ambient.center
        n = depth
        while scale >= tol and n - depth < max_levels:
            try:
                lv = self.level(n + 1)
            except BudgetExceeded:
                break
            n += 1
            j = 0 if which == "first" else len(lv) - 1
            a = lv.ratios[j] * lv.orth[j]
            off = off + lin @ lv.translations[j]
            lin = lin @ a
            scale *= lv.ratios[j]
            anchor = np.linalg.solve(np.eye(d) - a, lv.translations[j])
        z = lin @ anchor + off
        cache[key] = (z, scale)
        return z, scale


def level(spec: IFSSpec, n: int) -> LevelSystem:
    return spec.level(n)


# ---------------------------------------------------------------------------
# validation


def _certify_periodic(spec: IFSSpec) -> str:
    fd = spec.fundamental_domain
    levels = spec.levels(range(1, fd + 1))
    rmax = max(float(lv.ratios.max()) for lv in levels)
    q = max(len(spec.prefix) - spec.shift, 0)
    p = fd - q
    return (f"periodic tail (prefix {q}, period {p}): every ratio <= {rmax:.12g} < 1, "
            f"so sup of level-n products <= {rmax:.12g}^n -> 0")


def _check_invariance(spec: IFSSpec, n: int, lv: LevelSystem):
    amb = spec.ambient
    if amb.kind == "box" and spec.dimension == 1:
        lo, hi = Fraction(float(amb.lo[0])), Fraction(float(amb.hi[0]))
        for j in range(len(lv)):
            r = Fraction(float(lv.ratios[j])) * Fraction(float(lv.orth[j][0, 0]))
            t = Fraction(float(lv.translations[j][0]))
            a, b = sorted((r * lo + t, r * hi + t))
            if a < lo - Fraction(INVARIANCE_TOL) or b > hi + Fraction(INVARIANCE_TOL):
                raise NotInvariant(f"level {n} map {j}: image [{float(a)}, {float(b)}] "
                                   f"leaves X = [{float(lo)}, {float(hi)}]")
        return
    if amb.kind == "box":
        pts = amb.extreme_points()
        for j in range(len(lv)):
            img = lv.ratios[j] * pts @ lv.orth[j].T + lv.translations[j]
            if np.any(amb.distance(img) > INVARIANCE_TOL):
                raise NotInvariant(f"level {n} map {j}: a corner image leaves X")
        return
    c, R = amb.center_, amb.radius_
    for j in range(len(lv)):
        sc = lv.ratios[j] * lv.orth[j] @ c + lv.translations[j]
        if np.linalg.norm(sc - c) + lv.ratios[j] * R > R + INVARIANCE_TOL:
            raise NotInvariant(f"level {n} map {j}: image ball leaves X")


def validate_spec(spec: IFSSpec, window: int = 32) -> IFSSpec:
    """Check the standing assumptions and attach a decay certificate.

    Periodic specs are checked on their whole fundamental domain; generator
    specs on the first ``window`` levels, with the decay of level products
    certified by the generator itself.
    """
    fd = spec.fundamental_domain
    n_check = fd if fd is not None else window
    for n in range(1, n_check + 1):
        lv = spec.level(n)
        if len(lv) < 2:
            raise TooFewMaps(f"level {n} has {len(lv)} map(s); at least 2 are required")
        bad = np.flatnonzero(~((lv.ratios > 0) & (lv.ratios < 1)))
        if bad.size:
            raise NonContracting(f"level {n} map {bad[0]} has ratio {lv.ratios[bad[0]]!r}")
        _check_invariance(spec, n, lv)
    if fd is not None:
        cert = _certify_periodic(spec)
    else:
        cert = f"generator {spec.tail.name!r}: {spec.generator.facts().rn_lim}"
    return replace(spec, certificate=cert)


# ---------------------------------------------------------------------------
# words and the stratification T(r)


@dataclass(frozen=True)
class Word:
    """A cylinder ``[j_1, ..., j_n]`` (0-based map indices) with cached size."""

    indices: tuple[int, ...]
    rho: float = 1.0
    log_rho: float = 0.0

    def __len__(self):
        return len(self.indices)

    def is_prefix_of(self, other: "Word") -> bool:
        n = len(self.indices)
        return n <= len(other.indices) and other.indices[:n] == self.indices


def make_word(spec: IFSSpec, indices: Sequence[int]) -> Word:
    """Build a word, multiplying ratios left to right."""
    rho, lrho = 1.0, 0.0
    for n, j in enumerate(indices, start=1):
        lv = spec.level(n)
        if not 0 <= j < len(lv):
            raise IndexError(f"index {j} out of range for level {n} ({len(lv)} maps)")
        rho = rho * float(lv.ratios[j])
        lrho = lrho + float(lv.log_ratios[j])
    return Word(tuple(int(j) for j in indices), rho, lrho)


def child(spec: IFSSpec, w: Word, j: int) -> Word:
    lv = spec.level(len(w) + 1)
    return Word(w.indices + (int(j),), w.rho * float(lv.ratios[j]), w.log_rho + float(lv.log_ratios[j]))


def parent(spec: IFSSpec, w: Word) -> Word:
    if not w.indices:
        raise ValueError("the root cylinder has no parent")
    return make_word(spec, w.indices[:-1])


def scale_le(rho, log_rho, depth, r: float, rtol: float = TIE_RTOL):
    """Vectorized ``rho(Q) <= r`` with relative tie slack.

    Past ``LOG_SPACE_DEPTH`` levels the comparison switches to log space.
    """
    rho = np.asarray(rho)
    log_rho = np.asarray(log_rho)
    depth = np.asarray(depth)
    direct = rho <= r * (1 + rtol)
    logged = log_rho <= math.log(r) + rtol
    return np.where(depth > LOG_SPACE_DEPTH, logged, direct)


@dataclass(frozen=True, eq=False)
class Cylinders:
    """A batch of cylinders with their composite maps.

    The composite of word ``w`` is ``x -> rho * orth @ x + offset``; its
    geometric hull is the image of ``X``.  ``codes`` holds the words as rows
    padded with ``-1``.
    """

    offset: np.ndarray
    orth: np.ndarray
    rho: np.ndarray
    log_rho: np.ndarray
    depth: np.ndarray
    codes: np.ndarray | None = None

    def __len__(self):
        return self.rho.size

    @classmethod
    def root(cls, d: int) -> "Cylinders":
        return cls(np.zeros((1, d)), np.eye(d)[None], np.ones(1), np.zeros(1),
                   np.zeros(1, dtype=np.int64), np.zeros((1, 0), dtype=np.int32))

    def take(self, mask_or_idx) -> "Cylinders":
        return Cylinders(self.offset[mask_or_idx], self.orth[mask_or_idx], self.rho[mask_or_idx],
                         self.log_rho[mask_or_idx], self.depth[mask_or_idx],
                         None if self.codes is None else self.codes[mask_or_idx])

    @staticmethod
    def concat(parts: list["Cylinders"], d: int) -> "Cylinders":
        parts = [p for p in parts if len(p)]
        if not parts:
            c = Cylinders.root(d).take(np.zeros(0, dtype=int))
            return c
        codes = None
        if all(p.codes is not None for p in parts):
            width = max(p.codes.shape[1] for p in parts)
            codes = np.concatenate([np.pad(p.codes, ((0, 0), (0, width - p.codes.shape[1])),
                                           constant_values=-1) for p in parts])
        return Cylinders(np.concatenate([p.offset for p in parts]),
                         np.concatenate([p.orth for p in parts]),
                         np.concatenate([p.rho for p in parts]),
                         np.concatenate([p.log_rho for p in parts]),
                         np.concatenate([p.depth for p in parts]), codes)

    def words(self) -> list[tuple[int, ...]]:
        if self.codes is None:
            raise ValueError("codes were not kept for this batch")
        return [tuple(int(j) for j in row[:k]) for row, k in zip(self.codes, self.depth)]

    def hull_distance(self, spec: IFSSpec, x) -> np.ndarray:
        """Distance from point ``x`` to every hull ``composite(w)(X)``."""
        x = np.asarray(x, dtype=float).reshape(-1)
        y = np.einsum("nji,nj->ni", self.orth, x[None, :] - self.offset)
        with np.errstate(divide="ignore", invalid="ignore"):
            y = y / self.rho[:, None]
        return self.rho * spec.ambient.distance(y)

    def centers(self, spec: IFSSpec) -> np.ndarray:
        return self.map_points(spec.ambient.center[None, :].repeat(len(self), 0))

    def map_points(self, z: np.ndarray) -> np.ndarray:
        """Apply each composite to the matching row of ``z``."""
        return self.offset + self.rho[:, None] * np.einsum("nij,nj->ni", self.orth, z)

    def coding_points(self, spec: IFSSpec, which: str = "first") -> tuple[np.ndarray, np.ndarray]:
        """Points of ``K`` (up to ``err``) inside each cylinder.

        Each cylinder is extended by repeating the first (or last) map of
        every following level (see :meth:`IFSSpec.extension`); returns the
        points and their error radii.
        """
        depths, inv = np.unique(self.depth, return_inverse=True)
        zs = np.empty((depths.size, spec.dimension))
        ss = np.empty(depths.size)
        for i, k in enumerate(depths):
            zs[i], ss[i] = spec.extension(int(k), which)
        return self.map_points(zs[inv.reshape(-1)]), self.rho * ss[inv.reshape(-1)] * spec.ambient.diameter

    def sort_lex(self) -> "Cylinders":
        if self.codes is None or len(self) == 0 or self.codes.shape[1] == 0:
            return self
        order = np.lexsort(self.codes.T[::-1])
        return self.take(order)


def expand_mixed(spec: IFSSpec, cyl: Cylinders) -> tuple[Cylinders, np.ndarray]:
    """Children of a batch of mixed depths (codes dropped) and each child's parent index.

    Depths whose next level is the same system are expanded together.
    """
    groups: dict[int, tuple[LevelSystem, list[int]]] = {}
    for k in np.unique(cyl.depth).tolist():
        lv = spec.level(k + 1)
        groups.setdefault(id(lv), (lv, []))[1].append(k)
    parts, parents = [], []
    for lv, ks in groups.values():
        idx = np.flatnonzero(np.isin(cyl.depth, ks))
        grp = Cylinders(cyl.offset[idx], cyl.orth[idx], cyl.rho[idx], cyl.log_rho[idx], cyl.depth[idx])
        kids = _expand_with(lv, grp, False, np.repeat(grp.depth + 1, len(lv)))
        parts.append(kids)
        parents.append(np.repeat(idx, len(lv)))
    if not parts:
        return Cylinders.root(spec.dimension).take(np.zeros(0, dtype=int)), np.zeros(0, dtype=int)
    out = Cylinders.concat(parts, spec.dimension)
    return Cylinders(out.offset, out.orth, out.rho, out.log_rho, out.depth, None), np.concatenate(parents)


def _expand(spec: IFSSpec, front: Cylinders, depth: int, keep_codes: bool) -> Cylinders:
    lv = spec.level(depth + 1)
    return _expand_with(lv, front, keep_codes, np.full(len(front) * len(lv), depth + 1, dtype=np.int64))


def _expand_with(lv: LevelSystem, front: Cylinders, keep_codes: bool, depth: np.ndarray) -> Cylinders:
    k = len(lv)
    n = len(front)
    rho = (front.rho[:, None] * lv.ratios[None, :]).reshape(-1)
    lrho = (front.log_rho[:, None] + lv.log_ratios[None, :]).reshape(-1)
    shift = np.einsum("nij,kj->nki", front.orth, lv.translations) * front.rho[:, None, None]
    off = (front.offset[:, None, :] + shift).reshape(n * k, -1)
    d = front.orth.shape[1]
    orth = np.einsum("nij,kjl->nkil", front.orth, lv.orth).reshape(n * k, d, d)
    codes = None
    if keep_codes:
        codes = np.concatenate([np.repeat(front.codes, k, axis=0),
                                np.tile(np.arange(k, dtype=np.int32), n)[:, None]], axis=1)
    return Cylinders(off, orth, rho, lrho, depth.astype(np.int64), codes)


def stratify(spec: IFSSpec, r: float, *, within: tuple | None = None, cap: int = DEFAULT_CAP,
             keep_codes: bool = True, start: Cylinders | None = None,
             rtol: float = TIE_RTOL) -> Cylinders:
    """Enumerate ``T(r)``: cylinders ``Q`` with ``rho(Q) <= r < rho(parent)``.

    ``within=(x, R)`` keeps only cylinders whose hull meets the closed ball
    ``B(x, R)`` (ancestors are pruned the same way, which is exact because
    hulls are nested).  ``start`` replaces the root by another batch of
    cylinders, all of the same depth.
    """
    d = spec.dimension
    front = start if start is not None else Cylinders.root(d)
    if keep_codes and front.codes is None:
        raise ValueError("start batch has no codes")
    depth = int(front.depth[0]) if len(front) else 0
    done: list[Cylinders] = []
    total = 0
    while len(front):
        lv_size = len(spec.level(depth + 1))
        if total + len(front) * lv_size > cap:
            raise BudgetExceeded(f"enumeration at scale {r:g} would exceed {cap} cylinders")
        kids = _expand(spec, front, depth, keep_codes)
        depth += 1
        if within is not None:
            x, R = within
            kids = kids.take(kids.hull_distance(spec, x) <= R + TIE_ABS)
        fin = scale_le(kids.rho, kids.log_rho, kids.depth, r, rtol)
        done.append(kids.take(fin))
        total += int(fin.sum())
        front = kids.take(~fin)
    out = Cylinders.concat(done, d)
    return out.sort_lex() if keep_codes else out


def descend(spec: IFSSpec, batch: Cylinders, levels: int, *, within: tuple | None = None,
            cap: int = DEFAULT_CAP, keep_codes: bool = False) -> list[Cylinders]:
    """Descendants of ``batch`` at each of the next ``levels`` generations.

    ``batch`` may mix depths.  Returns one batch per generation (index 0 is
    ``batch`` itself, possibly pruned by ``within``).
    """
    d = spec.dimension
    out = []
    cur = batch
    if within is not None:
        x, R = within
        cur = cur.take(cur.hull_distance(spec, x) <= R + TIE_ABS)
    out.append(cur)
    total = len(cur)
    for _ in range(levels):
        if not keep_codes:
            total += sum(len(spec.level(int(k) + 1)) * int(c)
                         for k, c in zip(*np.unique(cur.depth, return_counts=True)))
            if total > cap:
                raise BudgetExceeded(f"refinement would exceed {cap} cylinders")
            cur = expand_mixed(spec, cur)[0]
            if within is not None:
                x, R = within
                cur = cur.take(cur.hull_distance(spec, x) <= R + TIE_ABS)
            out.append(cur)
            continue
        nxt = []
        for k in np.unique(cur.depth):
            grp = cur.take(cur.depth == k)
            lv_size = len(spec.level(int(k) + 1))
            total += len(grp) * lv_size
            if total > cap:
                raise BudgetExceeded(f"refinement would exceed {cap} cylinders")
            if keep_codes:
                grp = Cylinders(grp.offset, grp.orth, grp.rho, grp.log_rho, grp.depth,
                                grp.codes[:, :int(k)])
            kids = _expand(spec, grp, int(k), keep_codes)
            if within is not None:
                x, R = within
                kids = kids.take(kids.hull_distance(spec, x) <= R + TIE_ABS)
            nxt.append(kids)
        cur = Cylinders.concat(nxt, d)
        out.append(cur)
    return out


# ---------------------------------------------------------------------------
# ScaleSlice


@dataclass(frozen=True, eq=False)
class ScaleSlice:
    """The finite set ``T(r)`` in lexicographic order."""

    scale: float
    words: tuple[Word, ...]
    cylinders: Cylinders = field(repr=False, default=None)

    def __len__(self):
        return len(self.words)

    @property
    def max_depth(self) -> int:
        return max((len(w) for w in self.words), default=0)

    def check(self, spec: IFSSpec) -> None:
        """Assert the stratification, incomparability and partition invariants."""
        r = self.scale
        for w in self.words:
            par = parent(spec, w)
            assert scale_le(w.rho, w.log_rho, len(w), r), w
            assert not scale_le(par.rho, par.log_rho, len(par), r), w
        idx = sorted(w.indices for w in self.words)
        for a, b in zip(idx, idx[1:]):
            assert b[:len(a)] != a, (a, b)
        # completeness: the words' cylinders tile every depth-L word
        L = self.max_depth
        sizes = [len(spec.level(n)) for n in range(1, L + 1)]
        covered = 0
        for w in self.words:
            covered += math.prod(sizes[len(w):])
        assert covered == math.prod(sizes), (covered, math.prod(sizes))


def scale_slice(spec: IFSSpec, r: float, cap: int = DEFAULT_CAP) -> ScaleSlice:
    if not 0 < r < 1:
        raise ValueError("scale must lie in (0, 1)")
    cyl = stratify(spec, r, cap=cap, keep_codes=True)
    words = tuple(Word(w, float(rho), float(lr))
                  for w, rho, lr in zip(cyl.words(), cyl.rho, cyl.log_rho))
    return ScaleSlice(r, words, cyl)


def local_contraction_profile(spec: IFSSpec, m: int, n_window: Iterable[int] | None = None) -> float:
    """``sup_n max_j r_{n,j_0} ... r_{n+m-1,j_{m-1}}`` over the window."""
    if m < 1:
        raise ValueError("m must be positive")
    ns = spec.default_window() if n_window is None else n_window
    best = 0.0
    for n in ns:
        prod = 1.0
        for k in range(m):
            prod *= float(spec.level(n + k).ratios.max())
        best = max(best, prod)
    return best
