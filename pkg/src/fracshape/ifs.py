"""Iterated function systems of similitudes and their word trees.

Words are finite index sequences addressing cylinders of an invariant
set: the word i1..ik names the piece S_{i1} o ... o S_{ik} (E), so a
child appends one index and the parent is the length k-1 prefix.  Per
level arities may differ; uniform systems use the same arity everywhere.

The module generates prefractals (finite Hutchinson iterations applied
to a base sample), cylinder sets, the similarity dimension, and the
inverse orbits of one-dimensional expanding pairs whose repellers are
nonlinear cousins of the middle-thirds Cantor set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from itertools import product
from typing import Callable, Iterator

import numpy as np

from fracshape.geometry import PointCloud, Transform, transform_apply, transform_compose

_SQRT3 = math.sqrt(3.0)

# refuse prefractal requests whose worst-case point count exceeds this
DEFAULT_POINT_CAP = 4_000_000

__all__ = [
    "Word",
    "IfsSpec",
    "NonlinearPair",
    "similarity_dimension",
    "prefractal",
    "cylinder_set",
    "inverse_orbit",
    "named_system",
    "nonlinear_pair",
    "level_words",
    "words_through",
    "sample_polyline",
    "DEFAULT_POINT_CAP",
]


@dataclass(frozen=True)
class Word:
    """Finite index word with its per-level arities.

    ``indices[j]`` is 1-based and at most ``arity[j]``.  The empty word
    is the root (identity cylinder).
    """

    indices: tuple[int, ...] = ()
    arity: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        ar = tuple(int(m) for m in self.arity)
        if len(idx) != len(ar):
            raise ValueError("indices and arity must have equal length")
        for j, (i, m) in enumerate(zip(idx, ar)):
            if m < 1:
                raise ValueError(f"arity at level {j + 1} must be positive")
            if not 1 <= i <= m:
                raise ValueError(f"index {i} at level {j + 1} outside 1..{m}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "arity", ar)

    @classmethod
    def root(cls) -> "Word":
        return cls((), ())

    @classmethod
    def uniform(cls, indices, m: int) -> "Word":
        idx = tuple(int(i) for i in indices)
        return cls(idx, (int(m),) * len(idx))

    def __len__(self) -> int:
        return len(self.indices)

    @property
    def is_root(self) -> bool:
        return not self.indices

    def prefix(self, k: int) -> "Word":
        if not 0 <= k <= len(self):
            raise ValueError(f"prefix length {k} outside 0..{len(self)}")
        return Word(self.indices[:k], self.arity[:k])

    def parent(self) -> "Word":
        if self.is_root:
            raise ValueError("the root word has no parent")
        return self.prefix(len(self) - 1)

    def extend(self, index: int, m: int | None = None) -> "Word":
        if m is None:
            if not self.arity:
                raise ValueError("arity needed to extend the root word")
            m = self.arity[-1]
        return Word(self.indices + (int(index),), self.arity + (int(m),))

    def extends(self, other: "Word") -> bool:
        """Whether this word lies in the subtree of ``other``."""
        k = len(other)
        return len(self) >= k and self.indices[:k] == other.indices

    def common_prefix_length(self, other: "Word") -> int:
        k = 0
        for a, b in zip(self.indices, other.indices):
            if a != b:
                break
            k += 1
        return k

    def diverges_from(self, other: "Word") -> bool:
        """True when neither word extends the other, so the two
        cylinders are disjoint branches."""
        k = self.common_prefix_length(other)
        return k < len(self) and k < len(other)

    @property
    def label(self) -> str:
        if self.is_root:
            return "0"
        if max(self.arity) <= 9:
            return "".join(str(i) for i in self.indices)
        return "-".join(str(i) for i in self.indices)


def level_words(m: int, k: int) -> Iterator[Word]:
    """All uniform-arity words of length exactly k, lexicographic."""
    if m < 1 or k < 0:
        raise ValueError("need m >= 1 and k >= 0")
    for combo in product(range(1, m + 1), repeat=k):
        yield Word.uniform(combo, m)


def words_through(m: int, depth: int) -> Iterator[Word]:
    """All uniform-arity words of length 0..depth, by level then lex."""
    for k in range(depth + 1):
        yield from level_words(m, k)


# ---------------------------------------------------------------------------
# IFS of similitudes


def sample_polyline(vertices: np.ndarray, spacing: float, closed: bool = False) -> np.ndarray:
    """Points along a polyline with gaps at most ``spacing``; vertices
    are always included."""
    v = np.asarray(vertices, dtype=float)
    if v.ndim == 1:
        v = v.reshape(-1, 1)
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if v.shape[0] == 1:
        return v.copy()
    edges = list(zip(v[:-1], v[1:]))
    if closed:
        edges.append((v[-1], v[0]))
    chunks = []
    for a, b in edges:
        length = float(np.linalg.norm(b - a))
        n = max(1, math.ceil(length / spacing))
        t = np.linspace(0.0, 1.0, n + 1)[:-1]
        chunks.append(a + t[:, None] * (b - a))
    if not closed:
        chunks.append(v[-1:].copy())
    return np.unique(np.vstack(chunks), axis=0)


@dataclass(frozen=True)
class IfsSpec:
    """A finite list of contracting similitudes with a base shape.

    The base is a polyline skeleton (the attractor's convex hull
    boundary for the built-in systems); ``base_points`` samples it at a
    chosen spacing.
    """

    dim: int
    maps: tuple[Transform, ...]
    labels: tuple[str, ...] = ()
    base_vertices: np.ndarray = field(default=None, repr=False)
    base_closed: bool = False
    name: str = ""

    def __post_init__(self) -> None:
        if not self.maps:
            raise ValueError("an IFS needs at least one map")
        for t in self.maps:
            if t.dim != self.dim:
                raise ValueError("map dimension does not match the system")
            if not t.ratio < 1.0:
                raise ValueError("every map must be strictly contracting")
        labels = self.labels or tuple(f"s{i + 1}" for i in range(len(self.maps)))
        if len(labels) != len(self.maps):
            raise ValueError("labels must match maps one to one")
        base = self.base_vertices
        if base is None:
            base = np.zeros((1, self.dim))
        base = np.asarray(base, dtype=float).reshape(-1, self.dim)
        base = np.ascontiguousarray(base)
        base.flags.writeable = False
        object.__setattr__(self, "maps", tuple(self.maps))
        object.__setattr__(self, "labels", tuple(labels))
        object.__setattr__(self, "base_vertices", base)

    @property
    def m(self) -> int:
        return len(self.maps)

    @property
    def ratios(self) -> tuple[float, ...]:
        return tuple(t.ratio for t in self.maps)

    @property
    def c_max(self) -> float:
        return max(self.ratios)

    @property
    def c_min(self) -> float:
        return min(self.ratios)

    def word(self, indices) -> Word:
        return Word.uniform(indices, self.m)

    def word_transform(self, word: Word) -> Transform:
        """S composed along the word, outermost map first."""
        if word.is_root:
            return Transform.identity(self.dim)
        for i, m in zip(word.indices, word.arity):
            if m != self.m or not 1 <= i <= self.m:
                raise ValueError(f"word {word.label} does not fit a {self.m}-map system")
        return reduce(transform_compose, (self.maps[i - 1] for i in word.indices))

    def word_ratio(self, word: Word) -> float:
        out = 1.0
        for i in word.indices:
            out *= self.maps[i - 1].ratio
        return out

    def base_points(self, spacing: float) -> PointCloud:
        pts = sample_polyline(self.base_vertices, spacing, self.base_closed)
        return PointCloud(pts, eta=spacing / 2.0)

    def default_base(self, depth: int) -> PointCloud:
        # spacing shrinks with depth so base sampling error stays below
        # the scale of the smallest generated cylinders
        return self.base_points(3.0 ** -(depth + 2))

    @property
    def dimension(self) -> float:
        return similarity_dimension(self.ratios)

    def to_dict(self) -> dict:
        base = {"vertices": self.base_vertices.tolist(), "closed": self.base_closed}
        if self.base_vertices.shape[0] == 2 and not self.base_closed:
            unit = np.vstack([np.zeros(self.dim), np.eye(self.dim)[0]])
            if np.allclose(self.base_vertices, unit):
                base = "segment"
        return {
            "dim": self.dim,
            "maps": [t.to_dict() for t in self.maps],
            "labels": list(self.labels),
            "base": base,
            "name": self.name,
        }

    @staticmethod
    def from_dict(data: dict) -> "IfsSpec":
        dim = int(data["dim"])
        maps = tuple(Transform.from_dict(d) for d in data["maps"])
        base = data.get("base", "segment")
        if base == "segment":
            vertices = np.vstack([np.zeros(dim), np.eye(dim)[0]])
            closed = False
        else:
            vertices = np.asarray(base["vertices"], dtype=float)
            closed = bool(base.get("closed", False))
        return IfsSpec(
            dim=dim,
            maps=maps,
            labels=tuple(data.get("labels", ())),
            base_vertices=vertices,
            base_closed=closed,
            name=data.get("name", ""),
        )


def similarity_dimension(ratios) -> float:
    """The unique s with sum of ratios**s equal to 1, by bisection."""
    cs = [float(c) for c in ratios]
    if len(cs) < 2:
        raise ValueError("need at least 2 ratios")
    for c in cs:
        if not 0.0 < c < 1.0:
            raise ValueError(f"ratio {c} outside (0, 1)")

    def f(s: float) -> float:
        return sum(c**s for c in cs) - 1.0

    lo, hi = 0.0, 1.0
    while f(hi) > 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError("dimension bracket failed")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _guard_points(m: int, depth: int, n_base: int, max_points: int) -> None:
    total = n_base
    for _ in range(depth):
        total *= m
        if total > max_points:
            raise MemoryError(
                f"prefractal would need up to {m}^{depth} * {n_base} points, "
                f"over the cap of {max_points}"
            )


def prefractal(
    ifss: IfsSpec,
    base: PointCloud | None = None,
    depth: int = 0,
    max_points: int = DEFAULT_POINT_CAP,
) -> PointCloud:
    """Depth-k Hutchinson iterate of the base sample: the union of
    S_w(base) over all length-k words, exact duplicates removed."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if base is None:
        base = ifss.default_base(depth)
    if base.dim != ifss.dim:
        raise ValueError("base dimension does not match the system")
    _guard_points(ifss.m, depth, base.n, max_points)
    pts = base.points
    for _ in range(depth):
        pts = np.unique(np.vstack([t.apply(pts) for t in ifss.maps]), axis=0)
    return PointCloud(pts, eta=base.eta * ifss.c_max**depth)


def cylinder_set(
    ifss: IfsSpec,
    word: Word,
    depth: int = 0,
    base: PointCloud | None = None,
    max_points: int = DEFAULT_POINT_CAP,
) -> PointCloud:
    """The word's cylinder sampled via a depth-p prefractal: S_w applied
    to prefractal(ifss, base, p).  The root word returns the prefractal
    itself."""
    inner = prefractal(ifss, base, depth, max_points)
    if word.is_root:
        return inner
    return transform_apply(ifss.word_transform(word), inner)


# ---------------------------------------------------------------------------
# named systems


def _similitude2(theta: float, ratio: float, tx: float, ty: float) -> Transform:
    c, s = math.cos(theta), math.sin(theta)
    return Transform(np.array([[c, -s], [s, c]]), np.array([tx, ty]), ratio)


def _segment(dim: int) -> np.ndarray:
    v = np.zeros((2, dim))
    v[1, 0] = 1.0
    return v


def named_system(name: str, lam: float = 1.0) -> IfsSpec:
    """Built-in systems: cantor, c_lambda, koch, koch_hat, sierpinski.

    ``lam`` only matters for c_lambda, whose middle map translates by
    lam/3; lam = 0 and lam = 2 collapse onto the plain Cantor maps.
    ``cantor2`` is the middle-thirds pair acting on the plane, the
    starting point for in-plane perturbations of the Cantor set.
    """
    key = name.strip().lower()
    if key == "cantor":
        maps = (
            Transform(np.eye(1), np.array([0.0]), 1 / 3),
            Transform(np.eye(1), np.array([2 / 3]), 1 / 3),
        )
        return IfsSpec(1, maps, ("s1", "s2"), _segment(1), name="cantor")
    if key == "c_lambda":
        if not 0.0 <= lam <= 2.0:
            raise ValueError("c_lambda needs 0 <= lam <= 2 to stay inside [0, 1]")
        maps = (
            Transform(np.eye(1), np.array([0.0]), 1 / 3),
            Transform(np.eye(1), np.array([lam / 3]), 1 / 3),
            Transform(np.eye(1), np.array([2 / 3]), 1 / 3),
        )
        return IfsSpec(1, maps, ("s1", "s_lambda", "s2"), _segment(1), name=f"c_lambda({lam:g})")
    if key == "cantor2":
        # middle-thirds maps acting on the plane; attractor sits on the x axis
        maps = (
            _similitude2(0.0, 1 / 3, 0.0, 0.0),
            _similitude2(0.0, 1 / 3, 2 / 3, 0.0),
        )
        return IfsSpec(2, maps, ("s1", "s2"), _segment(2), name="cantor2")
    if key == "koch":
        maps = (
            _similitude2(0.0, 1 / 3, 0.0, 0.0),
            _similitude2(math.pi / 3, 1 / 3, 1 / 3, 0.0),
            _similitude2(-math.pi / 3, 1 / 3, 0.5, _SQRT3 / 6),
            _similitude2(0.0, 1 / 3, 2 / 3, 0.0),
        )
        return IfsSpec(2, maps, ("s1", "s2", "s3", "s4"), _segment(2), name="koch")
    if key == "koch_hat":
        # middle bumps point down instead of up
        maps = (
            _similitude2(0.0, 1 / 3, 0.0, 0.0),
            _similitude2(-math.pi / 3, 1 / 3, 1 / 3, 0.0),
            _similitude2(math.pi / 3, 1 / 3, 0.5, -_SQRT3 / 6),
            _similitude2(0.0, 1 / 3, 2 / 3, 0.0),
        )
        return IfsSpec(2, maps, ("s1_hat", "s2_hat", "s3_hat", "s4_hat"), _segment(2), name="koch_hat")
    if key == "sierpinski":
        maps = (
            _similitude2(0.0, 0.5, 0.25, _SQRT3 / 4),
            _similitude2(0.0, 0.5, 0.0, 0.0),
            _similitude2(0.0, 0.5, 0.5, 0.0),
        )
        tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, _SQRT3 / 2]])
        return IfsSpec(2, maps, ("s1", "s2", "s3"), tri, base_closed=True, name="sierpinski")
    raise ValueError(f"unknown system {name!r}")


def parse_system(text: str) -> IfsSpec:
    """Parse strings like ``koch`` or ``c_lambda:0.5``."""
    if ":" in text:
        name, arg = text.split(":", 1)
        return named_system(name, lam=float(arg))
    return named_system(text)


# ---------------------------------------------------------------------------
# nonlinear expanding pairs on [0, 1]


@dataclass(frozen=True)
class NonlinearPair:
    """Two contracting branches of an expanding interval map's inverse.

    Both branches must map [0, 1] into itself with disjoint images and a
    contraction factor below one; the inverse orbit of {0, 1} then
    converges to the map's repeller.
    """

    g1: Callable[[float], float]
    g2: Callable[[float], float]
    deriv_bound: float
    name: str = ""

    def __post_init__(self) -> None:
        if not 0.0 < self.deriv_bound < 1.0:
            raise ValueError("deriv_bound must lie in (0, 1)")
        for g in (self.g1, self.g2):
            for x in (0.0, 0.25, 0.5, 0.75, 1.0):
                y = g(x)
                if not -1e-12 <= y <= 1 + 1e-12:
                    raise ValueError(f"branch leaves [0, 1]: g({x}) = {y}")

    def image_intervals(self) -> tuple[tuple[float, float], tuple[float, float]]:
        i1 = tuple(sorted((self.g1(0.0), self.g1(1.0))))
        i2 = tuple(sorted((self.g2(0.0), self.g2(1.0))))
        return i1, i2


def nonlinear_pair(name: str, lam: float = 9.0) -> NonlinearPair:
    """Presets: ``cookie_cutter`` (mildly bent middle-thirds branches)
    and ``logistic`` (inverse branches of lam*x*(1-x), lam > 2+sqrt(5))."""
    key = name.strip().lower()
    if key == "cookie_cutter":
        return NonlinearPair(
            g1=lambda x: x / 3 + x * x / 10,
            g2=lambda x: x / 3 + 2 / 3 - x * x / 10,
            deriv_bound=1 / 3 + 1 / 5,
            name="cookie_cutter",
        )
    if key == "logistic":
        if lam <= 2 + math.sqrt(5.0):
            raise ValueError("logistic pair needs lam > 2 + sqrt(5)")

        def h1(y: float, lam=lam) -> float:
            return 0.5 - math.sqrt(max(0.25 - y / lam, 0.0))

        def h2(y: float, lam=lam) -> float:
            return 0.5 + math.sqrt(max(0.25 - y / lam, 0.0))

        bound = 1.0 / (2.0 * lam * math.sqrt(0.25 - 1.0 / lam))
        return NonlinearPair(h1, h2, deriv_bound=bound, name=f"logistic({lam:g})")
    raise ValueError(f"unknown nonlinear pair {name!r}")


def inverse_orbit(pair: NonlinearPair, depth: int, max_points: int = DEFAULT_POINT_CAP) -> PointCloud:
    """All depth-k branch compositions applied to {0, 1}: a sample of
    the invariant repeller with 2**k dyadic pieces."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    (a1, b1), (a2, b2) = pair.image_intervals()
    if max(a1, a2) <= min(b1, b2):
        raise ValueError(
            f"branch images [{a1:.6g}, {b1:.6g}] and [{a2:.6g}, {b2:.6g}] overlap"
        )
    _guard_points(2, depth, 2, max_points)
    pts = np.array([0.0, 1.0])
    for _ in range(depth):
        pts = np.unique(np.concatenate([
            np.array([pair.g1(x) for x in pts]),
            np.array([pair.g2(x) for x in pts]),
        ]))
    return PointCloud(pts.reshape(-1, 1), eta=pair.deriv_bound**depth / 2.0)
