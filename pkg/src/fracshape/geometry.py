"""Point clouds, similitude transforms, exact Hausdorff distance, and
smallest enclosing balls in dimensions 1 to 3.

Distances here are always plain Euclidean Hausdorff distances between
finite samples.  Quotients over transform groups live in
:mod:`fracshape.metrics`; this module only supplies the exact primitives
they are built from.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import cdist

# Membership in a ball is tested with multiplicative slack so that support
# points of their own ball always pass.
_CONTAIN_EPS = 1e-14
# Fixed shuffle applied before the enclosing-ball recursion; canonical
# lexicographic order first makes the whole pipeline input-order free.
_SHUFFLE_SEED = 716253
# Above this many point pairs the all-pairs distance matrix is dropped in
# favour of exact nearest-neighbour tree queries.
_BRUTE_PAIR_LIMIT = 4_000_000
_HULL_CUTOFF = 600

__all__ = [
    "PointCloud",
    "Transform",
    "BallReport",
    "hausdorff",
    "directed_hausdorff",
    "min_enclosing_ball",
    "diameter",
    "transform_apply",
    "transform_compose",
    "in_parallel_body",
    "read_csv",
    "write_csv",
    "dedupe_points",
]


@dataclass(frozen=True)
class PointCloud:
    """A finite nonempty set of points in R^1, R^2, or R^3.

    ``eta`` records sampling resolution: the Hausdorff distance between
    the cloud and the compact set it stands for is at most ``eta``.
    ``eta = 0`` means the cloud is the set itself.
    """

    points: np.ndarray
    eta: float = 0.0

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("points must form a nonempty (n, dim) array")
        if not 1 <= pts.shape[1] <= 3:
            raise ValueError(f"points dimension must be 1, 2, or 3, got {pts.shape[1]}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if not (isinstance(self.eta, (int, float)) and math.isfinite(self.eta) and self.eta >= 0):
            raise ValueError("eta must be a finite nonnegative number")
        pts = np.ascontiguousarray(pts)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "eta", float(self.eta))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def with_eta(self, eta: float) -> "PointCloud":
        return PointCloud(self.points, eta)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)


def dedupe_points(points: np.ndarray) -> np.ndarray:
    """Remove duplicate rows.  Equality is exact bitwise equality only;
    the result is in lexicographic row order."""
    return np.unique(np.asarray(points, dtype=float), axis=0)


def _as_points(cloud) -> np.ndarray:
    """Accept a PointCloud or a bare (n, dim) array."""
    if isinstance(cloud, PointCloud):
        return cloud.points
    pts = np.asarray(cloud, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("expected a PointCloud or a nonempty (n, dim) array")
    return pts


# ---------------------------------------------------------------------------
# transforms


def _check_ortho(matrix: np.ndarray) -> None:
    d = matrix.shape[0]
    if matrix.shape != (d, d):
        raise ValueError("ortho must be a square matrix")
    err = np.abs(matrix @ matrix.T - np.eye(d)).max()
    if err > 1e-9:
        raise ValueError(f"ortho is not orthogonal (defect {err:.3e})")
    # entrywise absolute sum of an orthogonal matrix never exceeds dim**2
    if np.abs(matrix).sum() > d * d + 1e-9:
        raise ValueError("ortho entrywise absolute sum out of range")


@dataclass(frozen=True, eq=False)
class Transform:
    """Similitude x -> ratio * ortho @ x + translation.

    ``ortho`` is orthogonal (checked to 1e-9), ``ratio`` a positive
    scalar.  ``orientation`` is the sign of det(ortho): +1 for rigid
    motions, -1 when a reflection is involved.
    """

    ortho: np.ndarray
    translation: np.ndarray
    ratio: float = 1.0

    def __post_init__(self) -> None:
        o = np.asarray(self.ortho, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(-1)
        if o.ndim != 2 or o.shape[0] != o.shape[1]:
            raise ValueError("ortho must be a square matrix")
        if not 1 <= o.shape[0] <= 3:
            raise ValueError("transform dimension must be 1, 2, or 3")
        if t.shape[0] != o.shape[0]:
            raise ValueError("translation length must match ortho dimension")
        if not (np.all(np.isfinite(o)) and np.all(np.isfinite(t))):
            raise ValueError("transform entries must be finite")
        if not (math.isfinite(self.ratio) and self.ratio > 0):
            raise ValueError("ratio must be a positive finite number")
        _check_ortho(o)
        o = np.ascontiguousarray(o)
        o.flags.writeable = False
        t = np.ascontiguousarray(t)
        t.flags.writeable = False
        object.__setattr__(self, "ortho", o)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "ratio", float(self.ratio))

    @property
    def dim(self) -> int:
        return self.ortho.shape[0]

    @property
    def orientation(self) -> int:
        return 1 if np.linalg.det(self.ortho) > 0 else -1

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        squeeze = pts.ndim == 1
        if squeeze:
            pts = pts.reshape(1, -1)
        if pts.shape[1] != self.dim:
            raise ValueError("points dimension does not match transform")
        out = self.ratio * (pts @ self.ortho.T) + self.translation
        return out[0] if squeeze else out

    def inverse(self) -> "Transform":
        inv_ratio = 1.0 / self.ratio
        ot = self.ortho.T.copy()
        return Transform(ot, -inv_ratio * (ot @ self.translation), inv_ratio)

    # constructors ---------------------------------------------------------

    @staticmethod
    def identity(dim: int) -> "Transform":
        return Transform(np.eye(dim), np.zeros(dim))

    @staticmethod
    def translation_by(vector) -> "Transform":
        v = np.asarray(vector, dtype=float).reshape(-1)
        return Transform(np.eye(v.shape[0]), v)

    @staticmethod
    def scaling(dim: int, ratio: float) -> "Transform":
        return Transform(np.eye(dim), np.zeros(dim), ratio)

    @staticmethod
    def rotation2(theta: float, ratio: float = 1.0, translation=(0.0, 0.0)) -> "Transform":
        c, s = math.cos(theta), math.sin(theta)
        return Transform(np.array([[c, -s], [s, c]]), np.asarray(translation, float), ratio)

    @staticmethod
    def reflection2(axis_theta: float = 0.0) -> "Transform":
        """Reflection across the line through the origin at angle axis_theta."""
        c, s = math.cos(2 * axis_theta), math.sin(2 * axis_theta)
        return Transform(np.array([[c, s], [s, -c]]), np.zeros(2))

    @staticmethod
    def rotation3(axis, theta: float) -> "Transform":
        a = np.asarray(axis, dtype=float)
        a = a / np.linalg.norm(a)
        k = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
        o = np.eye(3) + math.sin(theta) * k + (1 - math.cos(theta)) * (k @ k)
        return Transform(o, np.zeros(3))

    @staticmethod
    def from_quaternion(q) -> "Transform":
        w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
        o = np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ]
        )
        return Transform(o, np.zeros(3))

    @staticmethod
    def random_isometry(
        dim: int,
        rng: np.random.Generator,
        translation_scale: float = 1.0,
        allow_reflection: bool = True,
    ) -> "Transform":
        if dim == 1:
            o = np.array([[1.0]])
            if allow_reflection and rng.random() < 0.5:
                o = np.array([[-1.0]])
        elif dim == 2:
            o = Transform.rotation2(rng.uniform(0, 2 * math.pi)).ortho.copy()
            if allow_reflection and rng.random() < 0.5:
                o = o @ np.diag([1.0, -1.0])
        else:
            q = rng.normal(size=4)
            o = Transform.from_quaternion(q).ortho.copy()
            if allow_reflection and rng.random() < 0.5:
                o = o @ np.diag([1.0, 1.0, -1.0])
        t = rng.uniform(-translation_scale, translation_scale, size=dim)
        return Transform(o, t)

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "ortho": self.ortho.tolist(),
            "translation": self.translation.tolist(),
            "ratio": self.ratio,
            "orientation": self.orientation,
        }

    @staticmethod
    def from_dict(data: dict) -> "Transform":
        t = Transform(
            np.asarray(data["ortho"], dtype=float),
            np.asarray(data["translation"], dtype=float),
            float(data.get("ratio", 1.0)),
        )
        want = data.get("orientation")
        if want is not None and int(want) != t.orientation:
            raise ValueError("declared orientation does not match ortho determinant")
        return t


def transform_apply(transform: Transform, cloud: PointCloud) -> PointCloud:
    """Apply a similitude to a cloud.  Sampling resolution scales with the
    ratio, so the eta tag stays an honest bound."""
    return PointCloud(transform.apply(cloud.points), eta=transform.ratio * cloud.eta)


def transform_compose(first: Transform, second: Transform) -> Transform:
    """Composite first o second (apply ``second``, then ``first``)."""
    if first.dim != second.dim:
        raise ValueError("cannot compose transforms of different dimension")
    ortho = first.ortho @ second.ortho
    translation = first.ratio * (first.ortho @ second.translation) + first.translation
    return Transform(ortho, translation, first.ratio * second.ratio)


# ---------------------------------------------------------------------------
# Hausdorff distance


def _directed_brute(p: np.ndarray, q: np.ndarray) -> float:
    return float(cdist(p, q).min(axis=1).max())


def _directed_tree(p: np.ndarray, tree: cKDTree) -> float:
    d, _ = tree.query(p, k=1)
    return float(np.max(d))


def directed_hausdorff(a, b) -> float:
    """sup over points of ``a`` of the distance to ``b``.  Exact."""
    p, q = _as_points(a), _as_points(b)
    if p.shape[1] != q.shape[1]:
        raise ValueError("directed_hausdorff: clouds have different dimensions")
    if p.shape[0] * q.shape[0] <= _BRUTE_PAIR_LIMIT:
        return _directed_brute(p, q)
    return _directed_tree(p, cKDTree(q))


def hausdorff(a, b) -> float:
    """Exact Hausdorff distance between two finite clouds.

    All pairwise distances are used below a size cutoff; larger inputs
    switch to exact nearest-neighbour tree queries.  Both paths return
    the same value.
    """
    p, q = _as_points(a), _as_points(b)
    if p.shape[1] != q.shape[1]:
        raise ValueError("hausdorff: clouds have different dimensions")
    if p.shape[0] * q.shape[0] <= _BRUTE_PAIR_LIMIT:
        d = cdist(p, q)
        return float(max(d.min(axis=1).max(), d.min(axis=0).max()))
    return max(
        _directed_tree(p, cKDTree(q)),
        _directed_tree(q, cKDTree(p)),
    )


def in_parallel_body(cloud, point, delta: float) -> bool:
    """Whether ``point`` lies within distance ``delta`` of the cloud."""
    pts = _as_points(cloud)
    x = np.asarray(point, dtype=float).reshape(1, -1)
    if x.shape[1] != pts.shape[1]:
        raise ValueError("in_parallel_body: point dimension does not match cloud")
    if delta < 0:
        raise ValueError("in_parallel_body: delta must be nonnegative")
    return bool(cdist(x, pts).min() <= delta)


# ---------------------------------------------------------------------------
# smallest enclosing ball


@dataclass(frozen=True)
class BallReport:
    """Smallest enclosing ball with its boundary certificate.

    ``support`` lists input points lying on the sphere; the ball of the
    support alone already has the reported radius, which is what makes
    the radius minimal.
    """

    center: np.ndarray
    radius: float
    support: np.ndarray

    def __post_init__(self) -> None:
        c = np.ascontiguousarray(np.asarray(self.center, dtype=float).reshape(-1))
        s = np.ascontiguousarray(np.asarray(self.support, dtype=float))
        c.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "radius", float(self.radius))


def _circumsphere(pts: np.ndarray):
    """Smallest sphere through all of ``pts`` with center in their affine
    hull.  Returns (center, radius) or None when the points are too
    degenerate to define one."""
    p0 = pts[0]
    v = pts[1:] - p0
    gram = 2.0 * (v @ v.T)
    rhs = np.einsum("ij,ij->i", v, v)
    try:
        x = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(x)):
        return None
    if np.abs(gram @ x - rhs).max() > 1e-7 * max(1.0, np.abs(rhs).max()):
        return None
    center = p0 + x @ v
    radius = float(np.sqrt(((center - p0) ** 2).sum()))
    return center, radius


def _ball_of_support(support: list) -> tuple:
    """Exact smallest ball containing at most four points."""
    if not support:
        return None, -1.0
    if len(support) == 1:
        return support[0], 0.0
    pts = np.asarray(support)
    best_c, best_r = None, math.inf
    for size in range(2, len(support) + 1):
        for idx in combinations(range(len(support)), size):
            got = _circumsphere(pts[list(idx)])
            if got is None:
                continue
            c, r = got
            d2 = ((pts - c) ** 2).sum(axis=1)
            if np.all(d2 <= r * r * (1 + _CONTAIN_EPS) + 1e-30) and r < best_r:
                best_c, best_r = c, r
    if best_c is None:
        # numerically coincident points
        return pts[0], 0.0
    return best_c, best_r


def _welzl(pts: np.ndarray) -> tuple:
    n = len(pts)

    def rec(i: int, support: list) -> tuple:
        if i == n or len(support) == pts.shape[1] + 1:
            return _ball_of_support(support)
        c, r = rec(i + 1, support)
        p = pts[i]
        if c is not None and ((p - c) ** 2).sum() <= r * r * (1 + _CONTAIN_EPS) + 1e-30:
            return c, r
        return rec(i + 1, support + [p])

    limit = sys.getrecursionlimit()
    try:
        sys.setrecursionlimit(max(limit, n * 3 + 1000))
        return rec(0, [])
    finally:
        sys.setrecursionlimit(limit)


def min_enclosing_ball(cloud) -> BallReport:
    """Exact smallest enclosing ball of a cloud or bare (n, dim) array.

    Works in the affine hull of the points, so collinear sets in the
    plane or coplanar sets in space are handled exactly.  Deterministic:
    points are put in canonical lexicographic order, then shuffled with a
    fixed seed before the recursion.
    """
    pts = dedupe_points(_as_points(cloud))
    if pts.shape[0] == 1:
        return BallReport(pts[0], 0.0, pts[:1])

    shift = pts.mean(axis=0)
    x = pts - shift
    _, sing, vt = np.linalg.svd(x, full_matrices=False)
    scale = sing[0]
    if scale == 0.0:
        return BallReport(pts[0], 0.0, pts[:1])
    rank = int(np.sum(sing > 1e-12 * scale))
    rank = max(rank, 1)
    basis = vt[:rank]
    y = x @ basis.T

    if rank == 1:
        t = y[:, 0]
        lo, hi = float(t.min()), float(t.max())
        center_y = np.array([(lo + hi) / 2.0])
        radius = (hi - lo) / 2.0
    else:
        work = y
        if work.shape[0] > _HULL_CUTOFF:
            try:
                hull = ConvexHull(work)
                work = work[np.sort(hull.vertices)]
            except QhullError:
                pass
        order = np.lexsort(work.T[::-1])
        work = work[order]
        perm = np.random.default_rng(_SHUFFLE_SEED).permutation(work.shape[0])
        center_y, radius = _welzl(work[perm])

    center = shift + center_y @ basis
    # final radius from the full input so the containment certificate is exact
    dist = np.sqrt(((pts - center) ** 2).sum(axis=1))
    radius = max(float(radius), float(dist.max()))
    on_boundary = dist >= radius - 1e-9 * (1.0 + radius)
    return BallReport(center, radius, pts[on_boundary])


# ---------------------------------------------------------------------------
# diameter


def _brute_diameter(pts: np.ndarray) -> float:
    best = 0.0
    for i0 in range(0, pts.shape[0], 512):
        block = cdist(pts[i0 : i0 + 512], pts)
        best = max(best, float(block.max()))
    return best


def diameter(cloud) -> float:
    """Exact diameter (largest pairwise distance) of a cloud or bare
    (n, dim) array."""
    pts = _as_points(cloud)
    n = pts.shape[0]
    if n <= 2000:
        return _brute_diameter(pts)
    shift = pts.mean(axis=0)
    x = pts - shift
    _, sing, vt = np.linalg.svd(x, full_matrices=False)
    if sing[0] == 0.0:
        return 0.0
    rank = int(np.sum(sing > 1e-12 * sing[0]))
    if rank == 1:
        t = x @ vt[0]
        a = pts[int(np.argmin(t))]
        b = pts[int(np.argmax(t))]
        return float(np.sqrt(((a - b) ** 2).sum()))
    y = x @ vt[:rank].T
    try:
        hull = ConvexHull(y)
    except QhullError:
        return _brute_diameter(pts)
    return _brute_diameter(pts[np.sort(hull.vertices)])


# ---------------------------------------------------------------------------
# CSV round trip

_HEADER_RE = re.compile(r"^#\s*dim=(\d+)\s+eta=([0-9eE+.\-]+)\s*$")


def write_csv(cloud: PointCloud, path, comments=()) -> None:
    """Write ``# dim=<n> eta=<eta>`` then one point per line.  Floats are
    written with repr so reading back is bit exact.  Extra ``comments``
    become ``#``-prefixed lines after the header and are skipped on read."""
    with open(path, "w", encoding="ascii", newline="\n") as handle:
        handle.write(f"# dim={cloud.dim} eta={cloud.eta!r}\n")
        for comment in comments:
            text = str(comment)
            if "\n" in text or "\r" in text:
                raise ValueError("comments must be single lines")
            handle.write(f"# {text}\n")
        for row in cloud.points:
            handle.write(",".join(repr(float(v)) for v in row) + "\n")


def read_csv(path) -> PointCloud:
    with open(path, "r", encoding="ascii") as handle:
        header = handle.readline()
        match = _HEADER_RE.match(header.strip())
        if not match:
            raise ValueError(f"{path}: first line must be '# dim=<n> eta=<eta>'")
        dim = int(match.group(1))
        eta = float(match.group(2))
        rows = []
        for lineno, line in enumerate(handle, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != dim:
                raise ValueError(f"{path}:{lineno}: expected {dim} coordinates, got {len(parts)}")
            try:
                rows.append([float(p) for p in parts])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad number ({exc})") from None
    if not rows:
        raise ValueError(f"{path}: no points")
    return PointCloud(np.asarray(rows), eta=eta)
