"""Finite-window checkers for quasi-tilings, quasi-patterns, packings,
and point crystals in the plane.

Tiles are simple polygons compared through the isometry-quotient
Hausdorff metric on boundary-plus-interior samples; patterns are finite
motif families compared through min-match family distances; packings
are scored by exact polygon clipping against an axis-aligned window.
Every checker works on a finite window with an explicit interior
margin so that edge tiles never poison symmetry measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import shapely
from scipy.spatial import cKDTree
from shapely.geometry import Polygon as _SPolygon
from shapely.geometry import box as _sbox
from shapely.strtree import STRtree

from .geometry import (
    PointCloud,
    Transform,
    diameter,
    directed_hausdorff,
    hausdorff,
    min_enclosing_ball,
)
from .metrics import MetricVariant, shape_difference
from .registration import LIGHT_PARAMS, SearchParams

__all__ = [
    "Polygon",
    "Patch",
    "DotPattern",
    "PrototileReport",
    "SymmetryReport",
    "TransitivityReport",
    "EngulfReport",
    "DensityReport",
    "CrystalReport",
    "check_quasi_prototiles",
    "quasi_symmetry_lambda",
    "quasi_transitivity",
    "group_product_defect",
    "engulf",
    "packing_density",
    "monte_carlo_density",
    "crystal_check",
    "unit_square",
    "square_lattice",
    "wavy_partition",
    "notched_dodecagon",
    "dodecagon_packing",
    "lattice_dots",
]

# Quotient over isometries without size normalization: tile and crystal
# budgets are absolute lengths (delta * size(P), lambda * spacing).
_ISOMETRY = MetricVariant("isometry", "none")

# Two tiles overlap when their clipped intersection exceeds this
# fraction of the smaller tile; shared edges have exact area zero.
_OVERLAP_REL = 1e-9
_EDGE_TOL = 1e-9


def _resolve_params(params: SearchParams | None, budget: int | None) -> SearchParams:
    if params is not None:
        return params
    if budget is None:
        return LIGHT_PARAMS
    if budget < 50:
        raise ValueError("budget must be at least 50 evaluations")
    return replace(LIGHT_PARAMS, budget=int(budget))


def _shoelace(vertices: np.ndarray) -> float:
    x = vertices[:, 0]
    y = vertices[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class Polygon:
    """Simple polygon with positive area, stored counterclockwise."""

    vertices: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError("vertices must be an array of shape (k, 2)")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        if v.shape[0] >= 2 and np.array_equal(v[0], v[-1]):
            v = v[:-1]
        if v.shape[0] < 3:
            raise ValueError("a polygon needs at least three distinct vertices")
        signed = _shoelace(v)
        if signed < 0.0:
            v = v[::-1]
            signed = -signed
        if signed <= 0.0:
            raise ValueError("polygon area must be positive")
        shape = _SPolygon(v)
        if not (shape.is_valid and shape.is_simple):
            raise ValueError("polygon must be simple (non-self-intersecting)")
        v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    def shapely(self) -> _SPolygon:
        return _SPolygon(self.vertices)

    @property
    def area(self) -> float:
        return _shoelace(self.vertices)

    @property
    def perimeter(self) -> float:
        edges = np.roll(self.vertices, -1, axis=0) - self.vertices
        return float(np.sum(np.hypot(edges[:, 0], edges[:, 1])))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))

    @property
    def radius(self) -> float:
        return min_enclosing_ball(self.vertices).radius

    @property
    def diameter(self) -> float:
        return diameter(self.vertices)

    def boundary_points(self, eta: float) -> np.ndarray:
        """Points along the boundary at most ``eta`` apart, anchored at
        the vertices so congruent polygons get congruent samples."""
        if eta <= 0:
            raise ValueError("eta must be positive")
        chunks = []
        nxt = np.roll(self.vertices, -1, axis=0)
        for start, end in zip(self.vertices, nxt):
            length = float(np.hypot(*(end - start)))
            steps = max(1, math.ceil(length / eta))
            t = np.arange(steps, dtype=float)[:, None] / steps
            chunks.append(start + t * (end - start))
        return np.concatenate(chunks, axis=0)

    def sample(self, eta: float, interior_eta: float | None = None) -> PointCloud:
        """Boundary sampling at ``eta`` plus an interior grid.

        The grid spacing defaults to ``4 * eta``: Hausdorff gaps between
        near-congruent tiles live on the boundary, while the grid only
        has to witness holes, slots, and tabs.  The cloud's ``eta``
        records the combined covering radius.
        """
        if eta <= 0:
            raise ValueError("eta must be positive")
        grid = 4.0 * eta if interior_eta is None else float(interior_eta)
        if grid <= 0:
            raise ValueError("interior_eta must be positive")
        pts = [self.boundary_points(eta)]
        x0, y0, x1, y1 = self.bounds
        xs = np.arange(x0 + 0.5 * grid, x1, grid)
        ys = np.arange(y0 + 0.5 * grid, y1, grid)
        if xs.size and ys.size:
            gx, gy = np.meshgrid(xs, ys)
            inside = shapely.contains_xy(self.shapely(), gx.ravel(), gy.ravel())
            if np.any(inside):
                pts.append(np.column_stack([gx.ravel()[inside], gy.ravel()[inside]]))
        cloud = np.concatenate(pts, axis=0)
        return PointCloud(cloud, eta=grid * math.sqrt(2.0))

    def transformed(self, transform: Transform) -> "Polygon":
        return Polygon(transform.apply(self.vertices))

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon(self.vertices + np.array([dx, dy]))

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Polygon":
        return cls(np.asarray(data["vertices"], dtype=float))


def _window_tuple(window) -> tuple[float, float, float, float]:
    w = tuple(float(v) for v in window)
    if len(w) != 4:
        raise ValueError("window must be (xmin, ymin, xmax, ymax)")
    if not all(math.isfinite(v) for v in w):
        raise ValueError("window bounds must be finite")
    if w[2] <= w[0] or w[3] <= w[1]:
        raise ValueError("window must have positive width and height")
    return w


def _assert_tiles_disjoint(shapes: list[_SPolygon]) -> None:
    if len(shapes) < 2:
        return
    tree = STRtree(shapes)
    left, right = tree.query(shapes, predicate="intersects")
    for i, j in zip(left.tolist(), right.tolist()):
        if i >= j:
            continue
        inter = shapes[i].intersection(shapes[j]).area
        floor = _OVERLAP_REL * min(shapes[i].area, shapes[j].area)
        if inter > floor:
            raise ValueError(
                f"tiles {i} and {j} have overlapping interiors "
                f"(intersection area {inter:.6g})"
            )


@dataclass(frozen=True)
class Patch:
    """Finite family of tiles or motifs inside an axis-aligned window.

    Exactly one of ``tiles`` (polygons, pairwise interior-disjoint) and
    ``motifs`` (point clouds) is nonempty.  ``margin`` is the border
    strip excluded when symmetry defects are measured: only members
    lying inside the margin-shrunk window count.
    """

    tiles: tuple = ()
    motifs: tuple = ()
    window: tuple[float, float, float, float] = (0.0, 0.0, 1.0, 1.0)
    margin: float = 0.0

    def __post_init__(self) -> None:
        tiles = tuple(self.tiles)
        motifs = tuple(self.motifs)
        if bool(tiles) == bool(motifs):
            raise ValueError("exactly one of tiles and motifs must be nonempty")
        window = _window_tuple(self.window)
        if not (math.isfinite(self.margin) and self.margin >= 0):
            raise ValueError("margin must be a finite nonnegative number")
        if tiles:
            if not all(isinstance(t, Polygon) for t in tiles):
                raise ValueError("tiles must be Polygon instances")
            shapes = [t.shapely() for t in tiles]
            frame = _sbox(*(window[0], window[1], window[2], window[3]))
            for k, shape in enumerate(shapes):
                if not shape.intersects(frame):
                    raise ValueError(f"tile {k} does not meet the window")
            _assert_tiles_disjoint(shapes)
        else:
            if not all(isinstance(m, PointCloud) for m in motifs):
                raise ValueError("motifs must be PointCloud instances")
            lo = np.array([window[0], window[1]]) - _EDGE_TOL
            hi = np.array([window[2], window[3]]) + _EDGE_TOL
            for k, motif in enumerate(motifs):
                if motif.points.shape[1] != 2:
                    raise ValueError("motifs must be planar point clouds")
                inside = np.all((motif.points >= lo) & (motif.points <= hi), axis=1)
                if not np.any(inside):
                    raise ValueError(f"motif {k} does not meet the window")
        object.__setattr__(self, "tiles", tiles)
        object.__setattr__(self, "motifs", motifs)
        object.__setattr__(self, "window", window)
        object.__setattr__(self, "margin", float(self.margin))

    @property
    def kind(self) -> str:
        return "tiles" if self.tiles else "motifs"

    @property
    def n(self) -> int:
        return len(self.tiles) if self.tiles else len(self.motifs)

    def shrunk_window(self) -> tuple[float, float, float, float]:
        x0, y0, x1, y1 = self.window
        m = self.margin
        return (x0 + m, y0 + m, x1 - m, y1 - m)

    def to_dict(self) -> dict:
        data: dict = {"window": list(self.window), "margin": self.margin}
        if self.tiles:
            data["tiles"] = [t.to_dict() for t in self.tiles]
        else:
            data["motifs"] = [
                {"points": m.points.tolist(), "eta": m.eta} for m in self.motifs
            ]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Patch":
        tiles = tuple(Polygon.from_dict(t) for t in data.get("tiles", ()))
        motifs = tuple(
            PointCloud(np.asarray(m["points"], dtype=float), eta=float(m.get("eta", 0.0)))
            for m in data.get("motifs", ())
        )
        return cls(
            tiles=tiles,
            motifs=motifs,
            window=tuple(data["window"]),
            margin=float(data.get("margin", 0.0)),
        )


@dataclass(frozen=True)
class DotPattern:
    """Finite uniformly discrete point set; ``spacing`` is the minimum
    pairwise distance."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or not 1 <= pts.shape[1] <= 3:
            raise ValueError("points must be an array of shape (k, dim<=3)")
        if pts.shape[0] < 1:
            raise ValueError("a dot pattern needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points must be finite")
        if pts.shape[0] >= 2:
            dist, _ = cKDTree(pts).query(pts, k=2)
            if float(dist[:, 1].min()) <= 0.0:
                raise ValueError("dot pattern contains duplicate points")
        pts = np.ascontiguousarray(pts)
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def spacing(self) -> float:
        if self.n < 2:
            raise ValueError("spacing needs at least two points")
        dist, _ = cKDTree(self.points).query(self.points, k=2)
        return float(dist[:, 1].min())

    def cloud(self) -> PointCloud:
        return PointCloud(self.points)

    def to_dict(self) -> dict:
        return {"points": self.points.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DotPattern":
        return cls(np.asarray(data["points"], dtype=float))


# ---------------------------------------------------------------------------
# prototile certification


@dataclass(frozen=True)
class PrototileReport:
    """Per-tile prototile assignment under absolute budgets
    ``delta_j * size(P_j)``.

    ``assignment`` holds one ``(tile, prototile, upper, budget)`` row per
    tile, with the admissible prototile of smallest slack when the tile
    passes and the closest-to-admissible one when it fails.  ``usage``
    counts passing tiles per prototile; the strict reading additionally
    demands ``all_used``.
    """

    passed: bool
    assignment: tuple
    tile_ok: tuple
    usage: tuple
    all_used: bool
    witness: int | None
    size: str
    search_tol: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "assignment": [list(row) for row in self.assignment],
            "tile_ok": list(self.tile_ok),
            "usage": list(self.usage),
            "all_used": self.all_used,
            "witness": self.witness,
            "size": self.size,
            "search_tol": self.search_tol,
        }


def check_quasi_prototiles(
    patch: Patch,
    prototiles,
    deltas,
    size: str = "radius",
    params: SearchParams | None = None,
    budget: int | None = None,
    sample_divisor: int = 200,
) -> PrototileReport:
    """Certify that every tile is within ``delta_j * size(P_j)`` of some
    prototile under the isometry-quotient Hausdorff metric.

    ``size`` chooses the budget scale: ``"radius"`` uses the enclosing
    ball radius of each prototile, ``"diameter"`` its diameter.  Tiles
    and prototiles are compared on boundary samples at
    ``r(P_j) / sample_divisor`` plus an interior grid.
    """
    if patch.kind != "tiles":
        raise ValueError("prototile check needs a tile patch")
    prototiles = list(prototiles)
    if not prototiles:
        raise ValueError("at least one prototile is required")
    if not all(isinstance(p, Polygon) for p in prototiles):
        raise ValueError("prototiles must be Polygon instances")
    deltas = [float(d) for d in deltas]
    if len(deltas) != len(prototiles):
        raise ValueError("deltas must match prototiles in length")
    if any(d < 0 for d in deltas):
        raise ValueError("every delta must be nonnegative")
    if size not in ("radius", "diameter"):
        raise ValueError("size must be 'radius' or 'diameter'")
    params = _resolve_params(params, budget)

    etas = [p.radius / sample_divisor for p in prototiles]
    sizes = [p.radius if size == "radius" else p.diameter for p in prototiles]
    proto_clouds = [p.sample(eta) for p, eta in zip(prototiles, etas)]
    budgets = [d * s for d, s in zip(deltas, sizes)]
    tile_eta = min(etas)

    assignment = []
    tile_ok = []
    usage = [0] * len(prototiles)
    witness = None
    worst_tol = 0.0
    for i, tile in enumerate(patch.tiles):
        tile_cloud = tile.sample(tile_eta)
        best = None
        for j, proto_cloud in enumerate(proto_clouds):
            rep = shape_difference(tile_cloud, proto_cloud, _ISOMETRY, params)
            worst_tol = max(worst_tol, rep.search_tol)
            ok = rep.upper <= budgets[j] + rep.search_tol + 1e-9
            slack = rep.upper - budgets[j]
            if best is None or (ok, -slack) > (best[0], -best[1]):
                best = (ok, slack, j, rep.upper)
        ok, _, j, upper = best
        assignment.append((i, j, upper, budgets[j]))
        tile_ok.append(ok)
        if ok:
            usage[j] += 1
        elif witness is None:
            witness = i
    passed = witness is None
    return PrototileReport(
        passed=passed,
        assignment=tuple(assignment),
        tile_ok=tuple(tile_ok),
        usage=tuple(usage),
        all_used=all(c >= 1 for c in usage),
        witness=witness,
        size=size,
        search_tol=worst_tol,
    )


# ---------------------------------------------------------------------------
# symmetry and transitivity defects


def _require_isometry(transform: Transform) -> None:
    if not isinstance(transform, Transform):
        raise ValueError("transform must be a Transform")
    if transform.dim != 2:
        raise ValueError("transform must act on the plane")
    if abs(transform.ratio - 1.0) > 1e-12:
        raise ValueError("transform must be an isometry (ratio 1)")


def _member_samples(patch: Patch, sample_divisor: int):
    """Sample points, enclosing radii, and a rough center per member."""
    pts = []
    radii = []
    if patch.kind == "tiles":
        for tile in patch.tiles:
            r = tile.radius
            pts.append(tile.sample(r / sample_divisor).points)
            radii.append(r)
    else:
        for motif in patch.motifs:
            pts.append(motif.points)
            radii.append(min_enclosing_ball(motif.points).radius)
    centers = [p.mean(axis=0) for p in pts]
    spans = [float(np.max(np.hypot(*(p - c).T))) for p, c in zip(pts, centers)]
    return pts, radii, centers, spans


def _inside(points: np.ndarray, window) -> bool:
    x0, y0, x1, y1 = window
    lo = np.array([x0, y0]) - _EDGE_TOL
    hi = np.array([x1, y1]) + _EDGE_TOL
    return bool(np.all((points >= lo) & (points <= hi)))


def _min_match(query, targets, t_centers, t_spans) -> float:
    """min over targets of h(query, target), with a center prefilter."""
    q_center = query.mean(axis=0)
    q_span = float(np.max(np.hypot(*(query - q_center).T)))
    gaps = [float(np.hypot(*(q_center - c))) - q_span - s for c, s in zip(t_centers, t_spans)]
    best = math.inf
    for k in np.argsort(gaps):
        if gaps[k] >= best:
            break
        best = min(best, hausdorff(query, targets[k]))
    return best


@dataclass(frozen=True)
class SymmetryReport:
    """Measured symmetry defect of one isometry on a patch.

    ``lambda_hat`` is the max over members inside the margin-shrunk
    window of the min-match Hausdorff distance in both directions,
    divided by the member's enclosing radius for tile patches and left
    absolute for motif patches.
    """

    lambda_hat: float
    forward: tuple
    backward: tuple
    eligible: tuple
    normalized: bool

    def to_dict(self) -> dict:
        return {
            "lambda_hat": self.lambda_hat,
            "forward": [list(row) for row in self.forward],
            "backward": [list(row) for row in self.backward],
            "eligible": list(self.eligible),
            "normalized": self.normalized,
        }


def quasi_symmetry_lambda(
    patch: Patch, transform: Transform, sample_divisor: int = 100
) -> SymmetryReport:
    """Measure how far ``transform`` is from a symmetry of the patch."""
    _require_isometry(transform)
    pts, radii, centers, spans = _member_samples(patch, sample_divisor)
    shrunk = patch.shrunk_window()
    eligible = [i for i, p in enumerate(pts) if _inside(p, shrunk)]
    if not eligible:
        raise ValueError("no member lies inside the margin-shrunk window")
    images = [transform.apply(p) for p in pts]
    img_centers = [transform.apply(c) for c in centers]
    normalized = patch.kind == "tiles"

    forward = []
    backward = []
    lam = 0.0
    for i in eligible:
        scale = radii[i] if normalized else 1.0
        fwd = _min_match(images[i], pts, centers, spans)
        bwd = _min_match(pts[i], images, img_centers, spans)
        forward.append((i, fwd / scale))
        backward.append((i, bwd / scale))
        lam = max(lam, fwd / scale, bwd / scale)
    return SymmetryReport(
        lambda_hat=lam,
        forward=tuple(forward),
        backward=tuple(backward),
        eligible=tuple(eligible),
        normalized=normalized,
    )


@dataclass(frozen=True)
class TransitivityReport:
    """Measured transitivity defect of a finite map list on a patch.

    ``pair_part`` is the worst pair of interior members over the best
    supplied map carrying one onto the other; ``orbit_part`` is the
    worst in-window image over its best matching member.  Both use
    plain Hausdorff distances.
    """

    delta_hat: float
    pair_part: float
    orbit_part: float
    eligible: tuple

    def to_dict(self) -> dict:
        return {
            "delta_hat": self.delta_hat,
            "pair_part": self.pair_part,
            "orbit_part": self.orbit_part,
            "eligible": list(self.eligible),
        }


def quasi_transitivity(
    patch: Patch, group_maps, sample_divisor: int = 100
) -> TransitivityReport:
    """Measure how far the supplied maps are from acting transitively."""
    group_maps = list(group_maps)
    if not group_maps:
        raise ValueError("at least one map is required")
    for g in group_maps:
        _require_isometry(g)
    pts, _, centers, spans = _member_samples(patch, sample_divisor)
    shrunk = patch.shrunk_window()
    eligible = [i for i, p in enumerate(pts) if _inside(p, shrunk)]
    if not eligible:
        raise ValueError("no member lies inside the margin-shrunk window")

    images = [[g.apply(p) for p in pts] for g in group_maps]
    pair_part = 0.0
    for i in eligible:
        for j in eligible:
            best = min(hausdorff(pts[i], img[j]) for img in images)
            pair_part = max(pair_part, best)
    orbit_part = 0.0
    for img in images:
        for i in eligible:
            if not _inside(img[i], patch.window):
                continue
            orbit_part = max(orbit_part, _min_match(img[i], pts, centers, spans))
    return TransitivityReport(
        delta_hat=max(pair_part, orbit_part),
        pair_part=pair_part,
        orbit_part=orbit_part,
        eligible=tuple(eligible),
    )


def group_product_defect(group_maps, probe_points) -> float:
    """Worst distance from a pairwise product of the supplied maps back
    to the supplied list, measured by max displacement on the probe
    points.  Zero means the list is closed under composition there."""
    group_maps = list(group_maps)
    if not group_maps:
        raise ValueError("at least one map is required")
    probe = np.asarray(probe_points, dtype=float)
    if probe.ndim != 2 or probe.shape[0] < 1:
        raise ValueError("probe_points must be a nonempty (k, dim) array")
    actions = [g.apply(probe) for g in group_maps]
    defect = 0.0
    for g1 in group_maps:
        for g2action in actions:
            composed = g1.apply(g2action)
            best = min(
                float(np.max(np.hypot(*(composed - act).T))) for act in actions
            )
            defect = max(defect, best)
    return defect


# ---------------------------------------------------------------------------
# pattern engulfing


@dataclass(frozen=True)
class EngulfReport:
    """Dilated-neighborhood system around a motif pattern.

    ``engulfed`` holds one neighborhood per motif, each a copy of the
    radius-``radius`` dilation of the designated motif moved by the
    best supplied map.  ``min_gap`` is the smallest distance between
    two neighborhoods and must stay above ``gap_required``;
    ``symmetry_measured`` is the worst family-matching distance of the
    supplied maps on the neighborhoods, bounded by ``symmetry_allowed``.
    """

    engulfed: Patch
    radius: float
    d0: float
    delta: float
    eps0: float
    min_gap: float
    gap_required: float
    containment_max: float
    symmetry_measured: float
    symmetry_allowed: float
    match_dists: tuple
    passed: bool

    def to_dict(self) -> dict:
        return {
            "radius": self.radius,
            "d0": self.d0,
            "delta": self.delta,
            "eps0": self.eps0,
            "min_gap": self.min_gap,
            "gap_required": self.gap_required,
            "containment_max": self.containment_max,
            "symmetry_measured": self.symmetry_measured,
            "symmetry_allowed": self.symmetry_allowed,
            "match_dists": list(self.match_dists),
            "passed": self.passed,
        }


def _pattern_spacing(points_list) -> float:
    trees = [cKDTree(p) for p in points_list]
    d0 = math.inf
    for i in range(len(points_list)):
        for j in range(i + 1, len(points_list)):
            d, _ = trees[j].query(points_list[i], k=1)
            d0 = min(d0, float(np.min(d)))
    return d0


def engulf(
    pattern: Patch,
    group_maps,
    delta: float,
    eps0: float,
    designated: int = 0,
    ring: int = 48,
) -> EngulfReport:
    """Grow pairwise disjoint neighborhoods around every motif.

    The designated motif is dilated by ``delta + eps0`` (sampled with
    ``ring`` boundary directions) and moved onto every other motif by
    the best supplied map, which must carry the designated motif within
    ``delta`` of the target motif.  Requires spacing ``d0 > 4 * delta``
    and ``0 < eps0 < (d0 - 4 * delta) / 2``.
    """
    if pattern.kind != "motifs":
        raise ValueError("engulfing needs a motif patch")
    if pattern.n < 2:
        raise ValueError("engulfing needs at least two motifs")
    group_maps = list(group_maps)
    if not group_maps:
        raise ValueError("at least one map is required")
    for g in group_maps:
        _require_isometry(g)
    delta = float(delta)
    eps0 = float(eps0)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if ring < 8:
        raise ValueError("ring must be at least 8")
    if not 0 <= designated < pattern.n:
        raise ValueError("designated motif index out of range")

    points = [m.points for m in pattern.motifs]
    d0 = _pattern_spacing(points)
    if not d0 > 4.0 * delta:
        raise ValueError(f"pattern spacing {d0:.6g} must exceed 4*delta")
    hi = (d0 - 4.0 * delta) / 2.0
    if not 0.0 < eps0 < hi:
        raise ValueError(f"eps0 must lie strictly inside (0, {hi:.6g})")

    radius = delta + eps0
    base = points[designated]
    thetas = np.arange(ring) * (2.0 * math.pi / ring)
    offsets = radius * np.column_stack([np.cos(thetas), np.sin(thetas)])
    dilation = np.concatenate(
        [base, (base[:, None, :] + offsets[None, :, :]).reshape(-1, 2)], axis=0
    )

    match_dists = []
    cores = []
    hoods = []
    for j, target in enumerate(points):
        best = None
        for g in group_maps:
            d = hausdorff(g.apply(base), target)
            if best is None or d < best[0]:
                best = (d, g)
        d, g = best
        if d > delta + 1e-7:
            raise ValueError(
                f"no supplied map carries motif {designated} within delta "
                f"of motif {j} (best distance {d:.6g})"
            )
        match_dists.append(d)
        cores.append(g.apply(base))
        hoods.append(g.apply(dilation))

    containment_max = max(
        directed_hausdorff(points[j], cores[j]) for j in range(pattern.n)
    )
    containment_ok = containment_max <= radius + 1e-9

    min_gap = _pattern_spacing(hoods)
    gap_required = d0 - 4.0 * delta - 2.0 * eps0
    gap_ok = min_gap >= gap_required - 1e-9

    # Family-matching defect per map, both directions.  An image only
    # scores when it lands inside the margin-shrunk window; a
    # neighborhood only scores against images when its preimage lies
    # there, since that is where a matching image is guaranteed to come
    # from on a finite window.
    centers = [h.mean(axis=0) for h in hoods]
    spans = [float(np.max(np.hypot(*(h - c).T))) for h, c in zip(hoods, centers)]
    shrunk = pattern.shrunk_window()
    symmetry_measured = 0.0
    for g in group_maps:
        ginv = g.inverse()
        images = [g.apply(h) for h in hoods]
        img_centers = [g.apply(c) for c in centers]
        for j in range(pattern.n):
            if _inside(images[j], shrunk):
                symmetry_measured = max(
                    symmetry_measured, _min_match(images[j], hoods, centers, spans)
                )
            if _inside(ginv.apply(hoods[j]), shrunk):
                symmetry_measured = max(
                    symmetry_measured, _min_match(hoods[j], images, img_centers, spans)
                )
    symmetry_allowed = 4.0 * delta + 2.0 * eps0
    symmetry_ok = symmetry_measured <= symmetry_allowed + 1e-9

    sample_eta = radius * math.pi / ring
    engulfed = Patch(
        motifs=tuple(PointCloud(h, eta=sample_eta) for h in hoods),
        window=pattern.window,
        margin=pattern.margin,
    )
    return EngulfReport(
        engulfed=engulfed,
        radius=radius,
        d0=d0,
        delta=delta,
        eps0=eps0,
        min_gap=min_gap,
        gap_required=gap_required,
        containment_max=containment_max,
        symmetry_measured=symmetry_measured,
        symmetry_allowed=symmetry_allowed,
        match_dists=tuple(match_dists),
        passed=containment_ok and gap_ok and symmetry_ok,
    )


# ---------------------------------------------------------------------------
# packing density


@dataclass(frozen=True)
class DensityReport:
    """Fraction of the window covered by the tiles, by exact clipping."""

    density: float
    covered_area: float
    window_area: float
    n_tiles: int
    n_clipped: int

    def to_dict(self) -> dict:
        return {
            "density": self.density,
            "covered_area": self.covered_area,
            "window_area": self.window_area,
            "n_tiles": self.n_tiles,
            "n_clipped": self.n_clipped,
        }


def packing_density(config: Patch, window=None) -> DensityReport:
    """Sum of clipped tile areas over the window area.

    Tiles must have pairwise disjoint interiors; shared edges are
    measure zero and allowed.
    """
    if config.kind != "tiles":
        raise ValueError("packing density needs a tile patch")
    window = _window_tuple(config.window if window is None else window)
    shapes = [t.shapely() for t in config.tiles]
    _assert_tiles_disjoint(shapes)
    frame = _sbox(*window)
    covered = 0.0
    n_clipped = 0
    for shape in shapes:
        b = shape.bounds
        if b[2] <= window[0] or b[0] >= window[2] or b[3] <= window[1] or b[1] >= window[3]:
            continue
        area = shape.intersection(frame).area
        if area > 0.0:
            covered += area
            n_clipped += 1
    window_area = (window[2] - window[0]) * (window[3] - window[1])
    return DensityReport(
        density=covered / window_area,
        covered_area=covered,
        window_area=window_area,
        n_tiles=len(shapes),
        n_clipped=n_clipped,
    )


def monte_carlo_density(config: Patch, window=None, n: int = 100_000, seed: int = 0) -> float:
    """Sampling estimate of the packing density, as an independent check
    on the clipped-area computation.  Standard error is about
    ``sqrt(p * (1 - p) / n)``."""
    if config.kind != "tiles":
        raise ValueError("packing density needs a tile patch")
    if n < 1:
        raise ValueError("n must be positive")
    window = _window_tuple(config.window if window is None else window)
    union = shapely.union_all([t.shapely() for t in config.tiles])
    rng = np.random.default_rng(seed)
    xs = rng.uniform(window[0], window[2], size=n)
    ys = rng.uniform(window[1], window[3], size=n)
    return float(np.mean(shapely.contains_xy(union, xs, ys)))


# ---------------------------------------------------------------------------
# crystal certification


@dataclass(frozen=True)
class CrystalReport:
    """Certified ratio of the isometry-quotient Hausdorff distance to
    the reference pattern's spacing."""

    passed: bool
    ratio: float
    ratio_lower: float
    spacing: float
    lam: float
    upper: float
    lower: float
    search_tol: float

    def in_band(self, lam1: float, lam2: float) -> bool:
        """Whether the certified ratio interval sits inside
        ``[lam1, lam2]`` up to search tolerance."""
        tol = self.search_tol / self.spacing + 1e-9
        return self.ratio_lower >= lam1 - tol and self.ratio <= lam2 + tol

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "ratio": self.ratio,
            "ratio_lower": self.ratio_lower,
            "spacing": self.spacing,
            "lam": self.lam,
            "upper": self.upper,
            "lower": self.lower,
            "search_tol": self.search_tol,
        }


def crystal_check(
    pattern: DotPattern,
    reference: DotPattern,
    lam: float,
    params: SearchParams | None = None,
    budget: int | None = None,
) -> CrystalReport:
    """Check that the pattern stays within ``lam`` times the reference
    spacing of the reference point set, up to isometry."""
    if not isinstance(pattern, DotPattern) or not isinstance(reference, DotPattern):
        raise ValueError("pattern and reference must be DotPattern instances")
    if reference.n < 2:
        raise ValueError("reference pattern needs at least two points")
    lam = float(lam)
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    params = _resolve_params(params, budget)
    spacing = reference.spacing
    rep = shape_difference(pattern.cloud(), reference.cloud(), _ISOMETRY, params)
    ratio = rep.upper / spacing
    tol = rep.search_tol / spacing + 1e-9
    return CrystalReport(
        passed=ratio <= lam + tol,
        ratio=ratio,
        ratio_lower=rep.lower / spacing,
        spacing=spacing,
        lam=lam,
        upper=rep.upper,
        lower=rep.lower,
        search_tol=rep.search_tol,
    )


# ---------------------------------------------------------------------------
# generators


def unit_square() -> Polygon:
    return Polygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def square_lattice(nx: int, ny: int, origin=(0.0, 0.0), margin: float = 1.5) -> Patch:
    """Patch of unit squares filling an ``nx`` by ``ny`` window."""
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be positive")
    ox, oy = float(origin[0]), float(origin[1])
    square = unit_square()
    tiles = tuple(
        square.translated(ox + i, oy + j) for j in range(ny) for i in range(nx)
    )
    return Patch(tiles=tiles, window=(ox, oy, ox + nx, oy + ny), margin=margin)


def wavy_partition(
    delta: float,
    seed: int = 0,
    nx: int = 6,
    ny: int = 6,
    samples_per_edge: int = 40,
    margin: float = 1.25,
) -> Patch:
    """Perturbed square lattice bounded by sine curves of amplitude at
    most ``delta``.

    Horizontal cell walls follow ``y = k + a_k sin(2 pi x)`` and
    vertical walls ``x = j + b_j sin(2 pi y)`` with seeded amplitudes
    ``|a_k|, |b_j| <= delta``, so the walls still meet exactly at the
    integer lattice points and integer translations move walls onto
    walls.  Centered at the origin so the quarter turn maps the window
    onto itself.
    """
    delta = float(delta)
    if not 0.0 <= delta <= 0.15:
        raise ValueError("delta must lie in [0, 0.15] so adjacent walls cannot cross")
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be positive")
    if samples_per_edge < 8:
        raise ValueError("samples_per_edge must be at least 8")
    rng = np.random.default_rng(seed)
    j0 = -(nx // 2)
    k0 = -(ny // 2)
    amp_v = delta * (0.6 + 0.4 * rng.random(nx + 1)) * rng.choice([-1.0, 1.0], nx + 1)
    amp_h = delta * (0.6 + 0.4 * rng.random(ny + 1)) * rng.choice([-1.0, 1.0], ny + 1)

    def wall_h(k: int, x: np.ndarray) -> np.ndarray:
        return k + amp_h[k - k0] * np.sin(2.0 * math.pi * x)

    def wall_v(j: int, y: np.ndarray) -> np.ndarray:
        return j + amp_v[j - j0] * np.sin(2.0 * math.pi * y)

    m = samples_per_edge
    t = np.arange(m, dtype=float) / m
    tiles = []
    for j in range(j0, j0 + nx):
        for k in range(k0, k0 + ny):
            bx = j + t
            ry = k + t
            tx = j + 1 - t
            ly = k + 1 - t
            loop = np.concatenate(
                [
                    np.column_stack([bx, wall_h(k, bx)]),
                    np.column_stack([wall_v(j + 1, ry), ry]),
                    np.column_stack([tx, wall_h(k + 1, tx)]),
                    np.column_stack([wall_v(j, ly), ly]),
                ],
                axis=0,
            )
            tiles.append(Polygon(loop))
    window = (float(j0), float(k0), float(j0 + nx), float(k0 + ny))
    return Patch(tiles=tuple(tiles), window=window, margin=margin)


def notched_dodecagon(epsilon: float = 0.0) -> Polygon:
    """Rectilinear dodecagon with a 1-wide slot in the bottom edge and a
    ``(1 + 2 epsilon)``-wide, 3-tall tab on the top edge.

    At ``epsilon = 0`` the tab fits the slot of the copy above, so
    translates interlock with vertical period 5; any ``epsilon > 0``
    makes the tab too wide to insert.  Area is ``24 + 6 epsilon``.
    """
    eps = float(epsilon)
    if not 0.0 <= eps < 1.0:
        raise ValueError("epsilon must lie in [0, 1)")
    return Polygon(
        np.array(
            [
                [0.0, 0.0],
                [2.0, 0.0],
                [2.0, 4.0],
                [3.0, 4.0],
                [3.0, 0.0],
                [5.0, 0.0],
                [5.0, 5.0],
                [3.0 + eps, 5.0],
                [3.0 + eps, 8.0],
                [2.0 - eps, 8.0],
                [2.0 - eps, 5.0],
                [0.0, 5.0],
            ]
        )
    )


def dodecagon_packing(
    epsilon: float,
    mode: str,
    window=(0.0, 0.0, 20.0, 40.0),
    margin: float = 0.0,
) -> Patch:
    """Columns of notched dodecagons over a window.

    ``mode="interlocked"`` stacks with vertical period 5, each tab
    inserted into the slot of the copy above; this requires
    ``epsilon = 0``.  ``mode="stacked"`` rests each copy on top of the
    previous one (period 8) without insertion and works for any
    ``epsilon``.
    """
    if mode not in ("interlocked", "stacked"):
        raise ValueError("mode must be 'interlocked' or 'stacked'")
    if mode == "interlocked" and float(epsilon) > 0.0:
        raise ValueError(
            "interlocked stacking needs the tab to fit the 1-wide slot; "
            "epsilon must be 0"
        )
    window = _window_tuple(window)
    proto = notched_dodecagon(epsilon)
    step = 5.0 if mode == "interlocked" else 8.0
    x0s = np.arange(5.0 * math.floor(window[0] / 5.0), window[2], 5.0)
    x0s = x0s[x0s + 5.0 > window[0] + _EDGE_TOL]
    y_start = step * math.floor((window[1] - 8.0) / step)
    y0s = np.arange(y_start, window[3], step)
    y0s = y0s[y0s + 8.0 > window[1] + _EDGE_TOL]
    tiles = tuple(
        proto.translated(x0, y0) for x0 in x0s for y0 in y0s
    )
    return Patch(tiles=tiles, window=window, margin=margin)


def lattice_dots(
    nx: int,
    ny: int,
    spacing: float = 1.0,
    origin=(0.0, 0.0),
    margin: float | None = None,
) -> Patch:
    """Motif patch of single dots on an ``nx`` by ``ny`` grid."""
    if nx < 1 or ny < 1:
        raise ValueError("nx and ny must be positive")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    if margin is None:
        margin = 1.5 * spacing
    ox, oy = float(origin[0]), float(origin[1])
    motifs = tuple(
        PointCloud(np.array([[ox + i * spacing, oy + j * spacing]]))
        for j in range(ny)
        for i in range(nx)
    )
    pad = 0.5 * spacing
    window = (
        ox - pad,
        oy - pad,
        ox + (nx - 1) * spacing + pad,
        oy + (ny - 1) * spacing + pad,
    )
    return Patch(motifs=motifs, window=window, margin=margin)
