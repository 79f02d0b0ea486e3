"""Box-counting dimension estimation and mass-distribution spot checks.

Counts occupied grid cells across a decreasing ladder of scales, fits the
count-vs-scale slope as a box-dimension estimate, and checks the natural
mass distribution of a stored construction against the covering bound
``mu(B) <= a * r**s`` with constants derived from a separation margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import PointCloud, _as_points, diameter, min_enclosing_ball
from .ifs import similarity_dimension
from .perturb import StructureSystem, check_separation, reference_extent

__all__ = [
    "BoxCountSeries",
    "DimensionFit",
    "MoranReport",
    "ball_mass",
    "box_counts",
    "fit_box_dimension",
    "loglog_svg",
    "moran_mass_check",
    "scale_ladder",
    "series_csv",
]

# Absolute snap tolerance for grid coordinates: boundary points whose
# float error is below this land in the cell whose edge they sit on.
_SNAP = 1e-9


@dataclass(frozen=True)
class BoxCountSeries:
    """Occupied-cell counts for one point cloud over decreasing scales."""

    scales: tuple[float, ...]
    counts: tuple[int, ...]
    anchor: np.ndarray
    dim: int

    def __post_init__(self):
        if len(self.scales) != len(self.counts):
            raise ValueError("scales and counts must align")
        if len(self.scales) == 0:
            raise ValueError("empty series")
        sc = np.asarray(self.scales, dtype=float)
        if np.any(sc <= 0.0) or np.any(np.diff(sc) >= 0.0):
            raise ValueError("scales must be positive and strictly decreasing")
        ct = np.asarray(self.counts, dtype=np.int64)
        if np.any(ct < 1):
            raise ValueError("counts must be at least 1")
        if np.any(np.diff(ct) < 0):
            raise ValueError("counts must be nondecreasing as the scale decreases")
        anchor = np.asarray(self.anchor, dtype=float)
        if anchor.shape != (self.dim,):
            raise ValueError(f"anchor must have shape ({self.dim},)")
        object.__setattr__(self, "anchor", anchor)

    def local_slopes(self) -> tuple[float, ...]:
        """Slope of log count vs -log scale between adjacent ladder rungs."""
        x = -np.log(np.asarray(self.scales))
        y = np.log(np.asarray(self.counts, dtype=float))
        return tuple((y[1:] - y[:-1]) / (x[1:] - x[:-1]))

    def to_dict(self) -> dict:
        return {
            "scales": list(self.scales),
            "counts": [int(c) for c in self.counts],
            "anchor": self.anchor.tolist(),
            "dim": self.dim,
        }


@dataclass(frozen=True)
class DimensionFit:
    """Least-squares slope of log counts against -log scale."""

    slope: float
    intercept: float
    r_squared: float
    local_slopes: tuple[float, ...]
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "local_slopes": list(self.local_slopes),
            "degenerate": self.degenerate,
        }


def scale_ladder(ratio: float, powers) -> tuple[float, ...]:
    """Geometric ladder ratio**j over increasing integer powers.

    Ladders whose ratio is the reciprocal of an integer produce nested
    grids, which keeps occupancy counts monotone across the ladder.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie in (0, 1)")
    powers = [int(j) for j in powers]
    if len(powers) == 0 or np.any(np.diff(powers) <= 0):
        raise ValueError("powers must be strictly increasing")
    return tuple(float(ratio) ** j for j in powers)


def _occupied(points: np.ndarray, anchor: np.ndarray, scale: float) -> int:
    u = (points - anchor) / scale
    snapped = np.round(u)
    u = np.where(np.abs(u - snapped) <= _SNAP, snapped, u)
    cells = np.floor(u).astype(np.int64)
    if cells.shape[1] == 1:
        return int(np.unique(cells[:, 0]).size)
    cells = cells - cells.min(axis=0)
    key = cells[:, 0]
    for d in range(1, cells.shape[1]):
        key = key * (cells[:, d].max() + 1) + cells[:, d]
    return int(np.unique(key).size)


def box_counts(cloud, scales, anchor=None) -> BoxCountSeries:
    """Count occupied half-open grid cells at each scale.

    The grid is anchored at the enclosing-ball center minus its radius
    unless an explicit anchor is given.  Coordinates within 1e-9 of a
    cell edge are treated as exactly on it, so samples built from exact
    multiples of the scale land in the cell to their right.
    """
    points = _as_points(cloud)
    eta = cloud.eta if isinstance(cloud, PointCloud) else 0.0
    sc = [float(s) for s in scales]
    if len(sc) == 0:
        raise ValueError("need at least one scale")
    if np.any(np.diff(sc) >= 0.0):
        raise ValueError("scales must be strictly decreasing")
    bad = [s for s in sc if s <= 2.0 * eta]
    if bad:
        raise ValueError(
            f"scales {bad} do not exceed twice the sampling resolution {eta}"
        )
    if anchor is None:
        ball = min_enclosing_ball(points)
        anchor = ball.center - ball.radius
    else:
        anchor = np.broadcast_to(
            np.asarray(anchor, dtype=float), (points.shape[1],)
        ).copy()
    counts = tuple(_occupied(points, anchor, s) for s in sc)
    return BoxCountSeries(tuple(sc), counts, anchor, points.shape[1])


def fit_box_dimension(series: BoxCountSeries) -> DimensionFit:
    """Fit log counts against -log scale by least squares."""
    if len(series.scales) < 4:
        raise ValueError("need at least 4 scales for a dimension fit")
    x = -np.log(np.asarray(series.scales))
    y = np.log(np.asarray(series.counts, dtype=float))
    local = series.local_slopes()
    if np.all(np.asarray(series.counts) == series.counts[0]):
        return DimensionFit(0.0, float(y[0]), 0.0, local, degenerate=True)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - float(np.sum(resid**2)) / ss_tot
    return DimensionFit(float(slope), float(intercept), r_squared, local)


def series_csv(series: BoxCountSeries) -> str:
    """Render a series as CSV rows of scale, count, local slope."""
    local = series.local_slopes()
    lines = ["scale,count,local_slope"]
    for i, (s, c) in enumerate(zip(series.scales, series.counts)):
        tail = f"{local[i]:.9g}" if i < len(local) else ""
        lines.append(f"{s:.12g},{c},{tail}")
    return "\n".join(lines) + "\n"


def loglog_svg(series: BoxCountSeries, fit: DimensionFit | None = None) -> str:
    """Render a log-log plot of the series, with the fitted line if given."""
    width, height, margin = 480, 360, 50
    x = -np.log(np.asarray(series.scales))
    y = np.log(np.asarray(series.counts, dtype=float))
    x0, x1 = float(x.min()), float(x.max())
    y0, y1 = float(y.min()), float(y.max())
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0

    def px(v):
        return margin + (v - x0) / (x1 - x0) * (width - 2 * margin)

    def py(v):
        return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 12}" text-anchor="middle" '
        f'font-size="12">-log scale</text>',
        f'<text x="14" y="{height // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {height // 2})">log count</text>',
    ]
    if fit is not None and not fit.degenerate:
        ya, yb = fit.slope * x0 + fit.intercept, fit.slope * x1 + fit.intercept
        parts.append(
            f'<line x1="{px(x0):.2f}" y1="{py(ya):.2f}" x2="{px(x1):.2f}" '
            f'y2="{py(yb):.2f}" stroke="#c33" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{width - margin}" y="{margin - 8}" text-anchor="end" '
            f'font-size="12">slope {fit.slope:.4f}</text>'
        )
    for xi, yi in zip(x, y):
        parts.append(
            f'<circle cx="{px(xi):.2f}" cy="{py(yi):.2f}" r="3" fill="#226"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


@dataclass(frozen=True)
class MoranReport:
    """Outcome of the covering-bound mass check on a stored construction."""

    passed: bool
    trials: int
    s: float
    eps0: float
    delta: float
    a1: float
    a2: float
    a: float
    total_mass: float
    worst_ratio: float
    radius_range: tuple[float, float]
    measure_lower: float
    measure_upper: float
    failures: tuple[tuple[float, float, float], ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "trials": self.trials,
            "s": self.s,
            "eps0": self.eps0,
            "delta": self.delta,
            "a1": self.a1,
            "a2": self.a2,
            "a": self.a,
            "total_mass": self.total_mass,
            "worst_ratio": self.worst_ratio,
            "radius_range": list(self.radius_range),
            "measure_lower": self.measure_lower,
            "measure_upper": self.measure_upper,
            "failures": [list(f) for f in self.failures],
        }


def _ball_mass(
    system: StructureSystem, center: np.ndarray, radius: float, s: float
) -> float:
    """Mass of the deepest stored cylinders meeting the closed ball.

    A cylinder counts as meeting the ball when its sample comes within
    the sampling resolution of it, so borderline cylinders are included
    rather than dropped.
    """
    ifss = system.ifss
    total = 0.0
    for w in system.words_at(system.depth):
        piece = system.piece(w)
        d2 = np.sum((piece.points - center) ** 2, axis=1)
        reach = radius + piece.eta
        if float(d2.min()) <= reach * reach:
            total += ifss.word_ratio(w) ** s
    return total


def ball_mass(system: StructureSystem, center, radius: float) -> float:
    """Mass of the deepest stored cylinders meeting a closed ball.

    Each deepest word w contributes c_w**s, with s the similarity
    dimension of the reference system; the total over all of them is 1.
    """
    ifss = system.ifss
    if ifss is None:
        raise ValueError("mass needs a reference system")
    s = similarity_dimension(ifss.ratios)
    center = np.broadcast_to(np.asarray(center, dtype=float), (system.dim,))
    return _ball_mass(system, center, float(radius), s)


def moran_mass_check(
    system: StructureSystem,
    eps0: float,
    delta: float = 0.0,
    trials: int = 200,
    seed: int = 0,
) -> MoranReport:
    """Check the covering bound mu(B) <= a * r**s on random balls.

    The constants come from thickened cylinders N(F_w, eps0*c_w/3):
    a1 = eps0/3 bounds an inner ball, a2 = (1+2*delta)*D + 2*eps0/3 an
    outer ball with D the reference diameter, and the mass a ball of
    radius r can meet is at most a*r**s with
    a = (1+2*a2)**n * a1**(-n) * c_min**(-n).

    ``delta`` is the certified diameter-normalized defect of the stored
    construction (0 for an exact one).  Separation at margin ``eps0`` is
    verified first and a failing margin is an error.  Ball radii are
    drawn log-uniformly between the deepest stored cylinder ratio and
    the reference diameter; below the stored resolution the truncated
    mass would no longer bound the full one.
    """
    ifss = system.ifss
    if ifss is None:
        raise ValueError("mass check needs a reference system")
    if eps0 <= 0.0:
        raise ValueError("eps0 must be positive")
    if delta < 0.0:
        raise ValueError("delta must be nonnegative")
    if trials < 1:
        raise ValueError("trials must be positive")
    sep = check_separation(system, eps0)
    if not sep.passed:
        raise ValueError(
            f"separation fails at margin {eps0}: pair {sep.worst_pair} "
            f"at distance {sep.worst_distance:.6g} needs {sep.worst_required:.6g}"
        )

    s = similarity_dimension(ifss.ratios)
    n = system.dim
    _, d_ref, _ = reference_extent(ifss)
    a1 = eps0 / 3.0
    a2 = (1.0 + 2.0 * delta) * d_ref + 2.0 * eps0 / 3.0
    a = (1.0 + 2.0 * a2) ** n * a1 ** (-n) * ifss.c_min ** (-n)

    root = system.root_piece
    total = _ball_mass(
        system, min_enclosing_ball(root).center, diameter(root) + 1.0, s
    )

    rng = np.random.default_rng(seed)
    r_lo = ifss.c_max**system.depth
    r_hi = max(d_ref, r_lo * 2.0)
    worst = 0.0
    failures = []
    for _ in range(trials):
        r = float(np.exp(rng.uniform(np.log(r_lo), np.log(r_hi))))
        base = root.points[rng.integers(root.n)]
        offset = rng.standard_normal(n)
        norm = float(np.linalg.norm(offset))
        if norm > 0.0:
            offset *= rng.uniform(0.0, r / 3.0) / norm
        mu = _ball_mass(system, base + offset, r, s)
        bound = a * r**s
        ratio = mu / bound
        worst = max(worst, ratio)
        if ratio > 1.0 + 1e-9:
            failures.append((r, mu, bound))

    return MoranReport(
        passed=not failures,
        trials=trials,
        s=s,
        eps0=eps0,
        delta=delta,
        a1=a1,
        a2=a2,
        a=a,
        total_mass=total,
        worst_ratio=worst,
        radius_range=(r_lo, r_hi),
        measure_lower=1.0 / a,
        measure_upper=(1.0 + 2.0 * delta) ** s * d_ref**s,
        failures=tuple(failures),
    )
