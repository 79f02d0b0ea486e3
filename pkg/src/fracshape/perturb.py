"""Perturbed self-similar constructions and finite-depth certificates.

A structure system stores one sampled compact piece per word of a
bounded depth L, nested so that each piece is the union of its
children up to sampling tolerance.  Builders produce the classic
perturbations of the middle-thirds Cantor set, the von Koch curve and
gasket-type systems:

- ``interval``: per-word subintervals replace [0, 1] inside the Cantor
  cylinder maps;
- ``rotation``: each cylinder segment of the plane-embedded Cantor set
  is rotated about a pivot chosen on itself, hierarchically, so every
  rotation drags the whole subtree along;
- ``similitude``: per-word angle/translation/reflection/scale
  deviations composed onto the system's own maps;
- ``branch``: per-node choice between the von Koch middle maps and
  their mirrored variants (coupled flips keep a curve, independent
  flips give a disconnected set).

Pieces are built from leaf cylinders a fixed number of levels below
each stored word, so every piece carries the same resolution relative
to its own size.  A certificate reports, per word, the isometry-quotient
distance to the reference cylinder divided by the cylinder's scale
times the reference radius; the reported value is a verified upper
bound at depth L, never a claim about all depths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.spatial import cKDTree

from fracshape.geometry import PointCloud, diameter, hausdorff, min_enclosing_ball
from fracshape.ifs import DEFAULT_POINT_CAP, IfsSpec, Word, named_system, prefractal
from fracshape.metrics import shape_difference
from fracshape.registration import LIGHT_PARAMS, SearchParams

_MODES = ("interval", "rotation", "similitude", "branch")

__all__ = [
    "PerturbationSchedule",
    "StructureSystem",
    "Certificate",
    "SeparationReport",
    "structure_from_ifs",
    "reference_extent",
    "perturb_interval_cantor",
    "perturb_composed",
    "certify_perturbation",
    "check_separation",
    "structure_consistency",
    "interval_delta0",
    "interval_eps0",
    "rotation_eps0",
]


@dataclass(frozen=True)
class PerturbationSchedule:
    """Seeded per-word perturbation parameters.

    Every per-word draw comes from a generator keyed by (seed, purpose,
    word), so values are reproducible and independent of traversal
    order.  Interval mode obeys a0 <= a_w < b_w <= b0; similitude mode
    bounds the translation deviation by ``lam`` and rotates by at most
    ``theta0``; scale factors other than one are allowed only through
    the explicit finite override list.
    """

    mode: str
    seed: int = 0
    a0: float = 0.0
    b0: float = 1.0
    randomize: bool = False
    theta0: float = 0.0
    r0: float = 0.0
    lam: float = 0.0
    sigma_prob: float = 0.0
    coupled: bool = True
    interval_overrides: tuple = ()
    rho_overrides: tuple = ()

    def __post_init__(self) -> None:
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.mode == "interval":
            if not self.a0 < self.b0:
                raise ValueError("interval mode needs a0 < b0")
            for label, (a, b) in self.interval_overrides:
                if not (self.a0 <= a < b <= self.b0):
                    raise ValueError(
                        f"override for word {label}: need {self.a0} <= {a} < {b} <= {self.b0}"
                    )
        if self.theta0 < 0 or self.r0 < 0 or self.lam < 0:
            raise ValueError("theta0, r0 and lam must be nonnegative")
        if not 0.0 <= self.sigma_prob <= 1.0:
            raise ValueError("sigma_prob must lie in [0, 1]")
        for label, rho in self.rho_overrides:
            if rho <= 0:
                raise ValueError(f"scale override for word {label} must be positive")

    def _rng(self, purpose: int, word: Word) -> np.random.Generator:
        return np.random.default_rng([self.seed, purpose, len(word), *word.indices])

    def interval_for(self, word: Word) -> tuple[float, float]:
        for label, ab in self.interval_overrides:
            if label == word.label:
                return ab
        if not self.randomize:
            return (self.a0, self.b0)
        span = self.b0 - self.a0
        u = self._rng(0, word).uniform(size=2)
        a = self.a0 + 0.8 * span * u[0]
        b = a + 0.2 * span + u[1] * (self.b0 - a - 0.2 * span)
        return (a, b)

    def theta_for(self, word: Word) -> float:
        if not self.randomize:
            return self.theta0
        return float(self._rng(1, word).uniform(-self.theta0, self.theta0))

    def pivot_unit_for(self, word: Word) -> float:
        """Signed pivot offset as a fraction of r0 times the segment length."""
        if not self.randomize:
            return 0.0
        return float(self._rng(2, word).uniform(-1.0, 1.0))

    def translation_for(self, word: Word) -> np.ndarray:
        if self.lam == 0.0 or not self.randomize:
            return np.zeros(2)
        rng = self._rng(3, word)
        ang = rng.uniform(0, 2 * math.pi)
        rad = self.lam * math.sqrt(rng.uniform())
        return np.array([rad * math.cos(ang), rad * math.sin(ang)])

    def sigma_for(self, word: Word) -> bool:
        if self.sigma_prob == 0.0:
            return False
        return bool(self._rng(4, word).random() < self.sigma_prob)

    def rho_for(self, word: Word) -> float:
        for label, rho in self.rho_overrides:
            if label == word.label:
                return float(rho)
        return 1.0

    def hat_choice(self, word: Word) -> bool:
        """Whether the node's expansion uses the mirrored middle maps.
        Coupled schedules draw the coin at the parent, so both middle
        children flip together."""
        at = word.parent() if self.coupled else word
        return bool(self._rng(5, at).random() < 0.5)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "a0": self.a0,
            "b0": self.b0,
            "randomize": self.randomize,
            "theta0": self.theta0,
            "r0": self.r0,
            "lam": self.lam,
            "sigma_prob": self.sigma_prob,
            "coupled": self.coupled,
            "interval_overrides": [[label, list(ab)] for label, ab in self.interval_overrides],
            "rho_overrides": [[label, rho] for label, rho in self.rho_overrides],
        }

    @staticmethod
    def from_dict(data: dict) -> "PerturbationSchedule":
        return PerturbationSchedule(
            mode=data["mode"],
            seed=int(data.get("seed", 0)),
            a0=float(data.get("a0", 0.0)),
            b0=float(data.get("b0", 1.0)),
            randomize=bool(data.get("randomize", False)),
            theta0=float(data.get("theta0", 0.0)),
            r0=float(data.get("r0", 0.0)),
            lam=float(data.get("lam", 0.0)),
            sigma_prob=float(data.get("sigma_prob", 0.0)),
            coupled=bool(data.get("coupled", True)),
            interval_overrides=tuple(
                (label, (float(a), float(b))) for label, (a, b) in data.get("interval_overrides", ())
            ),
            rho_overrides=tuple((label, float(r)) for label, r in data.get("rho_overrides", ())),
        )


def interval_delta0(a0: float, b0: float) -> float:
    """Guaranteed perturbation level for interval-mode Cantor systems."""
    return max(abs(b0 - a0 - 1.0), 1.0)


def interval_eps0(b0: float) -> float:
    """Separation constant for interval schedules with a_w = 0; needs
    b0 < 2 so neighbouring images keep a gap."""
    if not b0 < 2.0:
        raise ValueError("separation constant needs b0 < 2")
    return min(2.0 / 3.0 - b0 / 3.0, 2.0 / 9.0)


def rotation_eps0(r0: float) -> float:
    """Separation constant for pivot-rotated Cantor systems with pivot
    radius factor r0 < 1/6 and angles up to a quarter turn."""
    if not 0.0 <= r0 < 1.0 / 6.0:
        raise ValueError("separation constant needs r0 < 1/6")
    return min((1.0 - 6.0 * r0) / 3.0, 1.0 / 12.0)


@dataclass(frozen=True)
class StructureSystem:
    """Sampled word-indexed decomposition of a compact set.

    ``pieces`` maps every word of length at most ``depth`` to a point
    cloud built from leaf cylinders ``extra`` levels further down.
    ``tails`` holds the measured Hausdorff gaps between consecutive
    whole-set leaf slices, the finite-depth stand-in for the geometric
    convergence of the construction.
    """

    m: int
    depth: int
    extra: int
    dim: int
    pieces: Mapping[Word, PointCloud] = field(repr=False)
    ifss: IfsSpec | None = None
    schedule: PerturbationSchedule | None = None
    tails: tuple[float, ...] = ()

    def piece(self, word: Word) -> PointCloud:
        try:
            return self.pieces[word]
        except KeyError:
            raise KeyError(f"word {word.label} not stored (depth {self.depth})") from None

    def words_at(self, k: int) -> list[Word]:
        if not 0 <= k <= self.depth:
            raise ValueError(f"level {k} outside 0..{self.depth}")
        return [w for w in self.pieces if len(w) == k]

    @property
    def root_piece(self) -> PointCloud:
        return self.pieces[Word.root()]

    def summary_dict(self) -> dict:
        return {
            "arity": self.m,
            "depth": self.depth,
            "extra": self.extra,
            "dim": self.dim,
            "piece_counts": {w.label: p.n for w, p in sorted(self.pieces.items(), key=lambda kv: (len(kv[0]), kv[0].indices))},
            "tails": list(self.tails),
            "schedule": self.schedule.to_dict() if self.schedule else None,
            "system": self.ifss.name if self.ifss else None,
        }


def _compose(o1, t1, r1, o2, t2, r2):
    return o1 @ o2, r1 * (o1 @ t2) + t1, r1 * r2


def _apply(o, t, r, pts):
    return r * (pts @ o.T) + t


def _rot_about(theta: float, pivot: np.ndarray):
    c, s = math.cos(theta), math.sin(theta)
    o = np.array([[c, -s], [s, c]])
    return o, pivot - o @ pivot, 1.0


def _check_budget(m: int, depth: int, extra: int, n_base: int, max_points: int) -> None:
    total = sum(m ** (k + extra) * n_base for k in range(depth + 1))
    if total > max_points:
        raise MemoryError(
            f"system would store about {total} points, over the cap of {max_points}"
        )


def _assemble(
    ifss: IfsSpec,
    schedule: PerturbationSchedule | None,
    depth: int,
    extra: int,
    child_state,
    leaf_points,
    eta_for_level,
) -> StructureSystem:
    """Shared depth-first construction.  ``child_state`` maps the parent
    carry to the child's, ``leaf_points`` materializes a node's sample;
    a node at depth d feeds the stored word d - extra levels up."""
    m = ifss.m
    buckets: dict[Word, list[np.ndarray]] = {}

    def rec(word: Word, carry) -> None:
        d = len(word)
        if d >= extra:
            owner = word.prefix(d - extra)
            buckets.setdefault(owner, []).append(leaf_points(word, carry))
        if d < depth + extra:
            for i in range(1, m + 1):
                child = word.extend(i, m)
                rec(child, child_state(child, carry))

    # the None carry stands for the identity placement; closures expand it
    rec(Word.root(), None)
    pieces: dict[Word, PointCloud] = {}
    for w, chunks in buckets.items():
        pts = np.unique(np.vstack(chunks), axis=0)
        pieces[w] = PointCloud(pts, eta=eta_for_level(len(w)))

    slices = []
    for k in range(depth + 1):
        level = [pieces[w].points for w in pieces if len(w) == k]
        slices.append(np.unique(np.vstack(level), axis=0))
    tails = tuple(hausdorff(slices[j], slices[j + 1]) for j in range(depth))

    return StructureSystem(
        m=m,
        depth=depth,
        extra=extra,
        dim=ifss.dim,
        pieces=pieces,
        ifss=ifss,
        schedule=schedule,
        tails=tails,
    )


def _check_tail_decay(system: StructureSystem, eta_floor: float) -> None:
    # successive slice gaps must shrink roughly geometrically; ratios
    # are only meaningful above the sampling floor
    c = system.ifss.c_max if system.ifss else 0.5
    tails = system.tails
    for j in range(len(tails) - 1):
        if tails[j] > 8 * eta_floor and tails[j + 1] > 8 * eta_floor:
            if tails[j + 1] > tails[j] * (c + 0.45):
                raise RuntimeError(
                    f"tail bound not met: slice gaps {tails[j]:.3g} -> {tails[j + 1]:.3g}"
                )


def structure_from_ifs(
    ifss: IfsSpec,
    depth: int,
    extra: int = 4,
    leaf_spacing: float = 0.25,
    max_points: int = DEFAULT_POINT_CAP,
) -> StructureSystem:
    """Unperturbed structure system: every piece is an exact sampled
    prefractal cylinder of the given system."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    base = ifss.base_points(leaf_spacing)
    _check_budget(ifss.m, depth, extra, base.n, max_points)
    base_pts = base.points
    identity = (np.eye(ifss.dim), np.zeros(ifss.dim), 1.0)

    def child_state(word: Word, carry):
        if carry is None:
            carry = identity
        t = ifss.maps[word.indices[-1] - 1]
        return _compose(*carry, t.ortho, t.translation, t.ratio)

    def leaf_points(word: Word, carry):
        if carry is None:
            carry = identity
        return _apply(*carry, base_pts)

    def eta_for_level(k: int) -> float:
        return base.eta * ifss.c_max ** (k + extra)

    return _assemble(ifss, None, depth, extra, child_state, leaf_points, eta_for_level)


def perturb_interval_cantor(
    schedule: PerturbationSchedule,
    depth: int,
    extra: int = 4,
    leaf_samples: int = 5,
    max_points: int = DEFAULT_POINT_CAP,
) -> StructureSystem:
    """Cantor system whose word-w cylinder map is applied to the
    subinterval [a_w, b_w] instead of [0, 1]."""
    if schedule.mode != "interval":
        raise ValueError("schedule mode must be 'interval'")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if leaf_samples < 2:
        raise ValueError("need at least 2 samples per leaf")
    ifss = named_system("cantor")
    _check_budget(ifss.m, depth, extra, leaf_samples, max_points)

    eye = np.eye(1)

    def child_state(word: Word, carry):
        if carry is None:
            carry = (eye, np.zeros(1), 1.0)
        t = ifss.maps[word.indices[-1] - 1]
        return _compose(*carry, t.ortho, t.translation, t.ratio)

    def leaf_points(word: Word, carry):
        if carry is None:
            carry = (eye, np.zeros(1), 1.0)
        a, b = schedule.interval_for(word)
        xs = np.linspace(a, b, leaf_samples).reshape(-1, 1)
        return _apply(*carry, xs)

    span = schedule.b0 - schedule.a0

    def eta_for_level(k: int) -> float:
        return span * 3.0 ** -(k + extra) / (2 * (leaf_samples - 1))

    system = _assemble(ifss, schedule, depth, extra, child_state, leaf_points, eta_for_level)
    _check_tail_decay(system, eta_for_level(0))
    return system


def perturb_composed(
    ifss: IfsSpec,
    schedule: PerturbationSchedule,
    depth: int,
    extra: int = 4,
    leaf_spacing: float = 0.25,
    max_points: int = DEFAULT_POINT_CAP,
) -> StructureSystem:
    """Structure system from per-word perturbed compositions.

    ``rotation`` hierarchically rotates plane-embedded Cantor segments
    about pivots on themselves; ``similitude`` composes per-word
    angle/translation/reflection/scale deviations onto the system's own
    maps; ``branch`` picks per node between the von Koch middle maps
    and their mirrored variants.  With all deviations zero the pieces
    are exact prefractal cylinders.
    """
    if schedule.mode not in ("rotation", "similitude", "branch"):
        raise ValueError("perturb_composed handles rotation, similitude and branch modes")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if ifss.dim != 2:
        raise ValueError("composed perturbations live in the plane")
    base = ifss.base_points(leaf_spacing)
    _check_budget(ifss.m, depth, extra, base.n, max_points)
    base_pts = base.points
    identity = (np.eye(2), np.zeros(2), 1.0)

    if schedule.mode == "rotation":
        if ifss.m != 2 or ifss.base_vertices.shape[0] != 2:
            raise ValueError("rotation mode expects the plane-embedded Cantor system")
        seg_ends = ifss.base_vertices

        def child_state(word: Word, carry):
            if carry is None:
                carry = identity
            t = ifss.maps[word.indices[-1] - 1]
            o, tr, r = _compose(*carry, t.ortho, t.translation, t.ratio)
            ends = _apply(o, tr, r, seg_ends)
            center = 0.5 * (ends[0] + ends[1])
            seg_len = float(np.linalg.norm(ends[1] - ends[0]))
            direction = (ends[1] - ends[0]) / seg_len if seg_len > 0 else np.zeros(2)
            pivot = center + schedule.pivot_unit_for(word) * schedule.r0 * seg_len * direction
            theta = schedule.theta_for(word)
            return _compose(*_rot_about(theta, pivot), o, tr, r)

    elif schedule.mode == "branch":
        if ifss.name != "koch":
            raise ValueError("branch mode perturbs the koch system")
        hat = named_system("koch_hat")

        def child_state(word: Word, carry):
            if carry is None:
                carry = identity
            i = word.indices[-1]
            t = ifss.maps[i - 1]
            if i in (2, 3) and schedule.hat_choice(word):
                t = hat.maps[i - 1]
            return _compose(*carry, t.ortho, t.translation, t.ratio)

    else:

        def child_state(word: Word, carry):
            if carry is None:
                carry = identity
            t = ifss.maps[word.indices[-1] - 1]
            rho = schedule.rho_for(word)
            if t.ratio * rho >= 1.0:
                raise ValueError(f"scale override at word {word.label} breaks contraction")
            o = t.ortho
            dtheta = schedule.theta_for(word)
            if dtheta:
                c, s = math.cos(dtheta), math.sin(dtheta)
                o = np.array([[c, -s], [s, c]]) @ o
            if schedule.sigma_for(word):
                o = o @ np.diag([1.0, -1.0])
            tr = t.translation + schedule.translation_for(word)
            return _compose(*carry, o, tr, t.ratio * rho)

    def leaf_points(word: Word, carry):
        if carry is None:
            carry = identity
        return _apply(*carry, base_pts)

    rho_max = max((rho for _, rho in schedule.rho_overrides), default=1.0)
    c_eff = min(ifss.c_max * max(rho_max, 1.0), 0.999)

    def eta_for_level(k: int) -> float:
        return base.eta * c_eff ** (k + extra)

    system = _assemble(ifss, schedule, depth, extra, child_state, leaf_points, eta_for_level)
    _check_tail_decay(system, eta_for_level(0))
    return system


# ---------------------------------------------------------------------------
# certificates


@dataclass(frozen=True)
class Certificate:
    """Per-word normalized deviations from the reference cylinders.

    ``delta_hat`` is the maximum over all words of length at most
    ``depth`` of upper(htilde(F_w, E_w)) / (c_w * r(E)); the companion
    value divides by the reference diameter instead.  Both are verified
    upper bounds at this depth only.
    """

    depth: int
    delta_hat: float
    delta_hat_diameter: float
    per_word: tuple[tuple[str, float, float], ...]
    radius_ref: float
    diameter_ref: float
    search_tol: float
    eta: float
    evals: int

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "delta_hat": self.delta_hat,
            "delta_hat_diameter": self.delta_hat_diameter,
            "per_word": [[label, dr, dd] for label, dr, dd in self.per_word],
            "radius_ref": self.radius_ref,
            "diameter_ref": self.diameter_ref,
            "search_tol": self.search_tol,
            "eta": self.eta,
            "evals": self.evals,
            "note": "upper bounds at finite depth; deeper words are not certified",
        }


def reference_extent(ifss: IfsSpec) -> tuple[float, float, PointCloud]:
    """Radius and diameter of the attractor from a deep skeleton-vertex
    sample, whose points all lie on the attractor for the built-ins."""
    d = 0
    while ifss.c_max ** (d + 1) > 2e-3 and ifss.m ** (d + 1) * ifss.base_vertices.shape[0] <= 400_000:
        d += 1
    deep = prefractal(ifss, PointCloud(ifss.base_vertices), d)
    return min_enclosing_ball(deep).radius, diameter(deep), deep


def certify_perturbation(
    system: StructureSystem,
    depth: int | None = None,
    params: SearchParams | None = None,
) -> Certificate:
    """Certify the quasi-self-similarity inequality at finite depth.

    For every stored word w up to ``depth``, measures an upper bound on
    the isometry-quotient distance between the piece and the reference
    cylinder S_w(E), normalized by c_w times the reference radius (and,
    for the companion value, the reference diameter).
    """
    ifss = system.ifss
    if ifss is None:
        raise ValueError("certification needs a reference system")
    if depth is None:
        depth = system.depth
    if depth > system.depth:
        raise ValueError(f"system stores words to depth {system.depth}, asked for {depth}")
    params = params or LIGHT_PARAMS

    r_ref, d_ref, _ = reference_extent(ifss)
    sample = prefractal(ifss, ifss.base_points(_leaf_spacing_of(system)), system.extra)

    rows = []
    worst_r = 0.0
    worst_d = 0.0
    evals = 0
    tol_rel = 0.0
    for k in range(depth + 1):
        for w in sorted(system.words_at(k), key=lambda w: w.indices):
            t = ifss.word_transform(w)
            e_piece = t.apply(sample.points)
            c_w = ifss.word_ratio(w)
            rep = shape_difference(system.piece(w).points, e_piece, "isometry", params)
            dr = rep.upper / (c_w * r_ref)
            dd = rep.upper / (c_w * d_ref)
            rows.append((w.label, dr, dd))
            worst_r = max(worst_r, dr)
            worst_d = max(worst_d, dd)
            evals += rep.evals
            tol_rel = max(tol_rel, rep.search_tol / (c_w * r_ref))

    return Certificate(
        depth=depth,
        delta_hat=worst_r,
        delta_hat_diameter=worst_d,
        per_word=tuple(rows),
        radius_ref=r_ref,
        diameter_ref=d_ref,
        search_tol=tol_rel,
        eta=system.root_piece.eta,
        evals=evals,
    )


def _leaf_spacing_of(system: StructureSystem) -> float:
    # recover the base sampling step from the root piece's resolution tag
    c = system.ifss.c_max if system.ifss else 0.5
    return max(2.0 * system.root_piece.eta / c**system.extra, 1e-9)


@dataclass(frozen=True)
class SeparationReport:
    passed: bool
    eps0: float
    depth: int
    pairs_checked: int
    worst_margin: float
    worst_pair: tuple[str, str]
    worst_distance: float
    worst_required: float

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "eps0": self.eps0,
            "depth": self.depth,
            "pairs_checked": self.pairs_checked,
            "worst_margin": self.worst_margin,
            "worst_pair": list(self.worst_pair),
            "worst_distance": self.worst_distance,
            "worst_required": self.worst_required,
        }


def check_separation(system: StructureSystem, eps0: float, depth: int | None = None) -> SeparationReport:
    """Verify d(F_i, F_j) >= eps0 * c_w over divergent word pairs.

    Only sibling pairs (children of a common word w) are measured:
    every divergent pair nests inside some sibling pair at its branch
    point, and pieces are unions of their descendants, so the sibling
    bound implies the general one.
    """
    if eps0 <= 0:
        raise ValueError("eps0 must be positive")
    ifss = system.ifss
    if ifss is None:
        raise ValueError("separation check needs the reference ratios")
    if depth is None:
        depth = system.depth
    if not 1 <= depth <= system.depth:
        raise ValueError(f"depth must lie in 1..{system.depth}")

    worst = (math.inf, ("", ""), 0.0, 0.0)
    pairs = 0
    for k in range(depth):
        for w in sorted(system.words_at(k), key=lambda w: w.indices):
            required = eps0 * ifss.word_ratio(w)
            kids = [w.extend(i, system.m) for i in range(1, system.m + 1)]
            clouds = [system.piece(c) for c in kids]
            trees = [cKDTree(c.points) for c in clouds]
            for a in range(len(kids)):
                for b in range(a + 1, len(kids)):
                    gap = float(trees[b].query(clouds[a].points, k=1)[0].min())
                    pairs += 1
                    margin = gap / required
                    if margin < worst[0]:
                        worst = (margin, (kids[a].label, kids[b].label), gap, required)

    return SeparationReport(
        passed=worst[0] >= 1.0,
        eps0=eps0,
        depth=depth,
        pairs_checked=pairs,
        worst_margin=worst[0],
        worst_pair=worst[1],
        worst_distance=worst[2],
        worst_required=worst[3],
    )


def structure_consistency(system: StructureSystem) -> float:
    """Largest Hausdorff gap between a stored piece and the union of its
    stored children; bounded by sampling tolerance for a faithful build."""
    worst = 0.0
    for k in range(system.depth):
        for w in system.words_at(k):
            kids = np.vstack([system.piece(w.extend(i, system.m)).points for i in range(1, system.m + 1)])
            worst = max(worst, hausdorff(system.piece(w).points, kids))
    return worst
