"""Piece-comparison grids, approximate-self-similarity deviations, greedy
pattern covers, and family similarity indices.

All comparisons use the size-normalized isometry-quotient distance, so a
piece and a rescaled isometric copy of it are at distance zero.  Cover
sizes are greedy upper bounds on the minimal pattern counts, and every
quantity is certified only to the stored depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import PointCloud, diameter
from .ifs import Word
from .metrics import MetricVariant, shape_difference
from .perturb import StructureSystem
from .registration import LIGHT_PARAMS, SearchParams

__all__ = [
    "ApproxReport",
    "PieceGram",
    "SplineReport",
    "check_spline",
    "classify_approx",
    "finite_structure_diagnostic",
    "gram_csv",
    "piece_gram",
    "similarity_index",
    "spline_cover",
    "spline_svg",
]

HAT_VARIANT = MetricVariant("isometry", "radius")


@dataclass(frozen=True)
class PieceGram:
    """Pairwise normalized shape differences among stored pieces.

    ``lowers`` and ``uppers`` are symmetric with zero diagonal; entry
    (i, j) is a certified interval around the distance between pieces
    ``words[i]`` and ``words[j]``.  ``coarse`` marks grams whose entries
    were computed under a reduced search budget.
    """

    words: tuple[Word, ...]
    pieces: tuple[PointCloud, ...]
    lowers: np.ndarray
    uppers: np.ndarray
    variant: MetricVariant
    depth: int
    search_tol: float
    coarse: bool = False

    def __post_init__(self):
        n = len(self.words)
        if len(self.pieces) != n:
            raise ValueError("words and pieces must align")
        for name in ("lowers", "uppers"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.shape != (n, n):
                raise ValueError(f"{name} must be {n}x{n}")
            if np.any(np.abs(np.diagonal(m)) > 0.0):
                raise ValueError(f"{name} must have a zero diagonal")
            if not np.array_equal(m, m.T):
                raise ValueError(f"{name} must be symmetric")
            object.__setattr__(self, name, m)
        if np.any(self.lowers > self.uppers):
            raise ValueError("lower bounds must not exceed upper bounds")

    def index_of(self, word: Word) -> int:
        try:
            return self.words.index(word)
        except ValueError:
            raise KeyError(f"word {word.label} not in gram") from None

    def entry(self, a: Word, b: Word) -> tuple[float, float]:
        i, j = self.index_of(a), self.index_of(b)
        return float(self.lowers[i, j]), float(self.uppers[i, j])


@dataclass(frozen=True)
class ApproxReport:
    """Deviation maxima for the three approximate-self-similarity senses,
    certified to the stored depth only."""

    plain: float
    level_by_level: float
    uniform: float
    depth: int
    variant_name: str

    def to_dict(self) -> dict:
        return {
            "plain": self.plain,
            "level_by_level": self.level_by_level,
            "uniform": self.uniform,
            "depth": self.depth,
            "variant": self.variant_name,
            "note": f"maxima over stored words, verified to depth {self.depth}",
        }


@dataclass(frozen=True)
class SplineReport:
    """A set of representative patterns covering pieces at or below some
    level, with the assignment and the worst certified distance."""

    level: int
    delta: float
    representatives: tuple[PointCloud, ...]
    rep_labels: tuple[str, ...]
    assignment: tuple[tuple[str, int], ...]
    achieved: float
    passed: bool
    verified_to_depth: int
    unassigned: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "delta": self.delta,
            "count": len(self.representatives),
            "rep_labels": list(self.rep_labels),
            "rep_sizes": [p.n for p in self.representatives],
            "assignment": {label: idx for label, idx in self.assignment},
            "achieved": self.achieved,
            "passed": self.passed,
            "unassigned": list(self.unassigned),
            "note": f"greedy cover verified to depth {self.verified_to_depth}",
        }


def _gram_params(n_entries: int, budget: int | None, params: SearchParams | None):
    if params is not None:
        return params, False
    if budget is None:
        return LIGHT_PARAMS, False
    per_entry = budget // max(n_entries, 1)
    if per_entry >= LIGHT_PARAMS.budget:
        return LIGHT_PARAMS, False
    scale = max(per_entry, 400) / LIGHT_PARAMS.budget
    reduced = SearchParams(
        budget=max(per_entry, 400),
        coarse_angles=max(int(LIGHT_PARAMS.coarse_angles * scale), 24),
        coarse_rotations=max(int(LIGHT_PARAMS.coarse_rotations * scale), 40),
        subsample=max(int(LIGHT_PARAMS.subsample * scale), 96),
        refine_cap=max(int(LIGHT_PARAMS.refine_cap * scale), 150),
        top_k=2,
        icp_iters=max(int(LIGHT_PARAMS.icp_iters * scale), 6),
    )
    return reduced, True


def piece_gram(
    system: StructureSystem,
    depth: int | None = None,
    variant: MetricVariant = HAT_VARIANT,
    budget: int | None = None,
    params: SearchParams | None = None,
) -> PieceGram:
    """Pairwise distances among all stored pieces down to ``depth``.

    ``budget`` caps the total search effort; when it is too small for
    the default per-entry effort the gram is computed under a reduced
    search and flagged coarse rather than left incomplete.
    """
    if depth is None:
        depth = system.depth
    if depth > system.depth:
        raise ValueError(f"system stores words to depth {system.depth}, asked for {depth}")
    words = []
    for k in range(depth + 1):
        words.extend(sorted(system.words_at(k), key=lambda w: w.indices))
    pieces = tuple(system.piece(w) for w in words)
    n = len(words)
    entry_params, coarse = _gram_params(n * (n - 1) // 2, budget, params)

    lowers = np.zeros((n, n))
    uppers = np.zeros((n, n))
    search_tol = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            rep = shape_difference(pieces[i], pieces[j], variant, entry_params)
            lowers[i, j] = lowers[j, i] = rep.lower
            uppers[i, j] = uppers[j, i] = rep.upper
            search_tol = max(search_tol, rep.search_tol)
    return PieceGram(
        words=tuple(words),
        pieces=pieces,
        lowers=lowers,
        uppers=uppers,
        variant=variant,
        depth=depth,
        search_tol=search_tol,
        coarse=coarse,
    )


def classify_approx(gram: PieceGram) -> ApproxReport:
    """Deviation maxima in the three approximation senses.

    plain: every piece against the root.  level_by_level: every child
    against its parent.  uniform: every descendant against every
    ancestor.  Each maximum uses the gram's certified upper bounds, so
    the three values are themselves upper bounds at the gram's depth.
    """
    idx = {w: i for i, w in enumerate(gram.words)}
    root = next(w for w in gram.words if len(w) == 0)
    plain = 0.0
    level = 0.0
    uniform = 0.0
    for w in gram.words:
        if len(w) == 0:
            continue
        plain = max(plain, gram.uppers[idx[root], idx[w]])
        level = max(level, gram.uppers[idx[w.parent()], idx[w]])
        anc = w.parent()
        while True:
            uniform = max(uniform, gram.uppers[idx[anc], idx[w]])
            if len(anc) == 0:
                break
            anc = anc.parent()
    return ApproxReport(
        plain=float(plain),
        level_by_level=float(level),
        uniform=float(uniform),
        depth=gram.depth,
        variant_name=gram.variant.name,
    )


def _greedy_cover(uppers: np.ndarray, pool: list[int], delta: float):
    """Farthest-first representative selection from ``pool`` until every
    pool member is within ``delta`` of some representative.

    Upper bounds drive both the cover test and the selection, so the
    result is a certified cover whose size bounds the minimum from
    above.  Returns representative indices and per-member assignments.
    """
    reps: list[int] = [pool[0]]
    while True:
        nearest = np.min(uppers[np.ix_(pool, reps)], axis=1)
        worst = int(np.argmax(nearest))
        if nearest[worst] <= delta:
            break
        reps.append(pool[worst])
    nearest_rep = np.argmin(uppers[np.ix_(pool, reps)], axis=1)
    assignment = {p: int(r) for p, r in zip(pool, nearest_rep)}
    return reps, assignment


def spline_cover(
    gram: PieceGram, delta: float, level: int = 0, lam: float | None = None
) -> SplineReport:
    """Greedy representative cover of the pieces at words of length at
    least ``level``, within ``delta`` under the gram's certified upper
    bounds.  The representative count is an upper bound on the minimal
    pattern count for this structure system.

    ``lam`` restricts the covered pool to pieces whose diameter is at
    most lam times the root diameter before covering.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if level > gram.depth:
        raise ValueError(f"gram covers depth {gram.depth}, asked for level {level}")
    pool = [i for i, w in enumerate(gram.words) if len(w) >= level]
    if lam is not None:
        root = next(i for i, w in enumerate(gram.words) if len(w) == 0)
        cap = lam * diameter(gram.pieces[root])
        pool = [i for i in pool if diameter(gram.pieces[i]) <= cap]
    if not pool:
        raise ValueError("no pieces satisfy the level and degree filters")
    reps, assignment = _greedy_cover(gram.uppers, pool, delta)
    achieved = max(gram.uppers[i, reps[assignment[i]]] for i in pool)
    return SplineReport(
        level=level,
        delta=delta,
        representatives=tuple(gram.pieces[i] for i in reps),
        rep_labels=tuple(gram.words[i].label for i in reps),
        assignment=tuple((gram.words[i].label, assignment[i]) for i in pool),
        achieved=float(achieved),
        passed=True,
        verified_to_depth=gram.depth,
    )


def check_spline(
    system: StructureSystem,
    candidates,
    delta: float,
    level: int = 0,
    variant: MetricVariant = HAT_VARIANT,
    params: SearchParams | None = None,
) -> SplineReport:
    """Check whether the given patterns form a cover of the stored
    pieces at words of length at least ``level`` within ``delta``.

    Every piece is assigned its nearest candidate by certified upper
    bound; pieces farther than ``delta`` from all candidates are listed
    as unassigned and fail the check.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    candidates = [c if isinstance(c, PointCloud) else PointCloud(c) for c in candidates]
    if not candidates:
        raise ValueError("need at least one candidate pattern")
    params = params or LIGHT_PARAMS
    assignment = []
    unassigned = []
    achieved = 0.0
    for k in range(level, system.depth + 1):
        for w in sorted(system.words_at(k), key=lambda w: w.indices):
            piece = system.piece(w)
            best = None
            best_idx = 0
            for idx, cand in enumerate(candidates):
                rep = shape_difference(piece, cand, variant, params)
                if best is None or rep.upper < best:
                    best = rep.upper
                    best_idx = idx
            assignment.append((w.label, best_idx))
            achieved = max(achieved, best)
            if best > delta:
                unassigned.append(w.label)
    return SplineReport(
        level=level,
        delta=delta,
        representatives=tuple(candidates),
        rep_labels=tuple(f"candidate-{i}" for i in range(len(candidates))),
        assignment=tuple(assignment),
        achieved=float(achieved),
        passed=not unassigned,
        verified_to_depth=system.depth,
        unassigned=tuple(unassigned),
    )


@dataclass(frozen=True)
class SimilarityIndex:
    """Greedy joint-cover size, common-representative count, and their
    ratio for a family of structure systems."""

    p_k: int
    q_k: int
    gamma_k: float
    level: int
    delta: float
    rep_families: tuple[tuple[int, ...], ...]

    def to_dict(self) -> dict:
        return {
            "p_k": self.p_k,
            "q_k": self.q_k,
            "gamma_k": self.gamma_k,
            "level": self.level,
            "delta": self.delta,
            "rep_families": [list(f) for f in self.rep_families],
        }


def similarity_index(
    families,
    delta: float,
    level: int = 0,
    variant: MetricVariant = HAT_VARIANT,
    params: SearchParams | None = None,
) -> SimilarityIndex:
    """Joint greedy cover over every family's pieces, counting the
    representatives that serve all families.

    p_k is the joint cover size, q_k the number of representatives
    within ``delta`` of at least one piece of every family, and
    gamma_k = q_k / p_k their ratio in [0, 1].
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    families = list(families)
    if not families:
        raise ValueError("need at least one family")
    params = params or LIGHT_PARAMS

    pieces = []
    tags = []
    for fam_idx, system in enumerate(families):
        for k in range(level, system.depth + 1):
            for w in sorted(system.words_at(k), key=lambda w: w.indices):
                pieces.append(system.piece(w))
                tags.append(fam_idx)
    if not pieces:
        raise ValueError("no pieces at or below the requested level")

    n = len(pieces)
    uppers = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            rep = shape_difference(pieces[i], pieces[j], variant, params)
            uppers[i, j] = uppers[j, i] = rep.upper

    reps, _ = _greedy_cover(uppers, list(range(n)), delta)
    tags_arr = np.asarray(tags)
    all_families = set(range(len(families)))
    rep_families = []
    q = 0
    for r in reps:
        served = {int(f) for f in np.unique(tags_arr[uppers[r] <= delta])}
        served.add(int(tags_arr[r]))
        rep_families.append(tuple(sorted(served)))
        if served == all_families:
            q += 1
    p = len(reps)
    return SimilarityIndex(
        p_k=p,
        q_k=q,
        gamma_k=q / p,
        level=level,
        delta=delta,
        rep_families=tuple(rep_families),
    )


def finite_structure_diagnostic(gram: PieceGram, delta: float) -> dict:
    """Per-level greedy cover sizes and assignment distances.

    A bounded cover-size sequence with assignment distances trending to
    zero is evidence (not proof) that the pieces approach finitely many
    patterns; emitted as data for the caller to judge.
    """
    levels = []
    sizes = []
    worst = []
    for k in range(gram.depth + 1):
        pool = [i for i, w in enumerate(gram.words) if len(w) == k]
        reps, assignment = _greedy_cover(gram.uppers, pool, delta)
        levels.append(k)
        sizes.append(len(reps))
        worst.append(float(max(gram.uppers[i, reps[assignment[i]]] for i in pool)))
    return {
        "delta": delta,
        "levels": levels,
        "cover_sizes": sizes,
        "max_assigned": worst,
    }


def gram_csv(gram: PieceGram, which: str = "upper") -> str:
    """Render the gram as a CSV matrix of upper or lower bounds."""
    if which not in ("upper", "lower"):
        raise ValueError("which must be 'upper' or 'lower'")
    m = gram.uppers if which == "upper" else gram.lowers
    labels = [w.label for w in gram.words]
    lines = ["word," + ",".join(labels)]
    for label, row in zip(labels, m):
        lines.append(label + "," + ",".join(f"{v:.6g}" for v in row))
    return "\n".join(lines) + "\n"


def spline_svg(report: SplineReport, size: int = 120) -> str:
    """Side-by-side scatter gallery of the representative patterns."""
    pad = 8
    width = len(report.representatives) * (size + pad) + pad
    height = size + 2 * pad + 16
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for idx, cloud in enumerate(report.representatives):
        x0 = pad + idx * (size + pad)
        pts = cloud.points
        if pts.shape[1] == 1:
            pts = np.column_stack([pts[:, 0], np.zeros(pts.shape[0])])
        lo = pts.min(axis=0)
        span = float(max(np.max(pts.max(axis=0) - lo), 1e-12))
        scaled = (pts - lo) / span * (size - 10) + 5
        parts.append(
            f'<rect x="{x0}" y="{pad}" width="{size}" height="{size}" '
            f'fill="none" stroke="#999"/>'
        )
        step = max(1, pts.shape[0] // 400)
        for px, py in scaled[::step]:
            parts.append(
                f'<circle cx="{x0 + px:.1f}" cy="{pad + size - py:.1f}" '
                f'r="1" fill="#226"/>'
            )
        parts.append(
            f'<text x="{x0 + size // 2}" y="{height - 4}" text-anchor="middle" '
            f'font-size="10">{report.rep_labels[idx]}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
