import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fracshape.atlas import (
    PieceGram,
    check_spline,
    classify_approx,
    finite_structure_diagnostic,
    gram_csv,
    piece_gram,
    similarity_index,
    spline_cover,
    spline_svg,
)
from fracshape.geometry import PointCloud
from fracshape.ifs import Word, named_system, prefractal
from fracshape.metrics import MetricVariant
from fracshape.perturb import (
    PerturbationSchedule,
    StructureSystem,
    certify_perturbation,
    perturb_composed,
    perturb_interval_cantor,
    structure_from_ifs,
)
from fracshape.registration import SearchParams

TINY = SearchParams(
    budget=1500,
    coarse_angles=36,
    coarse_rotations=80,
    subsample=128,
    refine_cap=300,
    top_k=2,
    icp_iters=8,
)


@pytest.fixture(scope="module")
def cantor_gram():
    system = structure_from_ifs(named_system("cantor"), 2)
    return piece_gram(system, params=TINY)


def two_shape_stub():
    # Children with different shapes: a segment has normalized diameter
    # 2 while triangle vertices have sqrt(3), so the diameter gap forces
    # a positive certified lower bound.
    t = np.linspace(0.0, 1.0, 60)[:, None]
    segment = np.hstack([t, np.zeros_like(t)])
    tri = np.array(
        [[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3.0) / 2],
         [0.5, 0.0], [0.25, np.sqrt(3.0) / 4], [0.75, np.sqrt(3.0) / 4]]
    )
    root = Word.root()
    w1, w2 = Word.uniform((1,), 2), Word.uniform((2,), 2)
    pieces = {
        root: PointCloud(np.vstack([segment, tri + [2.0, 0.0]])),
        w1: PointCloud(segment),
        w2: PointCloud(tri),
    }
    return StructureSystem(m=2, depth=1, extra=0, dim=2, pieces=pieces)


class TestPieceGram:
    def test_exact_pieces_all_near_zero(self, cantor_gram):
        off = cantor_gram.uppers[~np.eye(len(cantor_gram.words), dtype=bool)]
        assert off.max() <= 1e-6

    def test_gram_shape_and_words(self, cantor_gram):
        assert len(cantor_gram.words) == 7
        assert sorted(len(w) for w in cantor_gram.words) == [0, 1, 1, 2, 2, 2, 2]
        assert cantor_gram.depth == 2
        assert not cantor_gram.coarse

    def test_entry_accessor(self, cantor_gram):
        root = Word.root()
        child = Word.uniform((1,), 2)
        lo, up = cantor_gram.entry(root, child)
        assert lo <= up
        with pytest.raises(KeyError, match="not in gram"):
            cantor_gram.entry(root, Word.uniform((1, 1, 1), 2))

    def test_distinct_shapes_positive_lower(self):
        gram = piece_gram(two_shape_stub(), params=TINY)
        w1, w2 = Word.uniform((1,), 2), Word.uniform((2,), 2)
        lo, up = gram.entry(w1, w2)
        assert lo > 0.05
        assert up >= lo

    def test_budget_flags_coarse(self):
        system = structure_from_ifs(named_system("cantor"), 1)
        gram = piece_gram(system, budget=900)
        assert gram.coarse

    def test_depth_beyond_stored_rejected(self):
        system = structure_from_ifs(named_system("cantor"), 1)
        with pytest.raises(ValueError, match="depth"):
            piece_gram(system, depth=3)

    def test_isometric_copy_invariance(self):
        # The gram is built from quotient distances, so rigidly moving
        # one child must not change its entries beyond search slack.
        base = structure_from_ifs(named_system("cantor2"), 1)
        moved_pieces = dict(base.pieces)
        w = Word.uniform((2,), 2)
        theta = 0.7
        rot = np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        )
        moved_pieces[w] = PointCloud(moved_pieces[w].points @ rot.T + [3.0, -1.0])
        moved = StructureSystem(
            m=2, depth=1, extra=base.extra, dim=2, pieces=moved_pieces
        )
        g0 = piece_gram(base, params=TINY)
        g1 = piece_gram(moved, params=TINY)
        w1 = Word.uniform((1,), 2)
        assert abs(g0.entry(w1, w)[1] - g1.entry(w1, w)[1]) <= 0.02


class TestGramValidation:
    def make(self, lowers, uppers):
        words = (Word.root(), Word.uniform((1,), 2))
        pieces = tuple(PointCloud(np.zeros((2, 1))) for _ in words)
        return PieceGram(
            words=words,
            pieces=pieces,
            lowers=np.asarray(lowers, dtype=float),
            uppers=np.asarray(uppers, dtype=float),
            variant=MetricVariant("isometry", "radius"),
            depth=1,
            search_tol=0.0,
        )

    def test_rejects_nonzero_diagonal(self):
        with pytest.raises(ValueError, match="diagonal"):
            self.make([[0.1, 0.0], [0.0, 0.0]], [[0.1, 0.0], [0.0, 0.0]])

    def test_rejects_asymmetry(self):
        with pytest.raises(ValueError, match="symmetric"):
            self.make([[0.0, 0.1], [0.2, 0.0]], [[0.0, 0.3], [0.3, 0.0]])

    def test_rejects_crossed_bounds(self):
        with pytest.raises(ValueError, match="lower"):
            self.make([[0.0, 0.5], [0.5, 0.0]], [[0.0, 0.3], [0.3, 0.0]])


class TestClassify:
    def test_strictly_self_similar_near_zero(self, cantor_gram):
        report = classify_approx(cantor_gram)
        assert report.plain <= 1e-6
        assert report.level_by_level <= 1e-6
        assert report.uniform <= 1e-6

    def test_ordering_invariant(self):
        schedule = PerturbationSchedule(
            mode="rotation", seed=5, theta0=0.4, r0=0.1, randomize=True
        )
        system = perturb_composed(named_system("cantor2"), schedule, depth=2, extra=3)
        gram = piece_gram(system, params=TINY)
        report = classify_approx(gram)
        assert report.uniform >= report.level_by_level - 1e-12
        assert report.uniform >= report.plain - 1e-12
        assert report.depth == 2

    def test_perturbation_bounds_level_by_level(self):
        # A certified defect below 1/4 caps the parent-child deviation
        # at four times the defect.
        schedule = PerturbationSchedule(
            mode="interval", a0=0.0, b0=1.1, randomize=True, seed=7
        )
        system = perturb_interval_cantor(schedule, depth=2)
        cert = certify_perturbation(system, params=TINY)
        assert cert.delta_hat < 0.25
        report = classify_approx(piece_gram(system, params=TINY))
        assert report.level_by_level <= 4.0 * cert.delta_hat + 0.02

    def test_report_dict(self, cantor_gram):
        d = classify_approx(cantor_gram).to_dict()
        assert "verified to depth 2" in d["note"]
        assert d["variant"] == "isometry-radius"


def synthetic_gram():
    # Seven pieces in two shape clusters: indices 0..3 mutually close,
    # 4..6 mutually close, clusters 0.8 apart.
    system = structure_from_ifs(named_system("cantor"), 2)
    words = []
    for k in range(3):
        words.extend(sorted(system.words_at(k), key=lambda w: w.indices))
    pieces = tuple(system.piece(w) for w in words)
    n = 7
    uppers = np.full((n, n), 0.8)
    for i in range(n):
        for j in range(n):
            if (i < 4) == (j < 4):
                uppers[i, j] = 0.05
    np.fill_diagonal(uppers, 0.0)
    uppers = np.triu(uppers, 1) + np.triu(uppers, 1).T
    return PieceGram(
        words=tuple(words),
        pieces=pieces,
        lowers=np.zeros((n, n)),
        uppers=uppers,
        variant=MetricVariant("isometry", "radius"),
        depth=2,
        search_tol=0.0,
    )


class TestSplineCover:
    def test_self_similar_single_representative(self, cantor_gram):
        report = spline_cover(cantor_gram, delta=0.1)
        assert len(report.representatives) == 1
        assert report.passed
        assert report.achieved <= 0.1
        assert dict(report.assignment).keys() == {
            w.label for w in cantor_gram.words
        }

    def test_two_clusters_need_two(self):
        report = spline_cover(synthetic_gram(), delta=0.1)
        assert len(report.representatives) == 2
        assert report.achieved <= 0.1

    def test_count_monotone_in_delta(self):
        gram = synthetic_gram()
        sizes = [
            len(spline_cover(gram, delta=d).representatives)
            for d in (0.04, 0.1, 0.9)
        ]
        assert sizes == sorted(sizes, reverse=True)
        assert sizes[-1] == 1

    def test_level_filter(self):
        report = spline_cover(synthetic_gram(), delta=0.9, level=1)
        assert all(len(label) >= 1 and label != "0" for label, _ in report.assignment)
        assert report.level == 1

    def test_degree_filter(self):
        # lam below the child ratio keeps only the four depth-2 pieces.
        report = spline_cover(synthetic_gram(), delta=0.9, lam=0.2)
        assert {label for label, _ in report.assignment} == {"11", "12", "21", "22"}

    def test_rejects_bad_inputs(self):
        gram = synthetic_gram()
        with pytest.raises(ValueError, match="delta"):
            spline_cover(gram, delta=0.0)
        with pytest.raises(ValueError, match="level"):
            spline_cover(gram, delta=0.1, level=5)
        with pytest.raises(ValueError, match="filters"):
            spline_cover(gram, delta=0.1, lam=1e-6)


class TestCheckSpline:
    def test_koch_depth2_pattern_accepted(self):
        # The depth-2 broken line sits within (1/2)/9 of every piece, so
        # it passes as a 0.1-pattern.
        ifss = named_system("koch")
        system = structure_from_ifs(ifss, 2, extra=3)
        candidate = prefractal(ifss, ifss.base_points(0.1), 2)
        report = check_spline(system, [candidate], delta=0.1, params=TINY)
        assert report.passed
        assert report.achieved <= 0.1
        assert report.unassigned == ()

    def test_segment_pattern_rejected_for_koch(self):
        ifss = named_system("koch")
        system = structure_from_ifs(ifss, 1, extra=3)
        segment = np.hstack(
            [np.linspace(0, 1, 80)[:, None], np.zeros((80, 1))]
        )
        report = check_spline(system, [segment], delta=0.1, params=TINY)
        assert not report.passed
        assert len(report.unassigned) > 0

    def test_validation(self):
        system = structure_from_ifs(named_system("cantor"), 1)
        with pytest.raises(ValueError, match="delta"):
            check_spline(system, [np.zeros((2, 1))], delta=-1.0)
        with pytest.raises(ValueError, match="candidate"):
            check_spline(system, [], delta=0.1)


class TestSimilarityIndex:
    def test_same_system_twice_full_overlap(self):
        a = structure_from_ifs(named_system("cantor"), 1)
        b = structure_from_ifs(named_system("cantor"), 1)
        idx = similarity_index([a, b], delta=0.1, level=1, params=TINY)
        assert idx.p_k == 1
        assert idx.q_k == 1
        assert idx.gamma_k == 1.0

    def test_disjoint_shape_families(self):
        a = structure_from_ifs(named_system("cantor2"), 1)
        b = structure_from_ifs(named_system("sierpinski"), 1)
        idx = similarity_index([a, b], delta=0.05, level=1, params=TINY)
        assert idx.q_k == 0
        assert idx.gamma_k == 0.0
        assert idx.p_k >= 2

    def test_single_family_degenerate(self):
        a = structure_from_ifs(named_system("cantor"), 1)
        idx = similarity_index([a], delta=0.1, level=0, params=TINY)
        assert idx.q_k == idx.p_k
        assert idx.gamma_k == 1.0

    def test_gamma_in_unit_interval(self):
        a = structure_from_ifs(named_system("cantor2"), 1)
        b = structure_from_ifs(named_system("sierpinski"), 1)
        idx = similarity_index([a, b], delta=0.4, level=1, params=TINY)
        assert 0.0 <= idx.gamma_k <= 1.0

    def test_validation(self):
        with pytest.raises(ValueError, match="family"):
            similarity_index([], delta=0.1)
        a = structure_from_ifs(named_system("cantor"), 1)
        with pytest.raises(ValueError, match="delta"):
            similarity_index([a], delta=0.0)


class TestDiagnosticsAndOutputs:
    def test_finite_structure_diagnostic(self, cantor_gram):
        diag = finite_structure_diagnostic(cantor_gram, delta=0.1)
        assert diag["levels"] == [0, 1, 2]
        assert diag["cover_sizes"] == [1, 1, 1]
        assert max(diag["max_assigned"]) <= 0.1

    def test_gram_csv(self, cantor_gram):
        text = gram_csv(cantor_gram)
        lines = text.strip().split("\n")
        assert lines[0].startswith("word,0,")
        assert len(lines) == 8
        with pytest.raises(ValueError, match="which"):
            gram_csv(cantor_gram, which="middle")

    def test_spline_svg(self, cantor_gram):
        report = spline_cover(cantor_gram, delta=0.1)
        text = spline_svg(report)
        root = ET.fromstring(text)
        assert root.tag.endswith("svg")
        rects = [e for e in root.iter() if e.tag.endswith("rect")]
        assert len(rects) == 1 + len(report.representatives)
