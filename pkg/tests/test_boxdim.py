import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from fracshape.boxdim import (
    BoxCountSeries,
    ball_mass,
    box_counts,
    fit_box_dimension,
    loglog_svg,
    moran_mass_check,
    scale_ladder,
    series_csv,
)
from fracshape.geometry import PointCloud, min_enclosing_ball
from fracshape.ifs import named_system, prefractal
from fracshape.perturb import PerturbationSchedule, perturb_interval_cantor, structure_from_ifs

CANTOR_DIM = math.log(2.0) / math.log(3.0)


def left_endpoint_cantor(depth):
    # Images of 0 are exactly the cylinder left endpoints, so every
    # occupied cell at coarser ternary scales holds its own multiple of
    # the scale and counts come out exact.
    return prefractal(named_system("cantor"), PointCloud([[0.0]]), depth)


def word_with(system, indices):
    return next(w for w in system.words_at(len(indices)) if w.indices == indices)


class TestScaleLadder:
    def test_values(self):
        assert scale_ladder(1 / 3, range(2, 5)) == pytest.approx((1 / 9, 1 / 27, 1 / 81), rel=1e-15)

    def test_rejects_bad_ratio(self):
        with pytest.raises(ValueError, match="ratio"):
            scale_ladder(1.5, [1, 2, 3, 4])

    def test_rejects_unordered_powers(self):
        with pytest.raises(ValueError, match="increasing"):
            scale_ladder(0.5, [3, 2])


class TestBoxCounts:
    def test_cantor_counts_exact(self):
        cloud = left_endpoint_cantor(12)
        series = box_counts(cloud, scale_ladder(1 / 3, range(2, 11)))
        assert series.counts == tuple(2**j for j in range(2, 11))

    def test_cantor_anchor_is_zero(self):
        series = box_counts(left_endpoint_cantor(8), [1 / 9, 1 / 27])
        assert series.anchor[0] == 0.0

    def test_segment_at_tenth(self):
        cloud = np.linspace(0.0, 1.0, 1000)[:, None]
        series = box_counts(cloud, [0.1])
        assert series.counts[0] in (10, 11)

    def test_single_point(self):
        series = box_counts(np.array([[0.3, 0.7]]), scale_ladder(0.5, range(0, 5)))
        assert series.counts == (1, 1, 1, 1, 1)

    def test_rejects_increasing_scales(self):
        with pytest.raises(ValueError, match="decreasing"):
            box_counts(np.zeros((3, 1)), [0.1, 0.2])

    def test_rejects_scale_below_resolution(self):
        cloud = PointCloud(np.linspace(0, 1, 9)[:, None], eta=0.0625)
        with pytest.raises(ValueError, match="resolution"):
            box_counts(cloud, [0.5, 0.125])
        box_counts(cloud, [0.5, 0.25])

    def test_explicit_anchor(self):
        # Cell centers under the aligned anchor; under the shifted one
        # the points sit on cell edges and snap into the right-hand cell.
        pts = np.array([[0.5], [1.5], [2.5]])
        aligned = box_counts(pts, [1.0], anchor=[0.0])
        shifted = box_counts(pts, [1.0], anchor=[0.5])
        assert aligned.counts[0] == 3
        assert shifted.counts[0] == 3

    def test_counts_monotone_on_nested_ladder(self):
        rng = np.random.default_rng(5)
        cloud = rng.random((400, 2))
        series = box_counts(cloud, scale_ladder(0.5, range(0, 7)))
        assert all(a <= b for a, b in zip(series.counts, series.counts[1:]))

    def test_anchor_stability_within_grid_factor(self):
        cloud = left_endpoint_cantor(8)
        scales = scale_ladder(1 / 3, range(2, 5))
        rng = np.random.default_rng(11)
        runs = [box_counts(cloud, scales).counts]
        for _ in range(5):
            runs.append(box_counts(cloud, scales, anchor=rng.uniform(-1, 0, 1)).counts)
        per_scale = np.array(runs, dtype=float)
        assert np.all(per_scale.max(axis=0) <= 2.0 * per_scale.min(axis=0))

    def test_anchor_stability_plane(self):
        g = np.linspace(0.0, 1.0, 64)
        cloud = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
        scales = scale_ladder(0.5, range(1, 4))
        rng = np.random.default_rng(12)
        runs = [box_counts(cloud, scales).counts]
        for _ in range(5):
            runs.append(box_counts(cloud, scales, anchor=rng.uniform(-1, 0, 2)).counts)
        per_scale = np.array(runs, dtype=float)
        assert np.all(per_scale.max(axis=0) <= 4.0 * per_scale.min(axis=0))


class TestSeriesValidation:
    def test_rejects_decreasing_counts(self):
        with pytest.raises(ValueError, match="nondecreasing"):
            BoxCountSeries((0.5, 0.25), (4, 3), np.zeros(1), 1)

    def test_rejects_zero_count(self):
        with pytest.raises(ValueError, match="at least 1"):
            BoxCountSeries((0.5, 0.25), (0, 1), np.zeros(1), 1)

    def test_rejects_misaligned(self):
        with pytest.raises(ValueError, match="align"):
            BoxCountSeries((0.5, 0.25), (1, 2, 3), np.zeros(1), 1)

    def test_rejects_bad_anchor_shape(self):
        with pytest.raises(ValueError, match="anchor"):
            BoxCountSeries((0.5, 0.25), (1, 2), np.zeros(2), 1)

    def test_roundtrip_dict(self):
        series = box_counts(np.linspace(0, 1, 50)[:, None], [0.5, 0.25, 0.125])
        d = series.to_dict()
        assert d["counts"] == list(series.counts)
        assert d["dim"] == 1


class TestFit:
    def test_cantor_slope(self):
        series = box_counts(left_endpoint_cantor(12), scale_ladder(1 / 3, range(2, 11)))
        fit = fit_box_dimension(series)
        assert abs(fit.slope - CANTOR_DIM) <= 0.02
        assert fit.r_squared > 0.999
        assert not fit.degenerate
        assert len(fit.local_slopes) == 8

    def test_filled_square_slope(self):
        g = np.linspace(0.0, 1.0, 128, endpoint=False)
        cloud = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
        series = box_counts(cloud, scale_ladder(0.5, range(1, 6)), anchor=[0.0, 0.0])
        fit = fit_box_dimension(series)
        assert abs(fit.slope - 2.0) <= 0.05

    def test_sierpinski_slope(self):
        ifss = named_system("sierpinski")
        cloud = prefractal(ifss, PointCloud(ifss.base_vertices), 8)
        series = box_counts(cloud, scale_ladder(0.5, range(2, 8)))
        fit = fit_box_dimension(series)
        assert abs(fit.slope - math.log(3.0) / math.log(2.0)) <= 0.05

    def test_degenerate_flagged(self):
        series = box_counts(np.array([[0.3]]), scale_ladder(0.5, range(0, 4)))
        fit = fit_box_dimension(series)
        assert fit.degenerate
        assert fit.slope == 0.0
        assert fit.r_squared == 0.0

    def test_needs_four_scales(self):
        series = box_counts(np.linspace(0, 1, 40)[:, None], [0.5, 0.25, 0.125])
        with pytest.raises(ValueError, match="4 scales"):
            fit_box_dimension(series)

    def test_union_slope_is_max_of_slopes(self):
        # A far isolated point adds a single cell at every scale, so the
        # union keeps the larger slope of the pair.
        segment = np.linspace(0.0, 1.0, 2000)[:, None]
        union = np.vstack([segment, [[5.0]]])
        fit = fit_box_dimension(box_counts(union, scale_ladder(0.5, range(4, 10))))
        assert abs(fit.slope - 1.0) <= 0.05

        cantor = left_endpoint_cantor(12).points
        union = np.vstack([cantor, [[5.0]]])
        fit = fit_box_dimension(box_counts(union, scale_ladder(1 / 3, range(2, 11))))
        assert abs(fit.slope - CANTOR_DIM) <= 0.05


class TestOutputs:
    def test_csv_rows(self):
        series = box_counts(left_endpoint_cantor(8), scale_ladder(1 / 3, range(2, 6)))
        text = series_csv(series)
        lines = text.strip().split("\n")
        assert lines[0] == "scale,count,local_slope"
        assert len(lines) == 5
        assert lines[1].startswith("0.111111") and lines[1].split(",")[1] == "4"
        assert lines[-1].endswith(",")

    def test_svg_wellformed(self):
        series = box_counts(left_endpoint_cantor(8), scale_ladder(1 / 3, range(2, 6)))
        fit = fit_box_dimension(series)
        text = loglog_svg(series, fit)
        root = ET.fromstring(text)
        assert root.tag.endswith("svg")
        circles = [e for e in root.iter() if e.tag.endswith("circle")]
        assert len(circles) == 4
        assert "slope" in text


class TestMoran:
    def exact_cantor(self, depth=4):
        return structure_from_ifs(named_system("cantor"), depth)

    def test_total_mass_is_one(self):
        report = moran_mass_check(self.exact_cantor(), eps0=0.33, trials=10)
        assert abs(report.total_mass - 1.0) <= 1e-8

    def test_cylinder_hull_mass(self):
        system = self.exact_cantor()
        piece = system.piece(word_with(system, (1, 1)))
        ball = min_enclosing_ball(piece)
        mu = ball_mass(system, ball.center, ball.radius)
        assert abs(mu - 0.25) <= 1e-9

    def test_random_balls_respect_bound(self):
        report = moran_mass_check(self.exact_cantor(), eps0=0.33, trials=200, seed=0)
        assert report.passed
        assert report.failures == ()
        assert report.worst_ratio <= 1.0
        assert report.radius_range[0] == pytest.approx((1 / 3) ** 4)

    def test_certified_interval_system(self):
        schedule = PerturbationSchedule(mode="interval", a0=0.0, b0=1.2, randomize=True, seed=3)
        system = perturb_interval_cantor(schedule, depth=3)
        report = moran_mass_check(system, eps0=2 / 9, delta=1.0, trials=200, seed=1)
        assert report.passed
        assert report.delta == 1.0
        assert report.measure_lower == pytest.approx(1.0 / report.a)

    def test_constants_formula(self):
        report = moran_mass_check(self.exact_cantor(), eps0=0.33, trials=5)
        a1 = 0.33 / 3.0
        a2 = 1.0 + 2.0 * 0.33 / 3.0
        assert report.a1 == pytest.approx(a1)
        assert report.a2 == pytest.approx(a2)
        assert report.a == pytest.approx((1.0 + 2.0 * a2) / a1 * 3.0)

    def test_report_dict(self):
        report = moran_mass_check(self.exact_cantor(), eps0=0.33, trials=5)
        d = report.to_dict()
        assert d["passed"] is True
        assert d["s"] == pytest.approx(CANTOR_DIM, abs=1e-9)

    def test_touching_pieces_rejected(self):
        system = structure_from_ifs(named_system("c_lambda", lam=1.0), 2)
        with pytest.raises(ValueError, match="separation"):
            moran_mass_check(system, eps0=0.1, trials=5)

    def test_input_validation(self):
        system = self.exact_cantor(depth=2)
        with pytest.raises(ValueError, match="eps0"):
            moran_mass_check(system, eps0=0.0)
        with pytest.raises(ValueError, match="delta"):
            moran_mass_check(system, eps0=0.3, delta=-0.1)
        with pytest.raises(ValueError, match="trials"):
            moran_mass_check(system, eps0=0.3, trials=0)


class TestMoranConsistency:
    def test_slope_tracks_similarity_dimension(self):
        system = structure_from_ifs(named_system("cantor"), 3)
        series = box_counts(system.root_piece, scale_ladder(1 / 3, range(2, 6)))
        fit = fit_box_dimension(series)
        assert abs(fit.slope - CANTOR_DIM) <= 0.05
