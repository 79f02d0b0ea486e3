import math

import numpy as np
import pytest

from fracshape.geometry import hausdorff
from fracshape.ifs import Word, named_system, prefractal
from fracshape.perturb import (
    Certificate,
    PerturbationSchedule,
    StructureSystem,
    _check_tail_decay,
    certify_perturbation,
    check_separation,
    interval_delta0,
    interval_eps0,
    perturb_composed,
    perturb_interval_cantor,
    rotation_eps0,
    structure_from_ifs,
    structure_consistency,
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


def interval_schedule(**kw):
    base = dict(mode="interval", a0=0.0, b0=1.0)
    base.update(kw)
    return PerturbationSchedule(**base)


# ---------------------------------------------------------------------------
# schedules


def test_schedule_rejects_unknown_mode():
    with pytest.raises(ValueError, match="mode"):
        PerturbationSchedule(mode="wiggle")


def test_schedule_rejects_bad_interval_data():
    with pytest.raises(ValueError):
        interval_schedule(a0=1.0, b0=1.0)
    with pytest.raises(ValueError, match="override"):
        interval_schedule(b0=1.2, interval_overrides=(("1", (0.0, 1.3)),))
    with pytest.raises(ValueError, match="override"):
        interval_schedule(interval_overrides=(("1", (0.5, 0.5)),))
    with pytest.raises(ValueError):
        PerturbationSchedule(mode="rotation", theta0=-0.1)
    with pytest.raises(ValueError):
        PerturbationSchedule(mode="similitude", sigma_prob=1.5)
    with pytest.raises(ValueError):
        PerturbationSchedule(mode="similitude", rho_overrides=(("1", 0.0),))


def test_interval_draws_stay_in_bounds():
    sched = interval_schedule(a0=0.25, b0=1.75, randomize=True, seed=11)
    for k in range(1, 7):
        for idx in [(1,) * k, (2,) * k, (1, 2) * (k // 2) + (1,) * (k % 2)]:
            a, b = sched.interval_for(Word.uniform(idx, 2))
            assert 0.25 <= a < b <= 1.75


def test_draws_are_reproducible_and_word_keyed():
    sched = interval_schedule(randomize=True, seed=7)
    w = Word.uniform((1, 2, 1), 2)
    assert sched.interval_for(w) == sched.interval_for(w)
    other = sched.interval_for(Word.uniform((2, 1, 1), 2))
    assert sched.interval_for(w) != other
    reseeded = interval_schedule(randomize=True, seed=8)
    assert reseeded.interval_for(w) != sched.interval_for(w)


def test_override_takes_precedence():
    sched = interval_schedule(b0=1.5, randomize=True, seed=1, interval_overrides=(("12", (0.2, 0.9)),))
    assert sched.interval_for(Word.uniform((1, 2), 2)) == (0.2, 0.9)


def test_coupled_branch_choice_shared_by_siblings():
    sched = PerturbationSchedule(mode="branch", seed=3, coupled=True)
    parent = Word.uniform((1, 3), 4)
    assert sched.hat_choice(parent.extend(2)) == sched.hat_choice(parent.extend(3))
    free = PerturbationSchedule(mode="branch", seed=3, coupled=False)
    picks = {
        free.hat_choice(Word.uniform(idx, 4))
        for idx in [(1, 2), (1, 3), (2, 2), (2, 3), (3, 2), (4, 3), (1, 1, 2), (2, 1, 3)]
    }
    assert picks == {True, False}


def test_schedule_roundtrip():
    sched = PerturbationSchedule(
        mode="similitude",
        seed=9,
        randomize=True,
        theta0=0.05,
        lam=0.01,
        sigma_prob=0.25,
        rho_overrides=(("2", 1.05),),
    )
    assert PerturbationSchedule.from_dict(sched.to_dict()) == sched


def test_constant_formulas():
    assert interval_delta0(0.0, 1.0) == 1.0
    assert interval_delta0(0.0, 1.2) == 1.0
    assert interval_delta0(0.0, 2.5) == pytest.approx(1.5)
    assert interval_eps0(1.2) == pytest.approx(2.0 / 9.0)
    assert interval_eps0(1.9) == pytest.approx(2.0 / 3.0 - 1.9 / 3.0)
    with pytest.raises(ValueError):
        interval_eps0(2.0)
    assert rotation_eps0(0.0) == pytest.approx(1.0 / 12.0)
    assert rotation_eps0(0.15) == pytest.approx((1.0 - 0.9) / 3.0)
    with pytest.raises(ValueError):
        rotation_eps0(1.0 / 6.0)


# ---------------------------------------------------------------------------
# builders


def test_unperturbed_interval_matches_prefractal():
    system = perturb_interval_cantor(interval_schedule(), depth=2, extra=2, leaf_samples=3)
    cantor = named_system("cantor")
    base = cantor.base_points(0.5)
    assert hausdorff(system.root_piece.points, prefractal(cantor, base, 2).points) <= 1e-12
    for w in system.words_at(1):
        expected = cantor.word_transform(w).apply(prefractal(cantor, base, 2).points)
        assert hausdorff(system.piece(w).points, expected) <= 1e-12


def test_structure_from_ifs_is_exact():
    koch = named_system("koch")
    system = structure_from_ifs(koch, depth=2, extra=2, leaf_spacing=0.25)
    base = koch.base_points(0.25)
    for w in system.words_at(2):
        expected = koch.word_transform(w).apply(prefractal(koch, base, 2).points)
        assert hausdorff(system.piece(w).points, expected) <= 1e-12


def test_piece_counts_and_lookup():
    system = perturb_interval_cantor(interval_schedule(), depth=3, extra=2, leaf_samples=3)
    assert len(system.words_at(0)) == 1
    assert len(system.words_at(3)) == 8
    assert len(system.pieces) == 1 + 2 + 4 + 8
    with pytest.raises(KeyError):
        system.piece(Word.uniform((1,) * 9, 2))
    with pytest.raises(ValueError):
        system.words_at(4)
    summary = system.summary_dict()
    assert summary["arity"] == 2 and summary["depth"] == 3
    assert summary["piece_counts"]["0"] >= summary["piece_counts"]["111"]


def test_interval_consistency_and_tails():
    sched = interval_schedule(b0=1.2, randomize=True, seed=4)
    system = perturb_interval_cantor(sched, depth=3, extra=2, leaf_samples=5)
    assert structure_consistency(system) <= 0.6 * 3.0**-2
    assert len(system.tails) == 3
    assert system.tails[2] <= system.tails[0] + 8 * system.root_piece.eta


def test_branch_system_differs_from_reference_but_nests():
    sched = PerturbationSchedule(mode="branch", seed=1, coupled=True)
    system = perturb_composed(named_system("koch"), sched, depth=2, extra=2)
    exact = structure_from_ifs(named_system("koch"), depth=2, extra=2)
    assert hausdorff(system.root_piece.points, exact.root_piece.points) > 1e-3
    assert structure_consistency(system) <= 0.6 * 3.0**-2


def test_rotation_mode_needs_plane_cantor():
    sched = PerturbationSchedule(mode="rotation", theta0=0.3, r0=0.1, randomize=True, seed=2)
    with pytest.raises(ValueError, match="plane"):
        perturb_composed(named_system("cantor"), sched, depth=1)
    with pytest.raises(ValueError, match="Cantor"):
        perturb_composed(named_system("koch"), sched, depth=1)
    system = perturb_composed(named_system("cantor2"), sched, depth=2, extra=2)
    assert system.dim == 2
    assert structure_consistency(system) <= 0.1


def test_mode_routing_rejections():
    with pytest.raises(ValueError, match="interval"):
        perturb_interval_cantor(PerturbationSchedule(mode="branch"), depth=1)
    with pytest.raises(ValueError, match="rotation"):
        perturb_composed(named_system("koch"), interval_schedule(), depth=1)
    with pytest.raises(ValueError, match="koch"):
        perturb_composed(named_system("cantor2"), PerturbationSchedule(mode="branch"), depth=1)
    with pytest.raises(ValueError, match="depth"):
        perturb_interval_cantor(interval_schedule(), depth=0)


def test_point_budget_guard():
    with pytest.raises(MemoryError):
        perturb_interval_cantor(interval_schedule(), depth=19, extra=4, leaf_samples=5)


def test_tail_decay_guard():
    stub = StructureSystem(
        m=2, depth=2, extra=0, dim=1, pieces={}, ifss=named_system("cantor"), tails=(1e-3, 9e-4)
    )
    with pytest.raises(RuntimeError, match="tail bound"):
        _check_tail_decay(stub, 1e-6)
    ok = StructureSystem(
        m=2, depth=2, extra=0, dim=1, pieces={}, ifss=named_system("cantor"), tails=(1e-3, 2e-4)
    )
    _check_tail_decay(ok, 1e-6)


# ---------------------------------------------------------------------------
# certificates


def test_exact_systems_certify_within_search_tolerance():
    for name in ("cantor", "koch", "sierpinski"):
        system = structure_from_ifs(named_system(name), depth=1, extra=2)
        cert = certify_perturbation(system, params=TINY)
        assert cert.delta_hat <= 10 * cert.search_tol, name
        assert cert.delta_hat_diameter <= cert.delta_hat


def test_interval_certificate_is_small_and_under_delta0():
    sched = interval_schedule(b0=1.2, randomize=True, seed=3)
    system = perturb_interval_cantor(sched, depth=2, extra=3, leaf_samples=5)
    cert = certify_perturbation(system, params=TINY)
    assert cert.delta_hat <= interval_delta0(0.0, 1.2) + 0.02
    # a leaf interval [a, b] inside [0, 1.2] deviates from [0, 1] by
    # less than 1, and leaves sit at relative scale 3^-extra
    assert cert.delta_hat <= 1.0 * 3.0**-3 / 0.5 + 0.02
    assert cert.radius_ref == pytest.approx(0.5, abs=1e-9)
    assert cert.diameter_ref == pytest.approx(1.0, abs=1e-9)
    assert len(cert.per_word) == 1 + 2 + 4


def test_coupled_branch_certificate_within_paper_level():
    sched = PerturbationSchedule(mode="branch", seed=1, coupled=True)
    system = perturb_composed(named_system("koch"), sched, depth=2, extra=4)
    cert = certify_perturbation(system, params=TINY)
    assert 1e-3 < cert.delta_hat_diameter <= 1.0 / 9.0 + 0.02
    # the enclosing ball of the curve is the half-diameter disc: the
    # peak at height sqrt(3)/6 sits inside it
    assert cert.radius_ref == pytest.approx(0.5, abs=1e-6)
    assert cert.diameter_ref == pytest.approx(1.0, abs=1e-6)
    assert cert.delta_hat == pytest.approx(2.0 * cert.delta_hat_diameter, rel=1e-9)


def test_independent_branch_certificate_within_paper_level():
    sched = PerturbationSchedule(mode="branch", seed=2, coupled=False)
    system = perturb_composed(named_system("koch"), sched, depth=2, extra=3)
    cert = certify_perturbation(system, params=TINY)
    assert cert.delta_hat_diameter <= 1.0 / 3.0 + 0.02


def test_similitude_certificate_tracks_deviation_size():
    sched = PerturbationSchedule(
        mode="similitude", seed=2, randomize=True, theta0=0.05, lam=0.02, sigma_prob=0.0
    )
    system = perturb_composed(named_system("koch"), sched, depth=2, extra=2)
    cert = certify_perturbation(system, params=TINY)
    assert cert.delta_hat <= 0.35
    big = PerturbationSchedule(mode="similitude", seed=2, randomize=True, theta0=0.5, lam=0.1)
    loud = certify_perturbation(
        perturb_composed(named_system("koch"), big, depth=1, extra=2), params=TINY
    )
    assert loud.delta_hat > cert.per_word[0][1]


def test_certificate_monotone_in_depth():
    sched = PerturbationSchedule(mode="branch", seed=5, coupled=True)
    system = perturb_composed(named_system("koch"), sched, depth=2, extra=2)
    shallow = certify_perturbation(system, depth=1, params=TINY)
    deep = certify_perturbation(system, depth=2, params=TINY)
    assert shallow.delta_hat <= deep.delta_hat + 1e-12
    with pytest.raises(ValueError, match="depth"):
        certify_perturbation(system, depth=5, params=TINY)
    data = deep.to_dict()
    assert data["depth"] == 2 and len(data["per_word"]) == 21
    assert "finite depth" in data["note"]


def test_certificate_needs_reference():
    stub = StructureSystem(m=2, depth=1, extra=0, dim=1, pieces={}, ifss=None, tails=())
    with pytest.raises(ValueError, match="reference"):
        certify_perturbation(stub)
    with pytest.raises(ValueError, match="reference"):
        check_separation(stub, 0.1)


# ---------------------------------------------------------------------------
# separation


def test_interval_separation_passes():
    sched = interval_schedule(b0=1.2, randomize=True, seed=6)
    system = perturb_interval_cantor(sched, depth=2, extra=3, leaf_samples=5)
    report = check_separation(system, interval_eps0(1.2))
    assert report.passed
    assert report.worst_margin >= 1.0
    assert report.pairs_checked == 3
    data = report.to_dict()
    assert data["eps0"] == pytest.approx(2.0 / 9.0)


def test_rotation_separation_passes():
    sched = PerturbationSchedule(
        mode="rotation", theta0=math.pi / 2, r0=0.1, randomize=True, seed=5
    )
    system = perturb_composed(named_system("cantor2"), sched, depth=2, extra=2)
    report = check_separation(system, rotation_eps0(0.1))
    assert report.passed


def test_touching_pieces_fail_separation():
    system = structure_from_ifs(named_system("c_lambda", 1.0), depth=2, extra=2)
    report = check_separation(system, 0.05)
    assert not report.passed
    assert report.worst_distance <= 1e-12
    assert report.worst_margin <= 1e-9
    assert set(report.worst_pair) <= {"1", "2", "3", "21", "22", "23", "11", "12", "13", "31", "32", "33"}


def test_separation_input_validation():
    system = perturb_interval_cantor(interval_schedule(), depth=1, extra=2, leaf_samples=3)
    with pytest.raises(ValueError):
        check_separation(system, 0.0)
    with pytest.raises(ValueError):
        check_separation(system, 0.1, depth=3)
