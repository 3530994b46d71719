import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bubblelab.config import (AsymptoticRegime, BubbleParams, Box, Configuration, CurvatureModel,
                              InfeasibleRegimeError, OutOfTubeError, configuration_from_dict,
                              configuration_to_dict, ctilde, curvature_K, curvature_eval, gen_circle_configuration,
                              gen_random_separated, load_configuration, project_to_H, save_configuration,
                              validate_configuration)


def two_bubbles(lams, dist=1.0, n=6, **regime):
    xi2 = np.zeros(n)
    xi2[0] = dist
    bubbles = (BubbleParams(lams[0], (0.0,) * n), BubbleParams(lams[1], tuple(xi2)))
    return Configuration(n, bubbles, Box.cube(n), AsymptoticRegime(**regime))


def test_bubble_scale_must_be_positive():
    with pytest.raises(ValueError):
        BubbleParams(0.0, (0.0,) * 6)
    with pytest.raises(ValueError):
        BubbleParams(-1e-3, (0.0,) * 6)


@pytest.mark.parametrize("kw", [dict(gamma=0.5), dict(gamma=1.0), dict(nu=0.8),
                                dict(kappa=0.0), dict(kappa=1.0), dict(sigma=0.0), dict(tau=1.0), dict(ell=1.5)])
def test_regime_rejects_out_of_range(kw):
    with pytest.raises(ValueError):
        AsymptoticRegime(**kw)


def test_regime_flags_are_recorded_not_enforced():
    flags = AsymptoticRegime(sigma=5.0).theorem_flags(6)
    assert flags == {"decay_vs_count": False, "separation_vs_count": False}
    assert all(AsymptoticRegime(sigma=0.1).theorem_flags(6).values())
    assert AsymptoticRegime(nu=0.6).rho(0.01) == pytest.approx(0.01**0.6)


def test_ctilde_six():
    assert ctilde(6) == pytest.approx(4 / 20)


def test_two_bubbles_unit_apart_pass_separation():
    # qh distance 100, sum of 1/d = 0.01 <= 0.01^0.75; the count bound needs sigma >= 0.15
    cfg = two_bubbles((0.01, 0.01), gamma=0.75, sigma=0.2)
    rep = validate_configuration(cfg)
    assert rep["separation"].measured == pytest.approx(0.01)
    assert rep["separation"].bound == pytest.approx(0.01**0.75)
    assert rep.passed


def test_lambda_ratio_failure():
    cfg = two_bubbles((1.0, 1e-4), sigma=0.2)
    rep = validate_configuration(cfg)
    assert cfg.lambda_bar == pytest.approx(0.01)
    assert rep["lambda_ratio"].measured == pytest.approx(100.0)
    assert not rep["lambda_ratio"].passed
    assert not rep.passed


def test_count_bound_failure():
    rep = validate_configuration(two_bubbles((0.01, 0.01), sigma=0.05))
    assert rep["count"].bound == pytest.approx(0.01**-0.05)
    assert not rep["count"].passed and rep["separation"].passed


def test_duplicate_centers_rejected():
    cfg = two_bubbles((0.01, 0.01), dist=0.0)
    with pytest.raises(ValueError):
        validate_configuration(cfg)


def test_structural_errors():
    with pytest.raises(ValueError):
        Configuration(6, (BubbleParams(0.1, (0.0,) * 5),), Box.cube(6))
    with pytest.raises(ValueError):
        Configuration(6, (BubbleParams(0.1, (3.0,) + (0.0,) * 5),), Box.cube(6))
    with pytest.raises(ValueError):
        Configuration(6, (), Box.cube(6))
    with pytest.raises(ValueError):
        Configuration(6, (BubbleParams(0.1, (0.0,) * 6),), Box.cube(6), AsymptoticRegime(ell=4.0))


def test_circle_two_antipodal():
    cfg = gen_circle_configuration(2, 0.01)
    np.testing.assert_allclose(cfg.centers[0], [1, 0, 0, 0, 0, 0], atol=1e-15)
    np.testing.assert_allclose(cfg.centers[1], [-1, 0, 0, 0, 0, 0], atol=1e-15)
    assert np.linalg.norm(cfg.centers[0] - cfg.centers[1]) == pytest.approx(2.0)


def test_circle_four_neighbor_distance():
    c = gen_circle_configuration(4, 0.01).centers
    assert np.linalg.norm(c[0] - c[1]) == pytest.approx(math.sqrt(2))


def test_circle_three_with_small_count_exponent_fails_count():
    # three bubbles exceed the count bound 1e-3^-0.05 = 1.41, and eta = 1e-4 exceeds 1e-3^1.5
    cfg = gen_circle_configuration(3, 1e-3, eta=1e-4, regime=AsymptoticRegime(gamma=0.8, sigma=0.05))
    rep = validate_configuration(cfg, CurvatureModel("sphere", 2.0))
    failing = {c.name for c in rep.checks if not c.passed}
    assert failing == {"count", "eta"}


def test_circle_three_passes_with_admissible_exponents():
    reg = AsymptoticRegime(gamma=0.8, sigma=0.2, kappa=0.3)
    cfg = gen_circle_configuration(3, 1e-3, eta=1e-4, regime=reg)
    assert validate_configuration(cfg, CurvatureModel("sphere", 2.0)).passed


def test_circle_phase_is_seeded():
    a = gen_circle_configuration(5, 0.01, seed=3, random_phase=True)
    b = gen_circle_configuration(5, 0.01, seed=3, random_phase=True)
    c = gen_circle_configuration(5, 0.01, seed=4, random_phase=True)
    assert np.array_equal(a.centers, b.centers)
    assert not np.array_equal(a.centers, c.centers)


def test_random_separated_two():
    cfg = gen_random_separated(2, 1e-3, 0.75, Box.cube(6, 2.0), seed=0)
    assert validate_configuration(cfg).passed


def test_random_separated_single_always_valid():
    for seed in range(5):
        assert validate_configuration(gen_random_separated(1, 0.1, 0.75, Box.cube(6, 1.0), seed)).passed


def test_random_separated_infeasible():
    with pytest.raises(InfeasibleRegimeError):
        gen_random_separated(10**6, 0.1, 0.75, Box.cube(6, 0.5), seed=0)


def test_random_separated_deterministic():
    a = gen_random_separated(6, 1e-3, 0.75, Box.cube(6, 1.0), seed=11)
    b = gen_random_separated(6, 1e-3, 0.75, Box.cube(6, 1.0), seed=11)
    assert np.array_equal(a.centers, b.centers)


def test_projection_examples():
    y = np.zeros(6)
    y[-1] = 0.3
    p, eta = project_to_H(CurvatureModel("hyperplane"), y)
    np.testing.assert_array_equal(p, np.zeros(6))
    assert eta == pytest.approx(0.3)
    y = np.zeros(6)
    y[0] = 1.2
    p, eta = project_to_H(CurvatureModel("sphere"), y)
    np.testing.assert_allclose(p, np.eye(6)[0])
    assert eta == pytest.approx(0.2)
    with pytest.raises(ValueError):
        project_to_H(CurvatureModel("sphere"), np.zeros(6))


point = st.lists(st.floats(-3, 3, allow_nan=False), min_size=6, max_size=6).map(np.array)


@given(point, st.sampled_from(["hyperplane", "sphere"]))
def test_projection_idempotent(y, kind):
    model = CurvatureModel(kind)
    if kind == "sphere" and np.linalg.norm(y) < 1e-6:
        return
    p, eta = project_to_H(model, y)
    assert eta == pytest.approx(np.linalg.norm(y - p), abs=1e-12)
    p2, eta2 = project_to_H(model, p)
    np.testing.assert_allclose(p2, p, atol=1e-12)
    assert eta2 == pytest.approx(0.0, abs=1e-12)


def test_curvature_examples():
    model = CurvatureModel("hyperplane", 2.0, 1.0)
    y = np.zeros(6)
    assert curvature_eval(model, y) == pytest.approx(24.0)
    assert curvature_K(model, y) == pytest.approx(120.0)
    y[-1] = 0.1
    assert curvature_eval(model, y) == pytest.approx(24.0 - 0.01)
    y = np.zeros(6)
    y[2] = 1.0
    assert curvature_eval(CurvatureModel("sphere", 3.0, 2.0), y) == pytest.approx(24.0)


def test_curvature_out_of_tube():
    y = np.zeros(6)
    y[-1] = 0.6
    with pytest.raises(OutOfTubeError):
        curvature_eval(CurvatureModel("hyperplane", tube_radius=0.5), y)


@given(st.lists(point, min_size=1, max_size=20), st.sampled_from(["hyperplane", "sphere"]),
       st.floats(2.0, 3.9))
def test_curvature_maximal_on_H(ys, kind, ell):
    model = CurvatureModel(kind, ell, 1.5, tube_radius=math.inf)
    ys = np.array([y for y in ys if np.linalg.norm(y) > 1e-6])
    if len(ys) == 0:
        return
    assert np.all(curvature_eval(model, ys) <= 24.0)
    p, _ = project_to_H(model, ys)
    np.testing.assert_allclose(curvature_eval(model, p), 24.0)


def test_model_validation():
    with pytest.raises(ValueError):
        CurvatureModel("cylinder")
    with pytest.raises(ValueError):
        CurvatureModel(amplitude=0.0)
    with pytest.raises(ValueError):
        CurvatureModel(ell=2.5, integer_ell=True)
    with pytest.raises(ValueError):
        CurvatureModel(amplitude=lambda p: -np.ones(p.shape[:-1])).amplitude_at(np.zeros((2, 6)))


def test_remainder_default_and_custom():
    m = CurvatureModel("hyperplane", 2.0, 1.0, remainder_bound=0.5)
    y = np.zeros(6)
    y[-1] = 0.2
    assert curvature_eval(m, y) == pytest.approx(24 - 0.04 + 0.5 * 0.2**3)
    m = CurvatureModel("hyperplane", 2.0, 1.0, remainder=lambda y: 0.0 * y[..., 0] + 0.25)
    assert curvature_eval(m, y) == pytest.approx(24 - 0.04 + 0.25)


@given(st.integers(2, 6), st.floats(1.0, 2.0), st.integers(0, 1000))
def test_separation_monotone_under_spreading(flat, factor, seed):
    cfg = gen_random_separated(flat, 1e-3, 0.75, Box.cube(6, 0.5), seed, regime=AsymptoticRegime(sigma=0.3))
    cfg = replace(cfg, box=Box.cube(6, 1.0))
    before = validate_configuration(cfg)["separation"]
    spread = cfg.with_params(cfg.lambdas, cfg.centers * factor)
    after = validate_configuration(spread)["separation"]
    assert after.measured <= before.measured * (1 + 1e-12)
    assert not (before.passed and not after.passed)


def test_json_roundtrip(tmp_path):
    cfg = gen_circle_configuration(3, 1e-3, eta=1e-4, regime=AsymptoticRegime(sigma=0.2, kappa=0.3))
    model = CurvatureModel("sphere", 2.0, 1.5, remainder_bound=0.1)
    path = tmp_path / "cfg.json"
    save_configuration(path, cfg, model)
    doc = json.loads(path.read_text())
    assert set(doc) == {"n", "ell", "flat", "lambdas", "xis", "box", "regime", "model"}
    assert set(doc["regime"]) == {"gamma", "nu", "kappa", "sigma", "tau"}
    assert set(doc["model"]) == {"kind", "C", "remainder_bound"}
    cfg2, model2 = load_configuration(path)
    assert np.array_equal(cfg2.centers, cfg.centers)
    assert np.array_equal(cfg2.lambdas, cfg.lambdas)
    assert cfg2.regime == cfg.regime
    assert model2 == model


def test_json_scalar_box_and_mismatch():
    doc = configuration_to_dict(gen_circle_configuration(2, 0.01))
    doc["box"] = {"lo": -2, "hi": 2}
    cfg, model = configuration_from_dict(doc)
    assert cfg.box.dim == 6 and model is None
    doc["flat"] = 3
    with pytest.raises(ValueError):
        configuration_from_dict(doc)
