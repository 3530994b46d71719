import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from _configs import random_admissible
from bubblelab.config import AsymptoticRegime, BubbleParams, Box, Configuration, CurvatureModel, \
    gen_circle_configuration
from bubblelab.constants import build_table
from bubblelab.reduced import (FitRejected, finite_difference_gradient, fit_expansion, fit_power_law,
                               model_energy_F, model_grad_lambda_G, model_grad_xi_H, model_residual,
                               verify_gradient_consistency)

N = 6
T2, T3 = build_table(N, 2.0), build_table(N, 3.0)
PLANE2 = CurvatureModel("hyperplane", 2.0, 1.0)
SPHERE2 = CurvatureModel("sphere", 2.0, 1.0)


def single(lam, offset=0.0, ell=2.0):
    xi = np.zeros(N)
    xi[-1] = offset
    return Configuration(N, (BubbleParams(lam, tuple(xi)),), Box.cube(N), AsymptoticRegime(ell=ell))


def test_single_bubble_on_H():
    cfg = single(1e-2)
    assert model_energy_F(cfg, PLANE2, T2) == pytest.approx(4 * T2.V_n + T2.C01 * 1e-4, rel=1e-15)
    assert model_grad_lambda_G(cfg, PLANE2, T2, 0) == pytest.approx(T2.C11 * 1e-4, rel=1e-15)
    np.testing.assert_array_equal(model_grad_xi_H(cfg, PLANE2, T2, 0), np.zeros(N))


def test_antipodal_pair_energy():
    lam = 0.01
    cfg = gen_circle_configuration(2, lam)
    expect = 4 * T2.V_n * 2 + 2 * T2.C01 * lam**2 - 2 * T2.C02 * lam**4 / 16
    assert model_energy_F(cfg, SPHERE2, T2) == pytest.approx(expect, rel=1e-15)


def test_antipodal_pair_forces_opposite_along_axis():
    cfg = gen_circle_configuration(2, 0.01)
    h1, h2 = model_grad_xi_H(cfg, SPHERE2, T2, 0), model_grad_xi_H(cfg, SPHERE2, T2, 1)
    np.testing.assert_allclose(h1, -h2, rtol=1e-15)
    assert h1[0] > 0 and np.allclose(h1[1:], 0, atol=1e-15 * abs(h1[0]))


def test_index_and_table_errors():
    cfg = single(1e-2)
    with pytest.raises(IndexError):
        model_grad_lambda_G(cfg, PLANE2, T2, 1)
    with pytest.raises(IndexError):
        model_grad_xi_H(cfg, PLANE2, T2, -1)
    with pytest.raises(ValueError):
        model_energy_F(cfg, PLANE2, T3)


@given(st.integers(0, 10_000))
def test_permutation_invariance(seed):
    cfg, model = random_admissible(seed, 2.0)
    perm = np.random.default_rng(seed).permutation(cfg.flat)
    shuffled = cfg.with_params(cfg.lambdas[perm], cfg.centers[perm])
    assert model_energy_F(shuffled, model, T2) == pytest.approx(model_energy_F(cfg, model, T2), rel=1e-14)


@given(st.integers(0, 10_000), st.floats(0, 2 * math.pi))
def test_rotation_invariance(seed, angle):
    cfg, model = random_admissible(seed, 3.0)
    c, s = math.cos(angle), math.sin(angle)
    R = np.eye(N)
    R[:2, :2] = [[c, -s], [s, c]]  # fixes e_n, so it is a symmetry of the hyperplane model
    rotated = replace(cfg, box=Box.cube(N, 2.0)).with_params(cfg.lambdas, cfg.centers @ R.T)
    assert model_energy_F(rotated, model, T3) == pytest.approx(model_energy_F(cfg, model, T3), rel=1e-13)
    # any rotation is a symmetry of the sphere model
    Q, _ = np.linalg.qr(np.random.default_rng(seed).standard_normal((N, N)))
    circ = gen_circle_configuration(4, 0.01, eta=1e-4)
    turned = circ.with_params(circ.lambdas, circ.centers @ Q.T)
    assert model_energy_F(turned, SPHERE2, T2) == pytest.approx(model_energy_F(circ, SPHERE2, T2), rel=1e-13)


@given(st.integers(0, 10_000), st.sampled_from([2.0, 3.0]))
def test_gradient_identity(seed, ell):
    cfg, model = random_admissible(seed, ell)
    rep = verify_gradient_consistency(cfg, model, T2 if ell == 2.0 else T3)
    assert rep.passed, rep.to_dict()


def test_gradient_identity_regression_guard():
    fails = 0
    for seed in range(10):
        cfg, model = random_admissible(seed, 3.0)
        if np.all(cfg.centers[:, -1] == 0):
            continue
        fails += not verify_gradient_consistency(cfg, model, replace(T3, C23=T3.C03)).passed
    assert fails == 10


def test_single_offset_normal_component():
    lam, eta = 1e-2, 1e-3
    cfg = single(lam, eta, ell=3.0)
    model = CurvatureModel("hyperplane", 3.0, 1.0)
    expect = 2 * T3.C03 * lam**2 * eta
    assert model_grad_xi_H(cfg, model, T3, 0)[-1] == pytest.approx(expect, rel=1e-14)
    _, H = finite_difference_gradient(cfg, model, T3)
    assert H[0, -1] == pytest.approx(expect, rel=1e-6)


def test_energy_increases_with_distance():
    lam = 1e-2
    vals = []
    for d in (0.1, 0.2, 0.4, 0.8):
        xi = np.zeros((2, N))
        xi[1, 0] = d
        cfg = Configuration(N, tuple(BubbleParams(lam, tuple(x)) for x in xi), Box.cube(N))
        vals.append(model_energy_F(cfg, PLANE2, T2))
    assert np.all(np.diff(vals) > 0)


def test_residual_stacking():
    cfg = gen_circle_configuration(3, 0.01, eta=1e-4)
    r = model_residual(cfg, SPHERE2, T2)
    assert r.shape == (3 + 3 * N,)
    assert r[1] == model_grad_lambda_G(cfg, SPHERE2, T2, 1)
    np.testing.assert_array_equal(r[3 + N: 3 + 2 * N], model_grad_xi_H(cfg, SPHERE2, T2, 1))


def test_fit_interaction_family():
    fit = fit_expansion("interaction-vs-d", (10.0, 30.0, 100.0, 300.0, 1000.0))
    assert fit.passes
    assert fit.fitted_exponent == pytest.approx(-4.0, abs=0.02)
    assert fit.fitted_coefficient == pytest.approx(math.pi**3 / 6 * 1e-8, rel=1e-2)
    assert len(fit.residuals) == 5


def test_fit_curvature_lambda_family():
    fit = fit_expansion("curvature-vs-lambda", (1e-5, 1e-4, 3e-4, 1e-3), ell=3.0)
    assert fit.passes and fit.fitted_exponent == pytest.approx(3.0, abs=0.02)


def test_fit_curvature_eta_family():
    fit = fit_expansion("curvature-vs-eta", (1e-6, 1e-5, 3e-5, 1e-4), ell=3.0, lam=1e-3)
    assert fit.passes and fit.coefficient_rel_err <= 2e-2


def test_fit_rejections():
    x = np.array([1.0, 10.0, 100.0, 1000.0])
    with pytest.raises(FitRejected):
        fit_power_law("f", x, np.zeros(4), 1.0, 1.0)
    with pytest.raises(FitRejected):
        fit_power_law("f", x, np.array([1.0, 3.0, 2.0, 4.0]), 1.0, 1.0)
    with pytest.raises(ValueError):
        fit_expansion("interaction-vs-d", (10.0, 20.0, 30.0, 40.0))
    with pytest.raises(ValueError):
        fit_expansion("interaction-vs-d", (10.0, 100.0, 1000.0))
    with pytest.raises(ValueError):
        fit_expansion("bogus", (1.0, 10.0, 100.0, 1000.0))
