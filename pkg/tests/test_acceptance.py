"""Acceptance suite: eleven desk-scale checks of numerically verifiable claims.

Each test records one PASS/FAIL line, printed in the pytest terminal summary and
when the file is run as a script. Tolerances are the stated ones; a check that
fails is left failing.
"""

import itertools
import math
import time

import numpy as np

from _configs import random_admissible
from _report import RESULTS, record
from bubblelab.bubbles import bubble_eval, plantation_eval
from bubblelab.config import AsymptoticRegime, BubbleParams, Box, Configuration, CurvatureModel, \
    gen_circle_configuration, validate_configuration
from bubblelab.constants import build_table, bubble_mass, check_identities
from bubblelab.functionals import energy, odd_moment_integral, sphere_moment
from bubblelab.lemmas import lemma_suite
from bubblelab.quadrature import QuadratureSpec, integrate_radial, sphere_area
from bubblelab.reduced import _gradients, fit_expansion, verify_gradient_consistency
from bubblelab.solver import balance_scale, find_critical

N = 6
PI3 = math.pi**3


def test_constant_identities():
    t0 = time.perf_counter()
    worst, failed = 0.0, []
    for n in range(6, 11):
        for ell in np.arange(2.0, n - 3 + 0.25, 0.5):
            rep = check_identities(n, float(ell), tol=1e-8)
            worst = max(worst, max(c.deviation for c in rep.checks if c.tol > 0))
            failed += [f"{c.name} (n={n}, ell={ell})" for c in rep.checks if not c.passed]
    ok = not failed and time.perf_counter() - t0 < 60
    record(1, "constant identities", ok, f"worst relative deviation {worst:.2e}, failures {failed or 'none'}")
    assert ok


def test_closed_form_anchors():
    V6 = bubble_mass(6, method="quadrature")
    w6 = sphere_moment((0,) * 6)  # angular quadrature, independent of the Gamma formula
    dv, dw = abs(V6 - PI3 / 60), abs(w6 - PI3)
    oracle = abs(bubble_mass(6, "closed") - PI3 / 60) + abs(sphere_area(6) - PI3)
    ok = dv <= 1e-10 and dw <= 1e-10 and oracle <= 1e-12
    record(2, "closed-form anchors", ok, f"|V(6) - pi^3/60| = {dv:.1e}, |omega_6 - pi^3| = {dw:.1e}")
    assert ok


def test_bubble_pde_residual_slope():
    # the second difference loses h^-2 digits, so the stencil is evaluated in 40-digit arithmetic
    import mpmath as mp
    mp.mp.dps = 40
    rng = np.random.default_rng(3)
    hs = [mp.mpf(10) ** -k for k in (2, 3, 4)]
    logh = np.log([float(h) for h in hs])
    slopes = []
    for _ in range(100):
        b = BubbleParams(mp.mpf(float(rng.uniform(0.5, 2.0))), (0.0,) * N)
        y0 = [mp.mpf(float(v)) for v in rng.uniform(-1.5, 1.5, N)]
        res = []
        for h in hs:
            pts = [y0]
            for j, s in itertools.product(range(N), (1, -1)):
                p = list(y0)
                p[j] += s * h
                pts.append(p)
            V = bubble_eval(b, np.array(pts, dtype=object))
            lap = (sum(V[1:]) - 2 * N * V[0]) / h**2
            res.append(float(abs(lap + N * (N - 2) * V[0] ** ((N + 2) / mp.mpf(N - 2)))))
        slopes.append(np.polyfit(logh, np.log(res), 1)[0])
    dev = float(np.max(np.abs(np.array(slopes) - 2.0)))
    ok = dev <= 0.1
    record(3, "bubble equation residual slope", ok, f"100 points, slopes in [{min(slopes):.4f}, {max(slopes):.4f}]")
    assert ok


def test_interaction_asymptotics():
    lam = 1e-2
    d_qh = np.array([1e3, 3e3, 1e4, 3e4, 1e5])
    fit = fit_expansion("interaction-vs-d", tuple(d_qh * lam), n=N, lam=lam)
    pred = sphere_area(N) / N * lam ** (N - 2) * np.asarray(fit.sample_points) ** (2.0 - N)
    ratio = np.asarray(fit.values) / pred
    dev = float(np.max(np.abs(ratio - 1)))
    ok = dev <= 5e-3 and abs(fit.fitted_exponent + (N - 2)) <= 0.02
    record(4, "interaction asymptotics", ok,
           f"max |ratio - 1| = {dev:.1e} for d_qh >= 1e3, exponent {fit.fitted_exponent:.6f}")
    assert ok


def test_curvature_asymptotics():
    lams = (1e-5, 3e-5, 1e-4, 3e-4, 1e-3)
    lines, ok = [], True
    for ell in (2.0, 3.0):
        fit = fit_expansion("curvature-vs-lambda", lams, n=N, ell=ell)
        good = abs(fit.fitted_exponent - ell) <= 0.02 and fit.coefficient_rel_err <= 1e-2
        ok &= good
        lines.append(f"ell={ell:g}: exponent {fit.fitted_exponent:.5f}, coeff err {fit.coefficient_rel_err:.1e}")
    eta = fit_expansion("curvature-vs-eta", (1e-6, 3e-6, 1e-5, 3e-5, 1e-4), n=N, ell=3.0, lam=1e-3)
    ok &= eta.coefficient_rel_err <= 2e-2
    lines.append(f"eta^2 coeff err {eta.coefficient_rel_err:.1e} (ell=3)")
    record(5, "curvature asymptotics", ok, "; ".join(lines))
    assert ok


def test_gradient_identity():
    worst, fails = 0.0, 0
    for ell in (2.0, 3.0):
        table = build_table(N, ell)
        for seed in range(20):
            cfg, model = random_admissible(seed, ell)
            rep = verify_gradient_consistency(cfg, model, table, tol=1e-6)
            worst = max(worst, rep.max_deviation)
            fails += not rep.passed
    ok = fails == 0
    record(6, "gradient identity", ok, f"40 configurations, worst relative deviation {worst:.1e}")
    assert ok


def test_symmetric_cancellation():
    radial = [lambda r: (1 + r * r) ** -6.0, lambda r: np.exp(-r) * (1 + r * r) ** -3.0,
              lambda r: (1 + r * r) ** -2.0 * np.cos(r) ** 2]
    idx = [a for a in itertools.product(range(4), repeat=N) if sum(a) <= 3 and any(x % 2 for x in a)]
    worst = 0.0
    for f, R in itertools.product(radial, (0.5, 2.0)):
        mass = integrate_radial(f, N, r_max=R)
        worst = max(worst, max(abs(odd_moment_integral(a, f, R, N)) / mass for a in idx))
    ok = worst <= 1e-12
    record(7, "odd-moment cancellation", ok, f"{len(idx) * 6} moments, worst ratio to radial mass {worst:.1e}")
    assert ok


def _sign_change(A):
    c = np.stack([A[:-1, :-1], A[1:, :-1], A[:-1, 1:], A[1:, 1:]])
    return (c.min(0) <= 0) & (c.max(0) >= 0)


def test_critical_points():
    t0 = time.perf_counter()
    table = build_table(N, 2.0)
    sphere = CurvatureModel("sphere", 2.0, 1.0)
    reg = AsymptoticRegime(ell=2.0, sigma=0.45)
    pair = gen_circle_configuration(2, 0.1, regime=reg)
    fixed = find_critical(pair, sphere, table, tol=1e-12, symmetry="circle_eta0")
    err = abs(fixed.configuration.lambdas[0] - 1 / math.sqrt(180))
    free = find_critical(pair, sphere, table, tol=1e-12, symmetry="circle")
    lam = free.configuration.lambdas[0]
    eta = float(np.linalg.norm(free.configuration.centers[0]) - 1)
    # oracle: grid cells where both G_1 and the normal part of H_1 change sign
    L, E = np.linspace(0.05, 0.1, 200), np.linspace(-3e-3, 0.0, 200)
    u = np.zeros((2, N))
    u[:, 0] = (1, -1)
    G, H = np.empty((200, 200)), np.empty((200, 200))
    for i, j in itertools.product(range(200), range(200)):
        g, h = _gradients(np.full(2, L[i]), (1 + E[j]) * u, sphere, table)
        G[i, j], H[i, j] = g[0], h[0, 0]
    cells = np.argwhere(_sign_change(G) & _sign_change(H))
    pos = np.array([(lam - L[0]) / (L[1] - L[0]), (eta - E[0]) / (E[1] - E[0])])
    grid_ok = len(cells) > 0 and bool(np.any(np.all(np.abs(cells + 0.5 - pos) <= 1.5, axis=1)))
    lams, resid = [], []
    for flat in range(3, 7):
        start = gen_circle_configuration(flat, 1.2 * balance_scale(flat, sphere, table), regime=reg)
        r = find_critical(start, sphere, table, tol=1e-12, symmetry="circle")
        lams.append(float(r.configuration.lambdas[0]))
        resid.append(r.full_residual_norm if r.converged else math.inf)
    ok = (fixed.converged and err <= 1e-8 and free.converged and grid_ok and max(resid) <= 1e-10
          and bool(np.all(np.diff(lams) < 0)) and time.perf_counter() - t0 < 120)
    record(8, "critical points", ok,
           f"|lambda - 1/sqrt(180)| = {err:.1e}; free solve (lambda, eta) = ({lam:.6f}, {eta:.3e}) "
           f"{'inside' if grid_ok else 'outside'} grid oracle cells {cells.tolist()}; "
           f"flat 3..6 lambda {[round(x, 6) for x in lams]}, max residual {max(resid):.1e}")
    assert ok


def test_uniform_plantation_bound():
    reg = AsymptoticRegime(gamma=0.6, nu=0.55, sigma=0.4)
    sphere = CurvatureModel("sphere", 2.0, 1.0)
    g = np.linspace(-3.0, 3.0, 7)
    local = np.array(list(itertools.product(g, repeat=N)))
    sups, admissible = [], True
    for flat in (2, 4, 8, 16, 32, 64):
        cfg = gen_circle_configuration(flat, 1e-5, regime=reg)
        admissible &= validate_configuration(cfg, sphere).passed
        X = cfg.centers / cfg.lambda_bar
        # the circle is symmetric, so a dense grid at one center plus all neighbor midpoints covers the sup
        pts = np.vstack([X[0] + local, 0.5 * (X + np.roll(X, 1, axis=0))])
        sups.append(float(plantation_eval(cfg, pts, rescaled=True).max()))
    ratio = max(sups) / min(sups)
    ok = admissible and ratio <= 3.0
    record(9, "uniform plantation bound", ok,
           f"sup W in rescaled variable {[f'{s:.6f}' for s in sups]}, max/min {ratio:.6f}")
    assert ok


LEMMA_SETTINGS = {
    "separation": ({"alpha": 2.0, "beta": 2.0, "sigma": 2.0}, {"alpha": 3.0, "beta": 2.0, "sigma": 1.0},
                   {"alpha": 4.0, "beta": 4.0, "sigma": 3.0}),
    "condensation": ({"varsigma": 3.0}, {"varsigma": 4.0}, {"varsigma": 5.0}),
    "downgrade": ({"kappa": 0.5}, {"kappa": 1.0}, {"kappa": 1.5}),
}


def test_lemma_suites():
    parts, ok = [], True
    for name, settings in LEMMA_SETTINGS.items():
        for params in settings:
            rep = lemma_suite(name, params, 10_000, seed=1)
            good = rep.finite and rep.nonincreasing
            ok &= good
            tag = ",".join(f"{k}={v:g}" for k, v in params.items())
            parts.append(f"{name}[{tag}] sups {[f'{s:.4g}' for s in rep.sups]} {'ok' if good else 'increasing'}")
    record(10, "lemma suites", ok, "; ".join(parts))
    assert ok


def test_energy_oracle():
    cfg = Configuration(N, (BubbleParams(0.1, (0.0,) * N),), Box.cube(N))
    rep = energy(cfg, spec=QuadratureSpec(mc_samples=1_000_000, seed=1))
    target = (N - 2) * PI3 / 60
    se = rep.metadata["mc_stderr"]
    ok = abs(rep.value - target) <= 3 * se and se <= 1e-2 * target
    record(11, "single-bubble energy", ok,
           f"{rep.value:.6f} vs {target:.6f}, {abs(rep.value - target) / se:.2f} standard errors, "
           f"stderr/value {se / target:.1e}")
    assert ok


if __name__ == "__main__":
    for fn in [v for k, v in list(globals().items()) if k.startswith("test_")]:
        try:
            fn()
        except AssertionError:
            pass
    print("\n".join(RESULTS[k] for k in sorted(RESULTS)))
