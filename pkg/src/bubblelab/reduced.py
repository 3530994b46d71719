"""Closed-form leading-order reduced functional, its scaled gradients, and asymptotic fits.

F(lam, xi) = (n-2) V(n) flat + C01 sum C_l lam_l^ell
             - C02 sum_l sum_{k != l} (lam_l lam_k)^((n-2)/2) |xi_l - xi_k|^(2-n)
             + C03 sum C_l lam_l^(ell-2) eta_l^2

with C_l the curvature amplitude at the projection p_l of xi_l onto H and eta_l
the distance of xi_l to H. The interaction sum runs over ordered pairs.
G_l and H_l are the closed forms of lam_l dF/dlam_l and lam_l grad_{xi_l} F.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import BubbleParams, Configuration, CurvatureModel, normal_direction, project_to_H
from .constants import ConstantTable, build_table
from .functionals import curvature_integral, interaction_integral
from .quadrature import QuadratureSpec, sphere_area, thread_count


class FitRejected(ValueError):
    """Sample data unsuitable for a power-law fit (zero, non-finite or non-monotone)."""


def _geometry(model: CurvatureModel, centers: np.ndarray):
    p, eta = project_to_H(model, centers)
    return model.amplitude_at(p), eta, normal_direction(model, centers)


def _interaction_matrix(lambdas: np.ndarray, centers: np.ndarray, n: int):
    """(lam_l lam_k)^((n-2)/2) |xi_l - xi_k|^(2-n) with zero diagonal, and the differences."""
    diff = centers[:, None, :] - centers[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(dist, np.inf)
    if np.any(dist == 0):
        raise ValueError("configuration has coincident centers")
    e = 0.5 * (n - 2)
    P = np.outer(lambdas, lambdas) ** e * dist ** (-(n - 2.0))
    return P, diff, dist


def _check_model(cfg: Configuration, model: CurvatureModel, table: ConstantTable):
    if table.n != cfg.n or table.ell != model.ell:
        raise ValueError("constant table does not match (n, ell) of the configuration and model")


def _energy_variable(lambdas, centers, model, table) -> float:
    """F without the constant (n-2) V(n) flat; differences of F are computed on this part."""
    n, ell = table.n, model.ell
    C, eta, _ = _geometry(model, centers)
    P, _, _ = _interaction_matrix(lambdas, centers, n)
    return float(table.C01 * np.sum(C * lambdas**ell) - table.C02 * P.sum()
                 + table.C03 * np.sum(C * lambdas ** (ell - 2) * eta**2))


def _gradients(lambdas, centers, model, table):
    n, ell = table.n, model.ell
    C, eta, nrm = _geometry(model, centers)
    P, diff, dist = _interaction_matrix(lambdas, centers, n)
    G = table.C11 * C * lambdas**ell - table.C12 * P.sum(axis=1) + table.C13 * C * lambdas ** (ell - 2) * eta**2
    # (sqrt(lam_l lam_k)/|d|)^n / lam_k
    Q = np.outer(lambdas, lambdas) ** (0.5 * n) * dist ** (-float(n)) / lambdas[None, :]
    H = table.C22 * np.einsum("lk,lkj->lj", Q, diff)
    H = H + (table.C23 * C * lambdas**ell * eta / lambdas)[:, None] * nrm
    return G, H


def model_energy_F(cfg: Configuration, model: CurvatureModel, table: ConstantTable) -> float:
    _check_model(cfg, model, table)
    base = (cfg.n - 2) * table.V_n * cfg.flat
    return base + _energy_variable(cfg.lambdas, cfg.centers, model, table)


def _index(cfg: Configuration, l: int) -> int:
    if not 0 <= l < cfg.flat:
        raise IndexError(f"bubble index {l} out of range for {cfg.flat} bubbles")
    return l


def model_grad_lambda_G(cfg: Configuration, model: CurvatureModel, table: ConstantTable, l: int) -> float:
    _check_model(cfg, model, table)
    l = _index(cfg, l)
    G, _ = _gradients(cfg.lambdas, cfg.centers, model, table)
    return float(G[l])


def model_grad_xi_H(cfg: Configuration, model: CurvatureModel, table: ConstantTable, l: int) -> np.ndarray:
    """Closed form of lam_l grad_{xi_l} F. The normal term vanishes on H.

    With a non-constant amplitude the tangential derivative of C at p_l is not
    part of this leading-order form.
    """
    _check_model(cfg, model, table)
    l = _index(cfg, l)
    _, H = _gradients(cfg.lambdas, cfg.centers, model, table)
    return H[l]


def model_residual(cfg: Configuration, model: CurvatureModel, table: ConstantTable) -> np.ndarray:
    """Stacked (G_1, ..., G_flat, H_1, ..., H_flat)."""
    _check_model(cfg, model, table)
    G, H = _gradients(cfg.lambdas, cfg.centers, model, table)
    return np.concatenate([G, H.ravel()])


@dataclass(frozen=True)
class GradientReport:
    max_deviation: float
    deviations_lambda: tuple[float, ...]
    deviations_xi: tuple[float, ...]
    tol: float
    h: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tol

    def to_dict(self) -> dict:
        return {"max_deviation": self.max_deviation, "deviations_lambda": list(self.deviations_lambda),
                "deviations_xi": list(self.deviations_xi), "tol": self.tol, "h": self.h, "passed": self.passed}


def finite_difference_gradient(cfg: Configuration, model: CurvatureModel, table: ConstantTable,
                               h: float = 1e-5) -> tuple[np.ndarray, np.ndarray]:
    """Central differences of F in log(lam_l) and in xi_l / lam_l."""
    lam, cen = cfg.lambdas, cfg.centers
    f = lambda L, X: _energy_variable(L, X, model, table)  # noqa: E731
    G = np.empty(cfg.flat)
    H = np.empty((cfg.flat, cfg.n))
    for l in range(cfg.flat):
        up, dn = lam.copy(), lam.copy()
        up[l] *= math.exp(h)
        dn[l] *= math.exp(-h)
        G[l] = (f(up, cen) - f(dn, cen)) / (2 * h)
        for j in range(cfg.n):
            Xu, Xd = cen.copy(), cen.copy()
            Xu[l, j] += h * lam[l]
            Xd[l, j] -= h * lam[l]
            H[l, j] = (f(lam, Xu) - f(lam, Xd)) / (2 * h)
    return G, H


def verify_gradient_consistency(cfg: Configuration, model: CurvatureModel, table: ConstantTable,
                                h: float = 1e-5, tol: float = 1e-6) -> GradientReport:
    """Relative deviation of the finite-difference scaled gradient of F from (G_l, H_l).

    G_l is compared relative to |G_l|, and each component of H_l relative to the
    largest component of H_l, so that components that vanish by symmetry do not
    divide by zero.
    """
    _check_model(cfg, model, table)
    G, H = _gradients(cfg.lambdas, cfg.centers, model, table)
    Gf, Hf = finite_difference_gradient(cfg, model, table, h)
    tiny = np.finfo(float).tiny
    dev_l = np.abs(Gf - G) / np.maximum(np.abs(G), tiny)
    dev_x = np.max(np.abs(Hf - H), axis=1) / np.maximum(np.max(np.abs(H), axis=1), tiny)
    # for a single bubble on H both sides vanish identically
    dev_x = np.where(np.max(np.abs(H), axis=1) + np.max(np.abs(Hf), axis=1) == 0, 0.0, dev_x)
    dev = float(max(dev_l.max(), dev_x.max()))
    return GradientReport(dev, tuple(dev_l.tolist()), tuple(dev_x.tolist()), tol, h)


@dataclass(frozen=True)
class ExpansionFit:
    family: str
    fitted_coefficient: float
    fitted_exponent: float
    predicted_coefficient: float
    predicted_exponent: float
    residuals: tuple[float, ...]
    passes: bool
    sample_points: tuple[float, ...] = ()
    values: tuple[float, ...] = ()
    tolerances: dict = field(default_factory=dict)

    @property
    def coefficient_rel_err(self) -> float:
        return abs(self.fitted_coefficient / self.predicted_coefficient - 1.0)

    def row(self) -> dict:
        return {"family": self.family, "exponent_fit": self.fitted_exponent, "exponent_pred": self.predicted_exponent,
                "coeff_fit": self.fitted_coefficient, "coeff_pred": self.predicted_coefficient,
                "rel_err": self.coefficient_rel_err, "pass": self.passes}


FAMILIES = ("interaction-vs-d", "curvature-vs-lambda", "curvature-vs-eta")
DEFAULT_TOLERANCES = {"interaction-vs-d": (0.02, 0.01), "curvature-vs-lambda": (0.02, 0.01),
                      "curvature-vs-eta": (0.02, 0.02)}


def _power_fit(x: np.ndarray, y: np.ndarray):
    if not np.all(np.isfinite(y)) or np.any(y == 0):
        raise FitRejected("sampled values must be finite and nonzero")
    order = np.argsort(x)
    d = np.diff(y[order])
    if not (np.all(d > 0) or np.all(d < 0)):
        raise FitRejected("sampled values are not monotone in the sample variable")
    if not (np.all(y > 0) or np.all(y < 0)):
        raise FitRejected("sampled values change sign")
    lx, ly = np.log(x), np.log(np.abs(y))
    A = np.column_stack([lx, np.ones_like(lx)])
    (slope, icpt), *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(slope), ly - (slope * lx + icpt)


def fit_power_law(family: str, x, y, predicted_coefficient: float, predicted_exponent: float,
                  finest: str = "max", tolerances: tuple[float, float] = (0.02, 0.01)) -> ExpansionFit:
    """Log-log least squares for the exponent; the coefficient is y/x^p at the most asymptotic point."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, res = _power_fit(x, y)
    i = int(np.argmax(x) if finest == "max" else np.argmin(x))
    coef = float(y[i] / x[i] ** predicted_exponent)
    exp_tol, coef_tol = tolerances
    ok = abs(slope - predicted_exponent) <= exp_tol and abs(coef / predicted_coefficient - 1) <= coef_tol
    return ExpansionFit(family, coef, slope, predicted_coefficient, predicted_exponent, tuple(res.tolist()),
                        bool(ok), tuple(x.tolist()), tuple(y.tolist()),
                        {"exponent": exp_tol, "coefficient": coef_tol})


def _at_origin(n: int, offset: float = 0.0) -> tuple:
    xi = np.zeros(n)
    xi[-1] = offset
    return tuple(xi)


def fit_expansion(family: str, sample_points, spec: QuadratureSpec | None = None, n: int = 6, ell: float = 2.0,
                  lam: float = 1e-2, amplitude: float = 1.0, rho: float = 0.25,
                  table: ConstantTable | None = None, tolerances: tuple[float, float] | None = None) -> ExpansionFit:
    """Fit the leading power law of a true integral against its closed-form prediction.

    interaction-vs-d: sample points are distances d between two bubbles of scale lam;
        the integral of V1^((n+2)/(n-2)) V2 against (omega_n/n) lam^(n-2) d^(2-n).
    curvature-vs-lambda: sample points are scales of a bubble centered on a hyperplane;
        the curvature integral over B(rho) against (2n/(n-2)) C01 C lam^ell.
    curvature-vs-eta: sample points are offsets eta of a bubble of scale lam; the increase
        of the curvature integral over its value on H against (2n/(n-2)) C03 C lam^(ell-2) eta^2.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    x = np.asarray(sorted(float(s) for s in sample_points))
    if len(x) < 4:
        raise ValueError("need at least 4 sample points")
    if np.any(x <= 0) or x[-1] / x[0] < 10.0 * (1 - 1e-12):
        raise ValueError("sample points must be positive and span at least one decade")
    tolerances = tolerances or DEFAULT_TOLERANCES[family]
    spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=1e-300 if family != "curvature-vs-eta" else 1e-30)
    workers = thread_count()

    if family == "interaction-vs-d":
        b1 = BubbleParams(lam, _at_origin(n))

        def one(d):
            xi2 = np.zeros(n)
            xi2[0] = d
            return interaction_integral(b1, BubbleParams(lam, tuple(xi2)), n, spec).value

        with ThreadPoolExecutor(workers) as ex:
            y = np.array(list(ex.map(one, x)))
        pred = sphere_area(n) / n * lam ** (n - 2)
        return fit_power_law(family, x, y, pred, -(n - 2.0), "max", tolerances)

    table = table or build_table(n, ell)
    factor = 2.0 * n / (n - 2)
    model = CurvatureModel("hyperplane", ell, amplitude, tube_radius=max(0.5, 2 * rho))

    def curv(lam_, off):
        return curvature_integral(BubbleParams(lam_, _at_origin(n, off)), model, rho, spec).value

    if family == "curvature-vs-lambda":
        with ThreadPoolExecutor(workers) as ex:
            y = np.array(list(ex.map(lambda s: curv(s, 0.0), x)))
        return fit_power_law(family, x, y, factor * table.C01 * amplitude, float(ell), "min", tolerances)

    base = curv(lam, 0.0)
    with ThreadPoolExecutor(workers) as ex:
        y = np.array(list(ex.map(lambda s: curv(lam, s) - base, x)))
    pred = factor * table.C03 * amplitude * lam ** (ell - 2)
    return fit_power_law(family, x, y, pred, 2.0, "min", tolerances)
