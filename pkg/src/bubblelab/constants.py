"""Constants of the leading-order expansion, their closed forms and the identities between them.

Notation: J(a, m) is the integral over R^n of |Y_n|^a (1+|Y|^2)^(-m). Every constant
below is a combination of such moments, optionally against the factor
(|Y|^2 - 1)/(|Y|^2 + 1) = 1 - 2/(1+|Y|^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import betaln, gammaln

from .quadrature import QuadratureSpec, integrate_axisym, integrate_radial, sphere_area

NAMES = ("C01", "C02", "C03", "C11", "C12", "C13", "C22", "C23")
CLOSED_ONLY = ("C02", "C12", "C22")

IDENTITY_SPEC = QuadratureSpec(rel_tol=1e-12, abs_tol=1e-16)


def bubble_mass(n: int, method: str = "closed", spec: QuadratureSpec | None = None) -> float:
    """V(n), the integral of (1+|Y|^2)^(-n) over R^n."""
    if n < 3:
        raise ValueError("n must be at least 3")
    if method == "closed":
        return float(sphere_area(n) * 0.5 * math.exp(betaln(0.5 * n, 0.5 * n)))
    if method == "quadrature":
        return integrate_radial(lambda r: (1 + r * r) ** (-float(n)), n, spec or IDENTITY_SPEC)
    raise ValueError(f"unknown method {method!r}")


def axial_moment(a: float, m: float, n: int) -> float:
    """Closed form of J(a, m): spherical moment of |u_n|^a times a Beta radial integral."""
    if not (a + n) / 2 < m:
        raise ValueError("moment diverges")
    log_ang = math.log(2.0) + 0.5 * (n - 1) * math.log(math.pi) + gammaln(0.5 * (a + 1)) - gammaln(0.5 * (n + a))
    log_rad = math.log(0.5) + betaln(0.5 * (a + n), m - 0.5 * (a + n))
    return float(math.exp(log_ang + log_rad))


def axial_moment_quad(a: float, m: float, n: int, spec: QuadratureSpec, with_factor: bool = False) -> float:
    """J(a, m) by 2D quadrature, optionally against (|Y|^2 - 1)/(|Y|^2 + 1)."""

    def g(r, th):
        r2 = r * r
        val = np.abs(r * np.cos(th)) ** a * (1 + r2) ** (-float(m))
        if with_factor:
            val = val * (r2 - 1) / (r2 + 1)
        return val

    return integrate_axisym(g, n, spec, r_breaks=(1.0,), theta_breaks=(0.5 * np.pi,))


def _check_range(n: int, ell: float) -> None:
    if n < 3:
        raise ValueError("n must be at least 3")
    if not 2 <= ell < n - 2:
        raise ValueError(f"ell = {ell} outside [2, n-2) for n = {n}")


def constant(name: str, n: int, ell: float, spec: QuadratureSpec | None = None, method: str = "quadrature") -> float:
    """One expansion constant. C02, C12, C22 are always closed form."""
    if name not in NAMES:
        raise ValueError(f"unknown constant {name!r}")
    if name not in CLOSED_ONLY:
        _check_range(n, ell)
    om = sphere_area(n)
    if name == "C02":
        return 0.5 * (n - 2) * om
    if name == "C12":
        return 0.5 * (n - 2) ** 2 * om
    if name == "C22":
        return float((n - 2) ** 2 * om)
    spec = spec or IDENTITY_SPEC
    pair = 0.5 * ell * (ell - 1)
    if method == "closed":
        J = lambda a, m: axial_moment(a, m, n)  # noqa: E731
        Jf = lambda a, m: axial_moment(a, m, n) - 2 * axial_moment(a, m + 1, n)  # noqa: E731
    elif method == "quadrature":
        J = lambda a, m: axial_moment_quad(a, m, n, spec)  # noqa: E731
        Jf = lambda a, m: axial_moment_quad(a, m, n, spec, with_factor=True)  # noqa: E731
    else:
        raise ValueError(f"unknown method {method!r}")
    if name == "C01":
        return (n - 2) / (2 * n) * J(ell, n)
    if name == "C03":
        return (n - 2) / (2 * n) * pair * J(ell - 2, n)
    if name == "C11":
        return 0.5 * (n - 2) * Jf(ell, n)
    if name == "C13":
        return 0.5 * (n - 2) * pair * Jf(ell - 2, n)
    return (n - 2) * ell * J(ell, n + 1)  # C23


@dataclass(frozen=True)
class ConstantTable:
    n: int
    ell: float
    omega_n: float
    V_n: float
    C01: float
    C02: float
    C03: float
    C11: float
    C12: float
    C13: float
    C22: float
    C23: float
    provenance: dict = field(default_factory=dict, compare=False)

    def rows(self) -> list[tuple[str, float, str]]:
        names = ("omega_n", "V_n") + NAMES
        return [(k, getattr(self, k), self.provenance.get(k, "closed-form")) for k in names]

    def to_dict(self) -> dict:
        return {"n": self.n, "ell": self.ell, "values": {k: v for k, v, _ in self.rows()},
                "provenance": {k: p for k, _, p in self.rows()}}


def build_table(n: int, ell: float, spec: QuadratureSpec | None = None, method: str = "quadrature") -> ConstantTable:
    _check_range(n, ell)
    values = {name: constant(name, n, ell, spec, method) for name in NAMES}
    prov = {name: ("closed-form" if name in CLOSED_ONLY or method == "closed" else "quadrature") for name in NAMES}
    prov.update(omega_n="closed-form", V_n="closed-form")
    return ConstantTable(n, ell, sphere_area(n), bubble_mass(n), provenance=prov, **values)


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    lhs: float
    rhs: float
    deviation: float
    tol: float
    passed: bool


@dataclass(frozen=True)
class IdentityReport:
    n: int
    ell: float
    checks: tuple[IdentityCheck, ...]
    info: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"n": self.n, "ell": self.ell, "passed": self.passed,
                "checks": [c.__dict__ for c in self.checks], "info": self.info}


def _rel(name, lhs, rhs, scale, tol) -> IdentityCheck:
    dev = abs(lhs - rhs) / abs(scale)
    return IdentityCheck(name, lhs, rhs, dev, tol, dev <= tol)


def check_identities(n: int, ell: float, tol: float = 1e-8, spec: QuadratureSpec | None = None) -> IdentityReport:
    """Check the linear relations between constants; every constant here comes from quadrature.

    Deviations are relative to the constant on the right-hand side, so that the
    vanishing of C13 at ell = 2 is measured against C03.
    """
    spec = spec or IDENTITY_SPEC
    t = build_table(n, ell, spec, "quadrature")
    c02_quad = 0.5 * n * (n - 2) * integrate_radial(lambda r: (1 + r * r) ** (-0.5 * (n + 2)), n, spec)
    checks = [
        _rel("C11 = ell*C01", t.C11, ell * t.C01, t.C01, tol),
        _rel("C13 = (ell-2)*C03", t.C13, (ell - 2) * t.C03, t.C03, tol),
        _rel("C23 = 2*C03", t.C23, 2 * t.C03, t.C03, tol),
        _rel("C12 = (n-2)*C02", t.C12, (n - 2) * t.C02, t.C02, tol),
        _rel("C22 = 2(n-2)*C02", t.C22, 2 * (n - 2) * t.C02, t.C02, tol),
        _rel("C02 closed = quadrature", t.C02, c02_quad, t.C02, tol),
        IdentityCheck("C11 > 0", t.C11, 0.0, 0.0, 0.0, t.C11 > 0),
    ]
    if ell == 2:
        checks.append(IdentityCheck("C13 = 0 at ell = 2", t.C13, 0.0, abs(t.C13), 1e-10, abs(t.C13) <= 1e-10))
    c01_plain = (n - 2) / (2 * n) * bubble_mass(n)
    info = {
        "C13/C03 measured": t.C13 / t.C03,
        "C13/C03 candidates": {"ell-2": ell - 2, "2(ell-2)": 2 * (ell - 2)},
        "C01 without |Y_n|^ell weight": c01_plain,
        "C11/C01 with unweighted C01": t.C11 / c01_plain,
    }
    return IdentityReport(n, ell, tuple(checks), info)
