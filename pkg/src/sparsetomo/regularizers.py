"""Weighted p-homogeneous sparsity penalties over a transform.

R(f) = (alpha/p) * sum_l m_l^p |[Mf]_l|^p, optionally plus the indicator of
the nonnegative orthant. The module provides the value, the gradient (p > 1),
the p = 1 subgradient with the sign-selection rule for zero coefficients,
symmetric Bregman distances, and the convex conjugate of the coefficient-space
penalty needed by the dual inner solver.

Convention: alpha lives inside RegularizerSpec, so R here carries the
regularization weight. Reported Bregman distances divide alpha back out, i.e.
they measure the unweighted penalty (1/p)||Mf||_p^p; subgradient_p1 likewise
returns a subgradient of the unscaled penalty.
"""

from dataclasses import dataclass, field

import numpy as np

from .phantoms import Image
from .transforms import CoeffStack, TransformSpec, adjoint, analysis

__all__ = [
    "RegularizerSpec",
    "Subgradient",
    "signed_power",
    "reg_value",
    "reg_gradient",
    "subgradient_p1",
    "bregman_distance",
    "conjugate_value",
    "conjugate_on_coeffs",
    "conjugate_gradient",
    "penalty_on_coeffs",
]

_NONNEG_TOL = 1e-12
_ZERO_REL_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class RegularizerSpec:
    p: float
    alpha: float
    transform: TransformSpec
    nonneg: bool = False

    def __post_init__(self):
        if not 1.0 <= self.p <= 2.0:
            raise ValueError(f"p must be in [1, 2], got {self.p}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @property
    def q(self) -> float:
        """Holder conjugate exponent p/(p-1); +inf at p = 1."""
        return np.inf if self.p == 1.0 else self.p / (self.p - 1.0)


@dataclass(frozen=True, eq=False)
class Subgradient:
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64).ravel())
        if not np.all(np.isfinite(v)):
            raise ValueError("subgradient values must be finite")
        object.__setattr__(self, "values", v)


def signed_power(x, p: float):
    """Componentwise sign(x)*|x|^p (0 maps to 0 for every p > 0)."""
    if p <= 0:
        raise ValueError(f"p must be positive, got {p}")
    x = np.asarray(x, dtype=np.float64)
    return np.sign(x) * np.abs(x) ** p


def penalty_on_coeffs(spec: RegularizerSpec, coeff_values: np.ndarray) -> float:
    """(alpha/p) * sum m^p |c|^p on raw coefficient values."""
    m = spec.transform.weights
    c = np.abs(np.asarray(coeff_values, dtype=np.float64).ravel())
    return float(spec.alpha / spec.p * np.sum(m**spec.p * c**spec.p))


def reg_value(spec: RegularizerSpec, img: Image) -> float:
    """R(f), including the nonnegativity indicator when the spec asks for it."""
    if spec.nonneg and img.values.min() < -_NONNEG_TOL:
        return np.inf
    c = analysis(spec.transform, img).values
    return penalty_on_coeffs(spec, c)


def reg_gradient(spec: RegularizerSpec, img: Image) -> Subgradient:
    """alpha * M^T (m^p (Mf)^[p-1]); the smooth part only, so p > 1 required."""
    if spec.p == 1.0:
        raise ValueError("the p = 1 penalty is not differentiable; use subgradient_p1")
    c = analysis(spec.transform, img).values
    m = spec.transform.weights
    dual = spec.alpha * m**spec.p * signed_power(c, spec.p - 1.0)
    back = adjoint(spec.transform, CoeffStack(spec.transform.sigma, spec.transform.side, dual))
    return Subgradient(back.values)


def _burger_signs(c_primary, c_secondary):
    # sign of the primary coefficient; zeros borrow the secondary's sign
    thr = _ZERO_REL_TOL * np.max(np.abs(c_primary), initial=0.0)
    z = np.sign(c_primary)
    zero = np.abs(c_primary) <= thr
    z[zero] = np.sign(c_secondary)[zero]
    return z


def subgradient_p1(spec: RegularizerSpec, f: Image, f_tilde: Image) -> Subgradient:
    """M^T (m * zeta) with zeta_l = sign([Mf]_l), resolving zeros by sign([Mf~]_l).

    Coefficients with |c| <= 1e-12 * ||Mf||_inf count as zero; when both
    stacks vanish at l the sign is 0. The result is a subgradient of the
    unscaled penalty ||Mf||_{1,m}.
    """
    if spec.p != 1.0:
        raise ValueError(f"subgradient_p1 needs p = 1, got p = {spec.p}")
    cf = analysis(spec.transform, f).values
    ct = analysis(spec.transform, f_tilde).values
    zeta = _burger_signs(cf, ct)
    m = spec.transform.weights
    back = adjoint(spec.transform, CoeffStack(spec.transform.sigma, spec.transform.side, m * zeta))
    return Subgradient(back.values)


def bregman_distance(spec: RegularizerSpec, f: Image, f_tilde: Image) -> float:
    """Symmetric Bregman distance <r_f - r_f~, f - f~> of the unscaled penalty.

    For nonneg specs both images must be nonnegative (tolerance -1e-12); the
    zero subgradient of the indicator is chosen, so the value coincides with
    the unconstrained distance.
    """
    if spec.nonneg:
        worst = min(f.values.min(), f_tilde.values.min())
        if worst < -_NONNEG_TOL:
            raise ValueError(f"nonneg Bregman distance got a negative input (min {worst})")
    cf = analysis(spec.transform, f).values
    ct = analysis(spec.transform, f_tilde).values
    m = spec.transform.weights
    if spec.p == 1.0:
        rf = m * _burger_signs(cf, ct)
        rt = m * _burger_signs(ct, cf)
    else:
        rf = m**spec.p * signed_power(cf, spec.p - 1.0)
        rt = m**spec.p * signed_power(ct, spec.p - 1.0)
    val = float((rf - rt) @ (cf - ct))
    return max(val, 0.0)  # convexity; clamp fp round-off like -1e-17


def conjugate_value(spec: RegularizerSpec, dual: CoeffStack) -> float:
    """Convex conjugate of the coefficient penalty g(c) = (alpha/p)||c||_{p,m}^p.

    For p > 1: sum (alpha m^p / q) (|nu| / (alpha m^p))^q. For p = 1: 0 on the
    weighted box |nu_l| <= alpha m_l (with 1e-12 relative slack), +inf outside.
    """
    return conjugate_on_coeffs(spec, dual.values)


def conjugate_on_coeffs(spec: RegularizerSpec, dual_values: np.ndarray) -> float:
    """conjugate_value on raw coefficient arrays."""
    m = spec.transform.weights
    nu = np.abs(np.asarray(dual_values, dtype=np.float64).ravel())
    if spec.p == 1.0:
        radius = spec.alpha * m
        return 0.0 if np.all(nu <= radius * (1.0 + 1e-12)) else np.inf
    q = spec.q
    scale = spec.alpha * m**spec.p
    ratio = nu / scale
    # for p near 1 the exponent q is huge and far-out points overflow; +inf is
    # the honest value there (astronomically large), so just silence the flag
    with np.errstate(over="ignore"):
        return float(np.sum(scale / q * ratio**q))


def conjugate_gradient(spec: RegularizerSpec, dual_values: np.ndarray) -> np.ndarray:
    """Gradient of the conjugate: sign(nu) (|nu|/(alpha m^p))^(q-1); p > 1 only.

    Overflowed entries are clipped to +-1e300: the direction survives and no
    infinities leak into dot products downstream.
    """
    if spec.p == 1.0:
        raise ValueError("the p = 1 conjugate is an indicator; it has no gradient")
    m = spec.transform.weights
    scale = spec.alpha * m**spec.p
    nu = np.asarray(dual_values, dtype=np.float64).ravel()
    with np.errstate(over="ignore"):
        g = signed_power(nu / scale, spec.q - 1.0)
    return np.clip(g, -1e300, 1e300)
