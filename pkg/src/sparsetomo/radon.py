"""Discrete parallel-beam Radon transform with an exact algebraic adjoint.

Geometry. The image occupies [0,1]^2 with pixel size h = 1/side. For an angle
theta the detector axis is (cos t, sin t) through the image center and rays run
along (-sin t, cos t). The detector has n_dtc box bins spanning the image
diagonal sqrt(2), centered. Each bin is sampled by the ray through its center
and the line integral is computed by interpolating ray tracing: the ray is
stepped along its dominant axis one pixel row (or column) at a time, the
off-axis coordinate is interpolated linearly between the two neighboring pixel
centers, and each step contributes weight h/|dominant direction component|.

The adjoint scatters the very same interpolation weights, so the pair passes
dot-product tests to machine precision for any angle set.

Two computational backends share this geometry: a Cython kernel (default when
built) and a pure NumPy fallback. Both evaluate the identical per-step formula
u = u0 + t*slope in float64, so they agree to rounding error. Select with the
SPARSETOMO_BACKEND environment variable ("auto", "cython", "numpy") or the
`backend` argument of radon_forward/radon_adjoint.
"""

import math
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .phantoms import Image
from . import _radon_numpy

try:
    from . import _radon_cy
except ImportError:  # extension not built; NumPy fallback only
    _radon_cy = None

__all__ = [
    "AngleSet",
    "Sinogram",
    "RadonOperator",
    "sample_angles",
    "make_operator",
    "refined_operator",
    "radon_forward",
    "radon_adjoint",
    "add_noise",
    "operator_norm",
    "active_backend",
]


def _select_backend():
    choice = os.environ.get("SPARSETOMO_BACKEND", "auto")
    if choice not in ("auto", "cython", "numpy"):
        raise ValueError(f"SPARSETOMO_BACKEND must be auto|cython|numpy, got {choice!r}")
    if choice == "cython" and _radon_cy is None:
        raise ImportError("SPARSETOMO_BACKEND=cython but the extension is not built")
    if choice == "numpy" or _radon_cy is None:
        return "numpy"
    return "cython"


_DEFAULT_BACKEND = _select_backend()


def active_backend() -> str:
    """Name of the backend used when none is passed explicitly."""
    return _DEFAULT_BACKEND


def _impl(backend):
    name = backend or _DEFAULT_BACKEND
    if name == "cython":
        if _radon_cy is None:
            raise ImportError("cython backend requested but the extension is not built")
        return _radon_cy
    if name == "numpy":
        return _radon_numpy
    raise ValueError(f"unknown backend {name!r}")


@dataclass(frozen=True, eq=False)
class AngleSet:
    angles: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.angles, dtype=np.float64).ravel())
        if a.size == 0:
            raise ValueError("AngleSet needs at least one angle")
        if a.min() < 0.0 or a.max() >= np.pi:
            raise ValueError("angles must lie in [0, pi)")
        object.__setattr__(self, "angles", a)

    @property
    def count(self) -> int:
        return self.angles.size


@dataclass(frozen=True, eq=False)
class Sinogram:
    n_angles: int
    n_dtc: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.shape != (self.n_angles, self.n_dtc):
            raise ValueError(f"expected shape {(self.n_angles, self.n_dtc)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("sinogram values must be finite")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class RadonOperator:
    side: int
    n_dtc: int
    angle_set: AngleSet
    spacing: float
    offset: float = 0.0

    def __post_init__(self):
        if self.n_dtc < math.ceil(math.sqrt(2.0) * self.side):
            raise ValueError("detector must span the image diagonal: n_dtc >= ceil(sqrt(2)*side)")

    @property
    def n_angles(self) -> int:
        return self.angle_set.count

    @cached_property
    def _geometry(self):
        """Per-angle ray tables: (axis u1, slope f8, weight f8, u0 f8[n_angles, n_dtc]).

        axis 0: step over pixel rows, interpolate along columns; axis 1 swaps
        roles. u0 + t*slope is the interpolation coordinate (pixel index units)
        at step t. weight is the path length per step, h/|dominant component|.
        """
        side, n_dtc = self.side, self.n_dtc
        h = 1.0 / side
        th = self.angle_set.angles
        c, s = np.cos(th), np.sin(th)
        tau = (np.arange(n_dtc) - (n_dtc - 1) / 2.0) * self.spacing + self.offset

        axis = (np.abs(c) < np.abs(s)).astype(np.uint8)
        slope = np.where(axis == 0, -s / np.where(axis == 0, c, 1.0), -c / np.where(axis == 1, s, 1.0))
        wgt = h / np.where(axis == 0, np.abs(c), np.abs(s))
        # detector-axis foot point per (angle, cell), in pixel index units
        along = np.where(axis == 0, c, s)[:, None] * tau[None, :]
        cross = np.where(axis == 0, s, c)[:, None] * tau[None, :]
        u0 = (0.5 + along + (0.5 * h - 0.5 - cross) * slope[:, None]) / h - 0.5
        return (
            np.ascontiguousarray(axis),
            np.ascontiguousarray(slope),
            np.ascontiguousarray(wgt),
            np.ascontiguousarray(u0),
        )


def sample_angles(n: int, rng_seed, interval=(0.0, np.pi)) -> AngleSet:
    """n i.i.d. uniform angles in [lo, hi) subseteq [0, pi), deterministic per seed."""
    lo, hi = interval
    if n < 1:
        raise ValueError("need at least one angle")
    if not lo < hi:
        raise ValueError(f"empty interval {interval}")
    rng = np.random.default_rng(rng_seed)
    draws = lo + (hi - lo) * rng.random(n)
    return AngleSet(draws)


def make_operator(side: int, angle_set: AngleSet, n_dtc: int | None = None) -> RadonOperator:
    """Operator with the default detector: n_dtc = ceil(sqrt(2)*side) cells over the diagonal."""
    if n_dtc is None:
        n_dtc = math.ceil(math.sqrt(2.0) * side)
    spacing = math.sqrt(2.0) / n_dtc
    return RadonOperator(side=side, n_dtc=n_dtc, angle_set=angle_set, spacing=spacing)


def refined_operator(side: int, n_dtc: int | None, n_ref: int) -> RadonOperator:
    """Equispaced-angle operator (j*pi/n_ref, j = 0..n_ref-1) for source conditions."""
    if n_ref < 1:
        raise ValueError("n_ref must be >= 1")
    angles = AngleSet(np.arange(n_ref) * (np.pi / n_ref))
    return make_operator(side, angles, n_dtc)


def radon_forward(op: RadonOperator, img: Image, backend: str | None = None) -> Sinogram:
    if img.side != op.side:
        raise ValueError(f"operator side {op.side} != image side {img.side}")
    out = np.zeros((op.n_angles, op.n_dtc))
    _impl(backend).forward(img.as2d(), *op._geometry, out)
    return Sinogram(op.n_angles, op.n_dtc, out)


def radon_adjoint(op: RadonOperator, sino: Sinogram, backend: str | None = None) -> Image:
    if (sino.n_angles, sino.n_dtc) != (op.n_angles, op.n_dtc):
        raise ValueError(
            f"sinogram shape {(sino.n_angles, sino.n_dtc)} does not match operator "
            f"{(op.n_angles, op.n_dtc)}"
        )
    out = np.zeros((op.side, op.side))
    _impl(backend).adjoint(sino.values, *op._geometry, out)
    return Image(op.side, out)


def add_noise(sino: Sinogram, delta: float, rng_seed) -> Sinogram:
    """sino + delta * (i.i.d. standard normal), deterministic per seed."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    if delta == 0:
        return sino
    rng = np.random.default_rng(rng_seed)
    eps = rng.standard_normal(sino.values.shape)
    return Sinogram(sino.n_angles, sino.n_dtc, sino.values + delta * eps)


def operator_norm(op: RadonOperator, n_iter: int = 50, seed: int = 0) -> float:
    """Largest singular value of the operator, by power iteration on R^T R."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(op.side * op.side)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(n_iter):
        y = radon_adjoint(op, radon_forward(op, Image(op.side, x))).values
        lam = np.linalg.norm(y)
        if lam == 0.0:
            return 0.0
        x = y / lam
    return math.sqrt(lam)
