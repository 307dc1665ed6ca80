"""Sparsifying transforms: identity, orthonormal 2D Haar wavelet, and a
cone-adapted shearlet frame, each with an exact algebraic adjoint.

The shearlet system is built in the 2D frequency domain. Scales are separated
by a telescoping family of Meyer-type radial tapers whose amplitudes sum to 1
exactly; each scale band is split into directional subbands by squared-cosine
windows in the shear coordinate u (u = ky/kx on the horizontal frequency cone,
u = 2 - kx/ky on the vertical one, so u lives on a circle of circumference 4
and identifies antipodal directions). All filters are real and even, so every
subband map is self-adjoint and M^T M acts as multiplication by the spectrum
S(xi) = sum of squared filters, which gives exact frame bounds. The optional
Parseval normalization divides each filter by sqrt(S), making the frame tight.

Coefficients are stacked as sigma planes of side^2 values; the wavelet packs
all its subbands into a single plane (standard pyramid layout), so sigma = 1
and the map is orthonormal.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .phantoms import Image

__all__ = [
    "TransformSpec",
    "CoeffStack",
    "make_transform",
    "analysis",
    "adjoint",
    "frame_bounds",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class CoeffStack:
    sigma: int
    side: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64).ravel())
        if v.size != self.sigma * self.side * self.side:
            raise ValueError(f"expected {self.sigma * self.side**2} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "values", v)

    def plane(self, k: int) -> np.ndarray:
        """(side, side) view of subband plane k."""
        n2 = self.side * self.side
        return self.values[k * n2 : (k + 1) * n2].reshape(self.side, self.side)

    def subband_index(self, i: int):
        """Flat index -> (subband plane, position within the plane)."""
        return divmod(int(i), self.side * self.side)


@dataclass(frozen=True, eq=False)
class TransformSpec:
    kind: str  # identity | wavelet | shearlet
    side: int
    levels: int
    sigma: int
    weights: np.ndarray = field(repr=False)
    parseval: bool = False

    def __post_init__(self):
        if self.kind not in ("identity", "wavelet", "shearlet"):
            raise ValueError(f"unsupported transform kind: {self.kind!r}")
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64).ravel())
        if w.size != self.sigma * self.side * self.side:
            raise ValueError(f"weights length {w.size} != sigma*side^2 = {self.sigma * self.side**2}")
        if not np.all(w > 0):
            raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "weights", w)

    @cached_property
    def _filters(self):
        if self.kind != "shearlet":
            raise AttributeError("filters exist only for shearlet specs")
        filt, labels = _shearlet_filters(self.side, self.levels)
        if self.parseval:
            spec2 = (filt**2).sum(axis=0)
            filt = filt / np.sqrt(spec2)[None]
        return filt, labels

    @property
    def subband_labels(self):
        """Per-plane tags: ('lowpass',) or ('band', scale, shear)."""
        if self.kind == "shearlet":
            return self._filters[1]
        return (("all",),) if self.kind == "identity" else (("pyramid",),)

    @cached_property
    def scale_indices(self):
        """Per-coefficient dyadic scale |lambda| (0 = coarsest), flat sigma*side^2."""
        return _scale_map(self.kind, self.side, self.levels)


# ------------------------------------------------------------------ factory


def _scale_map(kind, side, levels):
    n2 = side * side
    if kind == "identity":
        return np.zeros(n2, dtype=np.int64)
    if kind == "wavelet":
        s = np.zeros((side, side), dtype=np.int64)
        m = side
        for d in range(1, levels + 1):  # d = 1 is the finest detail band
            half = m // 2
            lvl = levels - d + 1
            s[:half, half:m] = lvl
            s[half:m, :m] = lvl
            m = half
        return s.ravel()
    # shearlet: plane 0 is the low pass; scale-j planes get index j+1
    per_scale = [1] + [4 * 2**j for j in range(levels)]
    idx = np.concatenate([np.full(c * n2, j, dtype=np.int64) for j, c in enumerate(per_scale)])
    return idx


def make_transform(
    kind: str,
    side: int,
    levels: int | None = None,
    weight_mode: str = "uniform",
    rho: float = 0.0,
    parseval: bool = False,
) -> TransformSpec:
    """Build a transform bound to a grid side.

    levels: wavelet decomposition depth (default log2(side) - 2) or shearlet
    scale count (default 3). weight_mode 'uniform' gives m = 1; 'besov' gives
    m = 2^(rho*|lambda|) with |lambda| the per-coefficient scale index.
    """
    if kind == "identity":
        levels = 0
        sigma = 1
    elif kind == "wavelet":
        if levels is None:
            levels = int(math.log2(side)) - 2
        if levels < 1:
            raise ValueError(f"wavelet needs levels >= 1, got {levels}")
        if side % (1 << levels) != 0:
            raise ValueError(f"side {side} not divisible by 2^levels = {1 << levels}")
        sigma = 1
    elif kind == "shearlet":
        if levels is None:
            levels = 3
        if levels < 1:
            raise ValueError(f"shearlet needs levels >= 1, got {levels}")
        if side < 32:
            raise ValueError(f"shearlet needs side >= 32, got {side}")
        if side % 2:
            raise ValueError("shearlet needs an even side")
        sigma = 1 + sum(4 * 2**j for j in range(levels))
        if parseval and weight_mode != "uniform":
            raise ValueError("parseval normalization expects uniform weights")
    else:
        raise ValueError(f"unsupported transform kind: {kind!r}")

    if weight_mode == "uniform":
        weights = np.ones(sigma * side * side)
    elif weight_mode == "besov":
        weights = np.exp2(rho * _scale_map(kind, side, levels).astype(np.float64))
    else:
        raise ValueError(f"unsupported weight_mode: {weight_mode!r}")
    if parseval and kind != "shearlet":
        raise ValueError("parseval option applies to the shearlet frame only")
    return TransformSpec(kind, side, levels, sigma, weights, parseval)


# ---------------------------------------------------------------- shearlets


def _meyer_nu(t):
    # smooth ramp with nu(t) + nu(1-t) = 1
    return t**4 * (35.0 - 84.0 * t + 70.0 * t**2 - 20.0 * t**3)


def _taper(rho, a):
    # radial lowpass amplitude: 1 on [0, a/2], smooth descent, 0 beyond a
    s = (2.0 * rho / a) - 1.0
    mid = np.cos(0.5 * np.pi * _meyer_nu(np.clip(s, 0.0, 1.0)))
    return np.where(s <= 0.0, 1.0, np.where(s >= 1.0, 0.0, mid))


def _angular(u, j, m):
    # squared-cosine shear window v(2^j u - m), wrapped on the period-4 circle
    t = np.ldexp(u, j) - m
    period = 2.0 ** (j + 2)
    t = (t + period / 2.0) % period - period / 2.0
    at = np.abs(t)
    win = np.cos(0.5 * np.pi * _meyer_nu(np.clip(at, 0.0, 1.0)))
    return np.where(at >= 1.0, 0.0, win)


def _shearlet_filters(side, scales):
    """Half-spectrum filter stack (sigma, side, side//2+1) and subband labels."""
    n = side
    ky = (np.fft.fftfreq(n) * n)[:, None]
    kx = np.arange(n // 2 + 1)[None, :]
    nyq = n / 2.0
    rho = np.sqrt(kx**2 + ky**2) / nyq
    horiz = kx >= np.abs(ky)
    u = np.where(
        horiz,
        ky / np.where(kx == 0, 1.0, kx),
        2.0 - kx / np.where(ky == 0, 1.0, ky),
    )

    cuts = [2.0 ** (j - scales) for j in range(scales)]  # e.g. 1/8, 1/4, 1/2
    tapers = [_taper(rho, a) for a in cuts]
    bands = [tapers[j + 1] - tapers[j] for j in range(scales - 1)]
    bands.append(1.0 - tapers[-1])  # top band catches everything to the corners

    planes = [tapers[0]]
    labels = [("lowpass",)]
    for j in range(scales):
        for m in range(-(2**j), 3 * 2**j):
            planes.append(bands[j] * _angular(u, j, m))
            labels.append(("band", j, m))
    filt = np.ascontiguousarray(np.array(planes))

    # Make the self-conjugate Nyquist column even in ky so the effective
    # real-space filters are exactly symmetric; averaging the squares keeps
    # the per-scale angular partition summing to 1.
    mirror = (n - np.arange(n)) % n
    col = filt[:, :, n // 2]
    filt[:, :, n // 2] = np.sqrt(0.5 * (col**2 + col[:, mirror] ** 2))
    return filt, tuple(labels)


def mtm_spectrum(spec: TransformSpec) -> np.ndarray:
    """Eigenvalues of M^T M on the half frequency grid (shearlet only)."""
    filt, _ = spec._filters
    return (filt**2).sum(axis=0)


def _shearlet_analysis(spec, img2d):
    filt, _ = spec._filters
    g = np.fft.rfft2(img2d)
    coef = np.fft.irfft2(g[None] * filt, s=img2d.shape, axes=(-2, -1))
    return coef.reshape(spec.sigma, -1).ravel()


def _shearlet_adjoint(spec, planes):
    filt, _ = spec._filters
    g = np.fft.rfft2(planes, axes=(-2, -1))
    acc = (g * filt).sum(axis=0)
    return np.fft.irfft2(acc, s=(spec.side, spec.side))


# ------------------------------------------------------------------ wavelet


def _haar_analysis(img2d, levels):
    work = img2d.copy()
    m = work.shape[0]
    for _ in range(levels):
        block = work[:m, :m]
        half = m // 2
        ev, od = block[:, 0::2], block[:, 1::2]
        lo, hi = (ev + od) / _SQRT2, (ev - od) / _SQRT2
        block[:, :half] = lo
        block[:, half:] = hi
        ev, od = block[0::2, :], block[1::2, :]
        lo, hi = (ev + od) / _SQRT2, (ev - od) / _SQRT2
        block[:half, :] = lo
        block[half:, :] = hi
        m = half
    return work


def _haar_synthesis(coef2d, levels):
    work = coef2d.copy()
    side = work.shape[0]
    for lev in reversed(range(levels)):
        m = side >> lev
        block = work[:m, :m]
        half = m // 2
        lo, hi = block[:half, :].copy(), block[half:, :].copy()
        block[0::2, :] = (lo + hi) / _SQRT2
        block[1::2, :] = (lo - hi) / _SQRT2
        lo, hi = block[:, :half].copy(), block[:, half:].copy()
        block[:, 0::2] = (lo + hi) / _SQRT2
        block[:, 1::2] = (lo - hi) / _SQRT2
    return work


# ----------------------------------------------------------------- dispatch


def analysis(spec: TransformSpec, img: Image) -> CoeffStack:
    """Coefficients Mf of the image under the transform."""
    if img.side != spec.side:
        raise ValueError(f"spec is bound to side {spec.side}, image has side {img.side}")
    if spec.kind == "identity":
        vals = img.values.copy()
    elif spec.kind == "wavelet":
        vals = _haar_analysis(img.as2d(), spec.levels).ravel()
    else:
        vals = _shearlet_analysis(spec, img.as2d())
    return CoeffStack(spec.sigma, spec.side, vals)


def adjoint(spec: TransformSpec, coeffs: CoeffStack) -> Image:
    """Exact transpose M^T applied to a coefficient stack."""
    if coeffs.side != spec.side or coeffs.sigma != spec.sigma:
        raise ValueError(
            f"stack dims ({coeffs.sigma}, {coeffs.side}) do not match spec "
            f"({spec.sigma}, {spec.side})"
        )
    if spec.kind == "identity":
        vals = coeffs.values.copy()
    elif spec.kind == "wavelet":
        # orthonormal, so the transpose is the inverse pyramid synthesis
        vals = _haar_synthesis(coeffs.values.reshape(spec.side, spec.side), spec.levels).ravel()
    else:
        planes = coeffs.values.reshape(spec.sigma, spec.side, spec.side)
        vals = _shearlet_adjoint(spec, planes).ravel()
    return Image(spec.side, vals)


def frame_bounds(spec: TransformSpec, side: int, iters: int = 200):
    """(A, B) with A|f|^2 <= |Mf|^2 <= B|f|^2: extreme eigenvalues of M^T M.

    B by power iteration, A by inverse power iteration with CG solves.
    Raises RuntimeError when the Rayleigh quotients have not settled after
    `iters` steps.
    """
    if side != spec.side:
        raise ValueError(f"spec is bound to side {spec.side}, asked about side {side}")
    if spec.kind == "identity":
        return 1.0, 1.0
    n2 = side * side

    def mtm(v):
        return adjoint(spec, analysis(spec, Image(side, v))).values

    rng = np.random.default_rng(7)

    def iterate(apply_op, label):
        x = rng.standard_normal(n2)
        x /= np.linalg.norm(x)
        prev = np.inf
        for _ in range(iters):
            y = apply_op(x)
            lam = float(np.linalg.norm(y))
            x = y / lam
            if abs(lam - prev) <= 1e-8 * lam:
                return float(x @ mtm(x))  # Rayleigh quotient of the eigvec
            prev = lam
        if abs(lam - prev) <= 1e-5 * lam:
            return float(x @ mtm(x))
        raise RuntimeError(f"{label} power iteration did not converge in {iters} steps")

    upper = iterate(mtm, "largest-eigenvalue")

    from scipy.sparse.linalg import LinearOperator, cg

    op = LinearOperator((n2, n2), matvec=mtm)

    def inv(v):
        y, info = cg(op, v, rtol=1e-10, atol=0.0, maxiter=500)
        if info != 0:
            raise RuntimeError(f"CG solve inside inverse iteration failed (info={info})")
        return y

    lower = iterate(inv, "smallest-eigenvalue")
    if lower > upper and lower - upper <= 1e-9 * upper:
        lower = upper  # near-isometric map, estimates collide at rounding level
    if not 0.0 < lower <= upper:
        raise RuntimeError(f"inconsistent frame bounds ({lower}, {upper})")
    return lower, upper
