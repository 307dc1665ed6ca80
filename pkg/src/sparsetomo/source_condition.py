"""Certificates linking a phantom to the range of the tomographic adjoint.

Rate guarantees for the reconstruction error hinge on the penalty gradient at
the ground truth being reachable through the measurement operator.  Two
notions are implemented here.  The strong form asks for an explicit sinogram
w with R^T w = M^T (M f)^[p-1] on a refined angle grid;
``build_strong_sc_phantom`` manufactures such a phantom from any starting
image by a Tikhonov projection onto the reachable set.  The approximate form
quantifies reachability statistically: ``verify_approx_sc`` measures how fast
the best q-power misfit decays as the number of sampled angles grows, which
should follow N^(-q/2).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .phantoms import Image
from .radon import (
    RadonOperator,
    Sinogram,
    make_operator,
    radon_adjoint,
    radon_forward,
    sample_angles,
)
from .regularizers import signed_power
from .solvers import FunctionObjective, sgp_minimize
from .transforms import CoeffStack, TransformSpec
from .transforms import adjoint as transform_adjoint
from .transforms import analysis as transform_analysis

__all__ = [
    "SourceElement",
    "ApproxSCReport",
    "build_strong_sc_phantom",
    "verify_approx_sc",
]


@dataclass(frozen=True)
class SourceElement:
    """Sinogram-shaped certificate w together with how well R^T w matches the
    penalty gradient of the phantom it was built for.

    ``residual_rel`` is ||R^T w - M^T (M f)^[p-1]||_2 / ||R^T w||_2; zero means
    the condition holds exactly.
    """

    w: np.ndarray
    residual_rel: float

    def __post_init__(self):
        object.__setattr__(
            self, "w", np.ascontiguousarray(np.asarray(self.w, dtype=np.float64).ravel())
        )
        if not np.isfinite(self.residual_rel) or self.residual_rel < 0.0:
            raise ValueError(f"residual_rel must be finite and >= 0, got {self.residual_rel}")


@dataclass(frozen=True)
class ApproxSCReport:
    """Decay measurements of the reachability functional over an angle grid."""

    beta: float
    N_values: list
    means: list
    fitted_exponent: float
    target_exponent: float
    samples: np.ndarray = field(repr=False)

    def to_csv(self, path):
        """Write one (N, k, value) row per cell plus a summary row."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["N", "k", "value"])
            for i, n in enumerate(self.N_values):
                for k in range(self.samples.shape[1]):
                    writer.writerow([n, k, repr(float(self.samples[i, k]))])
            writer.writerow(
                ["fit", repr(float(self.fitted_exponent)), repr(float(self.target_exponent))]
            )


def _adjoint_apply(op: RadonOperator, w_flat):
    sino = Sinogram(op.n_angles, op.n_dtc, w_flat.reshape(op.n_angles, op.n_dtc))
    return radon_adjoint(op, sino).values


def _forward_apply(op: RadonOperator, img_vals):
    return radon_forward(op, Image(op.side, img_vals)).values.ravel()


def _power_gradient(spec: TransformSpec, img_vals, p: float):
    """M^T (M f)^[p-1], the gradient of (1/p)||M f||_p^p."""
    coeffs = transform_analysis(spec, Image(spec.side, img_vals)).values
    powered = signed_power(coeffs, p - 1.0)
    return transform_adjoint(spec, CoeffStack(spec.sigma, spec.side, powered)).values


def build_strong_sc_phantom(f0, p, alpha_sc, refined, wavelet, cfg):
    """Turn ``f0`` into a nearby phantom whose penalty gradient lies in the
    range of the refined adjoint.

    The certificate solves the damped least-squares problem

        min_w  1/2 ||R^T w - M^T (M f0)^[p-1]||^2 + alpha_sc ||w||^2

    by scaled gradient projection; mapping its back-projection through the
    inverse signed power yields a phantom satisfying the condition exactly.
    Rescaling by the peak preserves it (with w scaled by peak^(1-p)), while
    the final clipping of negative pixels does not; ``residual_rel`` reports
    the damage, which is expected to stay within a few percent.

    Returns ``(f_dag, SourceElement)`` with f_dag ranging in [0, 1].
    """
    if not 1.0 < p < 2.0:
        raise ValueError(f"p must lie strictly between 1 and 2, got {p}")
    if alpha_sc <= 0.0:
        raise ValueError(f"alpha_sc must be positive, got {alpha_sc}")
    if wavelet.sigma != 1:
        raise ValueError(
            "the construction inverts the transform, which needs an orthonormal "
            f"basis (sigma == 1); got a {wavelet.kind} frame with sigma = {wavelet.sigma}"
        )
    if wavelet.side != f0.side or refined.side != f0.side:
        raise ValueError("phantom, transform and operator sides differ")

    target = _power_gradient(wavelet, f0.values, p)
    if float(np.linalg.norm(target)) == 0.0:
        raise ValueError("degenerate phantom: the penalty gradient vanishes")

    dim = refined.n_angles * refined.n_dtc

    def value(w):
        r = _adjoint_apply(refined, w) - target
        return 0.5 * float(r @ r) + alpha_sc * float(w @ w)

    def gradient(w):
        r = _adjoint_apply(refined, w) - target
        return _forward_apply(refined, r) + 2.0 * alpha_sc * w

    w, _ = sgp_minimize(
        FunctionObjective(value, gradient), "none", "identity", cfg, np.zeros(dim)
    )

    coeffs = transform_analysis(
        wavelet, Image(f0.side, _adjoint_apply(refined, w))
    ).values
    f_raw = transform_adjoint(
        wavelet, CoeffStack(1, f0.side, signed_power(coeffs, 1.0 / (p - 1.0)))
    ).values
    peak = float(f_raw.max())
    if peak <= 0.0:
        raise ValueError("degenerate phantom: construction produced no positive part")
    f_dag = np.maximum(f_raw / peak, 0.0)

    w_scaled = peak ** (1.0 - p) * w
    rt_w = _adjoint_apply(refined, w_scaled)
    rt_norm = float(np.linalg.norm(rt_w))
    if rt_norm == 0.0:
        raise ValueError("degenerate phantom: the certificate back-projects to zero")
    residual_rel = float(np.linalg.norm(rt_w - _power_gradient(wavelet, f_dag, p)) / rt_norm)
    return Image(f0.side, f_dag), SourceElement(w=w_scaled, residual_rel=residual_rel)


def verify_approx_sc(f_dag, transform, p, beta, N_list, K, master_seed, cfg):
    """Measure the reachability decay of ``f_dag`` under random angle draws.

    For each N in ``N_list`` and each of K repetitions, N angles are sampled
    and

        inf_w  (1/q) ||r - R_theta^T w||_q^q + beta/(2N) ||w||_2^2,
        r = M^T (M f_dag)^[p-1],  q = p/(p-1)

    is evaluated by scaled gradient projection.  Per-N sample means are fitted
    with a log-log line; an exponent near -q/2 indicates the phantom is usable
    for rate experiments at this p.  Every (N, k) cell seeds its own generator
    from ``(master_seed, N, k)``, so reports are reproducible cell by cell.
    """
    if not 1.0 < p < 2.0:
        raise ValueError(f"p must lie strictly between 1 and 2, got {p}")
    q = p / (p - 1.0)
    if q > 10.0:
        raise ValueError(
            f"conjugate exponent q = {q:.3g} exceeds 10: so close to p = 1 the "
            "q-power misfit drops below floating-point resolution and the decay "
            "cannot be verified"
        )
    if beta <= 0.0:
        raise ValueError(f"beta must be positive, got {beta}")
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    N_values = [int(n) for n in N_list]
    if len(N_values) < 2:
        raise ValueError("need at least two N values to fit a decay exponent")
    if any(n < 1 for n in N_values):
        raise ValueError("angle counts must be positive")

    r_target = _power_gradient(transform, f_dag.values, p)
    side = f_dag.side
    samples = np.zeros((len(N_values), K))
    for i, n in enumerate(N_values):
        for k in range(K):
            seed = np.random.SeedSequence((master_seed, n, k))
            op = make_operator(side, sample_angles(n, seed))
            bn = beta / float(n)

            def value(w, op=op, bn=bn):
                s = r_target - _adjoint_apply(op, w)
                return float(np.sum(np.abs(s) ** q)) / q + 0.5 * bn * float(w @ w)

            def gradient(w, op=op, bn=bn):
                s = r_target - _adjoint_apply(op, w)
                return -_forward_apply(op, signed_power(s, q - 1.0)) + bn * w

            w, _ = sgp_minimize(
                FunctionObjective(value, gradient),
                "none",
                "identity",
                cfg,
                np.zeros(op.n_angles * op.n_dtc),
            )
            samples[i, k] = value(w)

    means = samples.mean(axis=1)
    if not np.all(means > 0.0):
        raise ValueError("decay values vanished; the exponent fit is undefined")
    slope = float(np.polyfit(np.log(np.asarray(N_values, float)), np.log(means), 1)[0])
    return ApproxSCReport(
        beta=float(beta),
        N_values=N_values,
        means=[float(m) for m in means],
        fitted_exponent=slope,
        target_exponent=-q / 2.0,
        samples=samples,
    )
