"""Scaled gradient projection and a variable-metric inexact line-search method.

Both solvers share the same building blocks: a diagonal scaling ``d`` with
entries in [1/L, L], adaptive Barzilai-Borwein steplengths computed in the
scaled metric, and a monotone Armijo backtracking line search.

``sgp_minimize`` handles smooth objectives over simple convex sets (projection
is a componentwise clip for every supported constraint).  ``vmila_minimize``
handles the composite tomography objective

    J(f) = 1/(2N) ||R f - g||^2 + (alpha/p) ||M f||_{p,m}^p  (+ indicator f >= 0)

by taking scaled forward-backward steps whose proximal subproblem is solved
inexactly in its dual formulation; the inner loop stops as soon as the primal
model decrease h falls below ``eta`` times the dual bound H, which keeps the
overall iteration provably descending without an exact prox.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .phantoms import Image
from .radon import RadonOperator, Sinogram, radon_adjoint, radon_forward
from .regularizers import (
    RegularizerSpec,
    conjugate_gradient,
    conjugate_on_coeffs,
    penalty_on_coeffs,
    signed_power,
)
from .transforms import CoeffStack
from .transforms import adjoint as transform_adjoint
from .transforms import analysis as transform_analysis

__all__ = [
    "SolverError",
    "SolverConfig",
    "SolverTrace",
    "CompositeProblem",
    "FunctionObjective",
    "make_constraint",
    "bb_steplength",
    "scaling_matrix",
    "sgp_minimize",
    "vmila_minimize",
    "composite_objective",
    "objective_value",
]

_MAX_BACKTRACKS = 50


class SolverError(RuntimeError):
    """Raised when an iteration cannot continue (line-search or inner failure)."""


@dataclass(frozen=True)
class SolverConfig:
    """Shared solver knobs; the defaults run every experiment in this package."""

    eta: float = 1e-5
    lambda_min: float = 1e-5
    lambda_max: float = 1e5
    lambda0: float = 1.3
    L_scale: float = 1e10
    max_outer: int = 500
    max_inner: int = 500
    tol_rel_obj: float = 1e-8
    armijo_beta: float = 0.5
    armijo_sigma: float = 1e-4
    bb_tau: float = 0.5
    warm_restart: bool = True

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"eta must be in (0, 1], got {self.eta}")
        if not 0.0 < self.lambda_min <= self.lambda0 <= self.lambda_max:
            raise ValueError(
                "need 0 < lambda_min <= lambda0 <= lambda_max, got "
                f"({self.lambda_min}, {self.lambda0}, {self.lambda_max})"
            )
        if self.L_scale <= 1.0:
            raise ValueError(f"L_scale must be > 1, got {self.L_scale}")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.tol_rel_obj < 0.0:
            raise ValueError("tol_rel_obj must be >= 0")
        if not 0.0 < self.armijo_beta < 1.0:
            raise ValueError(f"armijo_beta must be in (0, 1), got {self.armijo_beta}")
        if not 0.0 < self.armijo_sigma < 1.0:
            raise ValueError(f"armijo_sigma must be in (0, 1), got {self.armijo_sigma}")
        if not 0.0 < self.bb_tau <= 1.0:
            raise ValueError(f"bb_tau must be in (0, 1], got {self.bb_tau}")


@dataclass
class SolverTrace:
    """Per-iteration history of an SGP or VMILA run.

    ``h_model`` / ``H_dual`` hold the inexact-prox stopping pair for VMILA
    iterations and NaN for plain SGP steps.
    """

    objective: list = field(default_factory=list)
    steplength: list = field(default_factory=list)
    mu: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)
    feasibility: list = field(default_factory=list)
    h_model: list = field(default_factory=list)
    H_dual: list = field(default_factory=list)
    converged: bool = False
    stop_reason: str = ""

    def __len__(self):
        return len(self.objective)

    def _append(self, obj, lam, mu, inner, feas, h, big_h):
        self.objective.append(float(obj))
        self.steplength.append(float(lam))
        self.mu.append(float(mu))
        self.inner_iters.append(int(inner))
        self.feasibility.append(float(feas))
        self.h_model.append(float(h))
        self.H_dual.append(float(big_h))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "iteration",
                    "objective",
                    "steplength",
                    "mu",
                    "inner_iters",
                    "feasibility",
                    "h_model",
                    "H_dual",
                ]
            )
            for i in range(len(self.objective)):
                writer.writerow(
                    [
                        i + 1,
                        self.objective[i],
                        self.steplength[i],
                        self.mu[i],
                        self.inner_iters[i],
                        self.feasibility[i],
                        self.h_model[i],
                        self.H_dual[i],
                    ]
                )


class FunctionObjective:
    """Wrap plain callables as a solver objective.

    ``split_positive`` is only needed for the gradient-split scaling; it must
    return the nonnegative part of a gradient decomposition at the iterate.
    """

    def __init__(self, value, gradient, split_positive=None):
        self.value = value
        self.gradient = gradient
        if split_positive is not None:
            self.split_positive = split_positive


class _NoneConstraint:
    kind = "none"

    def project(self, x):
        return x

    def violation(self, x):
        return 0.0


class _NonnegConstraint:
    kind = "nonneg"

    def project(self, x):
        return np.maximum(x, 0.0)

    def violation(self, x):
        return max(0.0, -float(np.min(x)))


class _NonposConstraint:
    kind = "nonpos"

    def project(self, x):
        return np.minimum(x, 0.0)

    def violation(self, x):
        return max(0.0, float(np.max(x)))


class _BoxInfConstraint:
    kind = "box_inf"

    def __init__(self, radius):
        r = np.asarray(radius, dtype=np.float64)
        if np.any(r < 0.0) or not np.all(np.isfinite(r)):
            raise ValueError("box radius must be finite and >= 0")
        self.radius = r

    def project(self, x):
        return np.clip(x, -self.radius, self.radius)

    def violation(self, x):
        return max(0.0, float(np.max(np.abs(x) - self.radius)))


class _BlockConstraint:
    """Independent constraints on contiguous slices of the variable."""

    kind = "blocks"

    def __init__(self, blocks):
        self.blocks = list(blocks)  # [(length, constraint), ...]

    def project(self, x):
        out = np.empty_like(x)
        pos = 0
        for length, sub in self.blocks:
            out[pos : pos + length] = sub.project(x[pos : pos + length])
            pos += length
        return out

    def violation(self, x):
        worst = 0.0
        pos = 0
        for length, sub in self.blocks:
            worst = max(worst, sub.violation(x[pos : pos + length]))
            pos += length
        return worst


def make_constraint(kind, radius=None):
    """Constraint object for ``sgp_minimize``: none | nonneg | nonpos | box_inf."""
    if kind == "none":
        return _NoneConstraint()
    if kind == "nonneg":
        return _NonnegConstraint()
    if kind == "nonpos":
        return _NonposConstraint()
    if kind == "box_inf":
        if radius is None:
            raise ValueError("box_inf needs a radius")
        return _BoxInfConstraint(radius)
    raise ValueError(f"unknown constraint kind {kind!r}")


def _resolve_constraint(constraint):
    if isinstance(constraint, str):
        return make_constraint(constraint)
    if isinstance(constraint, tuple) and len(constraint) == 2:
        return make_constraint(constraint[0], constraint[1])
    if hasattr(constraint, "project") and hasattr(constraint, "violation"):
        return constraint
    raise ValueError(f"cannot interpret constraint {constraint!r}")


def _split_ratio(numer, denom, big_l):
    # d_i = clip(numer_i / denom_i, 1/L, L), with the 0/0 ratio set to 1
    numer = np.asarray(numer, dtype=np.float64)
    denom = np.asarray(denom, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = numer / denom
    ratio = np.where(np.isnan(ratio), 1.0, ratio)
    return np.clip(ratio, 1.0 / big_l, big_l)


def scaling_matrix(iterate: Image, operator: RadonOperator, L: float) -> np.ndarray:
    """Diagonal of the gradient-split scaling: clip(f_i / [R^T R f]_i, 1/L, L)."""
    if L <= 1.0:
        raise ValueError(f"L must be > 1, got {L}")
    denom = radon_adjoint(operator, radon_forward(operator, iterate)).values
    return _split_ratio(iterate.values, denom, L)


def bb_steplength(s, y, scaling, bounds, tau=0.5, bb2_memory=None):
    """Adaptive Barzilai-Borwein steplength in the metric diag(1/scaling).

    BB1 = <s, s/d> / <s, y> and BB2 = <s, y> / <y, d y>.  When the two rules
    disagree strongly (BB2/BB1 < tau) the smallest of the last three BB2
    values is used, otherwise BB1; the result is clipped to ``bounds``.  A
    non-positive curvature <s, y> falls back to the upper bound.
    """
    lam_min, lam_max = bounds
    if not 0.0 < lam_min <= lam_max:
        raise ValueError(f"invalid steplength bounds {bounds}")
    s = np.asarray(s, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    d = np.asarray(scaling, dtype=np.float64).ravel()
    sy = float(s @ y)
    if not np.isfinite(sy) or sy <= 0.0:
        return float(lam_max)
    bb1 = float(s @ (s / d)) / sy
    bb2 = sy / float(y @ (y * d))
    if bb2_memory is not None:
        bb2_memory.append(bb2)
        del bb2_memory[:-3]
        pool = bb2_memory
    else:
        pool = [bb2]
    lam = min(pool) if bb2 / bb1 < tau else bb1
    return float(min(max(lam, lam_min), lam_max))


def _sgp_loop(value_fn, grad_fn, constraint, scaling_fn, cfg, x0, trace=None):
    x = constraint.project(np.asarray(x0, dtype=np.float64).ravel().copy())
    fx = float(value_fn(x))
    if not np.isfinite(fx):
        raise SolverError("objective is not finite at the starting point")
    g = np.asarray(grad_fn(x), dtype=np.float64).ravel()
    if not np.all(np.isfinite(g)):
        raise SolverError("gradient is not finite at the starting point")
    lam = cfg.lambda0
    bb2_mem = []
    s = y = None
    streak = 0
    reason, converged = "max_outer", False
    for _ in range(cfg.max_outer):
        d = scaling_fn(x, g)
        if s is not None:
            lam = bb_steplength(
                s, y, d, (cfg.lambda_min, cfg.lambda_max), cfg.bb_tau, bb2_mem
            )
        z = constraint.project(x - lam * (d * g))
        desc = z - x
        gd = float(g @ desc)
        if gd >= 0.0:
            # the projected step no longer descends: fixed point up to rounding
            reason, converged = "stationary", True
            break
        mu = 1.0
        cand, fc = x, fx
        for _ in range(_MAX_BACKTRACKS):
            cand = x + mu * desc
            fc = float(value_fn(cand))
            if np.isfinite(fc) and fc <= fx + cfg.armijo_sigma * mu * gd:
                break
            mu *= cfg.armijo_beta
        else:
            raise SolverError(f"line search failed after {_MAX_BACKTRACKS} backtracks")
        gnew = np.asarray(grad_fn(cand), dtype=np.float64).ravel()
        if not np.all(np.isfinite(gnew)):
            raise SolverError("gradient became non-finite")
        s = cand - x
        y = gnew - g
        fprev, x, fx, g = fx, cand, fc, gnew
        if trace is not None:
            trace._append(fx, lam, mu, 0, constraint.violation(x), np.nan, np.nan)
        rel = abs(fprev - fx) / max(abs(fx), 1e-300)
        streak = streak + 1 if rel < cfg.tol_rel_obj else 0
        if streak >= 3:
            reason, converged = "tol_rel_obj", True
            break
    return x, converged, reason


def sgp_minimize(objective, constraint, scaling, cfg, x0):
    """Minimize a smooth objective over a clip-projectable set by scaled
    gradient projection with adaptive BB steplengths.

    ``objective`` exposes ``value(x)`` and ``gradient(x)``; with
    ``scaling="gradient_split"`` it must also expose ``split_positive(x)``.
    ``constraint`` is a name ("none", "nonneg", "nonpos"), a ("box_inf", r)
    pair, or a constraint object.  Returns ``(solution, trace)``.
    """
    cons = _resolve_constraint(constraint)
    if scaling == "identity":
        scaling_fn = lambda x, g: np.ones_like(x)
    elif scaling == "gradient_split":
        split = getattr(objective, "split_positive", None)
        if split is None:
            raise ValueError("gradient_split scaling needs objective.split_positive")
        scaling_fn = lambda x, g: _split_ratio(x, split(x), cfg.L_scale)
    else:
        raise ValueError(f"unknown scaling {scaling!r}")
    trace = SolverTrace()
    x, converged, reason = _sgp_loop(
        objective.value, objective.gradient, cons, scaling_fn, cfg, x0, trace
    )
    trace.converged = converged
    trace.stop_reason = reason
    return x, trace


@dataclass(frozen=True, eq=False)
class CompositeProblem:
    """Data-fit term 1/(2N)||R f - g||^2 plus a coefficient penalty."""

    operator: RadonOperator
    data: Sinogram
    reg: RegularizerSpec

    def __post_init__(self):
        op, data = self.operator, self.data
        if (data.n_angles, data.n_dtc) != (op.n_angles, op.n_dtc):
            raise ValueError(
                f"data shape {(data.n_angles, data.n_dtc)} does not match the "
                f"operator {(op.n_angles, op.n_dtc)}"
            )
        if self.reg.transform.side != op.side:
            raise ValueError(
                f"transform side {self.reg.transform.side} != operator side {op.side}"
            )


def _penalty_gradient(reg, coeff_values):
    # alpha * M^T(m^p (Mf)^[p-1]) given the coefficients Mf; p > 1 only
    t = reg.transform
    dual = reg.alpha * t.weights**reg.p * signed_power(coeff_values, reg.p - 1.0)
    return transform_adjoint(t, CoeffStack(t.sigma, t.side, dual)).values


def composite_objective(problem: CompositeProblem):
    """Smooth objective handle for a composite problem with p > 1.

    Exposes value/gradient/split_positive so ``sgp_minimize`` can run the same
    problem that ``vmila_minimize`` solves (the constraint is passed to the
    solver separately).  Forward projections of recently seen iterates are
    cached so an accepted line-search trial is not projected twice.
    """
    op, reg = problem.operator, problem.reg
    if reg.p <= 1.0:
        raise ValueError("smooth objective requires p > 1")
    t = reg.transform
    g = problem.data.values
    n_ang = float(op.n_angles)
    cache = []

    def proj(x):
        for xc, rc in cache:
            if xc is x:
                return rc
        r = radon_forward(op, Image(op.side, x)).values
        cache.append((x, r))
        del cache[:-4]
        return r

    def value(x):
        x = np.asarray(x, dtype=np.float64).ravel()
        resid = proj(x) - g
        coeffs = transform_analysis(t, Image(op.side, x)).values
        return 0.5 / n_ang * float(np.sum(resid * resid)) + penalty_on_coeffs(
            reg, coeffs
        )

    def gradient(x):
        x = np.asarray(x, dtype=np.float64).ravel()
        resid = proj(x) - g
        back = radon_adjoint(op, Sinogram(op.n_angles, op.n_dtc, resid)).values / n_ang
        coeffs = transform_analysis(t, Image(op.side, x)).values
        return back + _penalty_gradient(reg, coeffs)

    def split_positive(x):
        x = np.asarray(x, dtype=np.float64).ravel()
        rx = proj(x)
        return radon_adjoint(op, Sinogram(op.n_angles, op.n_dtc, rx)).values

    return FunctionObjective(value, gradient, split_positive)


def objective_value(problem: CompositeProblem, img: Image) -> float:
    """Full objective at an image, infinite outside the feasible set."""
    op, reg = problem.operator, problem.reg
    if reg.nonneg and float(img.values.min()) < -1e-12:
        return np.inf
    resid = radon_forward(op, img).values - problem.data.values
    val = 0.5 / float(op.n_angles) * float(np.sum(resid * resid))
    coeffs = transform_analysis(reg.transform, img).values
    return val + penalty_on_coeffs(reg, coeffs)


def _inexact_prox(
    reg, f, coeffs_f, g0, z, lam, d, cfg, nu0, j_scale, nu0_scale=1.0, lam_in0=None
):
    """Solve the scaled proximal subproblem at f inexactly through its dual.

    Minimizes h(v) = <g0, v - f> + 1/(2 lam) ||v - f||^2_D + Gamma1(v) -
    Gamma1(f) over the feasible set, where D = diag(1/d).  Only the analysis
    coefficients are dualized; for a given coefficient dual nu the minimization
    over the image is a separable quadratic whose solution is the closed form
    v = max(0, z - lam d M^T nu) (clip dropped without the constraint), so the
    nonnegativity never enters the dual iteration.  Iterates nu with
    projected BB gradient steps until h(v) <= eta * H(nu), H being the dual
    lower bound.  Returns (v, Mv, h, H, inner_iters, nu, lam_in).

    ``nu0_scale`` adapts a warm-started dual point to a changed prox
    steplength: near optimality M^T nu tracks D(z - v)/lam, so scaling nu by
    lam_old/lam_new keeps the restart close to the new dual optimum.
    ``lam_in0`` seeds the dual steplength, typically with the value the
    previous subproblem settled on; the dual curvature changes little between
    consecutive outer iterations, so this skips the initial backtracking.
    """
    t = reg.transform
    side = t.side
    coeff_dim = t.sigma * side * side
    nonneg = reg.nonneg

    if reg.p == 1.0:
        cons = _BoxInfConstraint(reg.alpha * t.weights)
    else:
        # Trust region for the dual iterates.  The optimum satisfies
        # nu* = alpha m^p (Mv*)^[p-1], so |nu*| <= alpha m^p exp(500/q) holds
        # for any remotely plausible coefficient magnitude (|Mv*| < e^{500/p}),
        # while the bound keeps (|nu|/(alpha m^p))^q <= e^500 finite even for
        # the huge conjugate exponents that arise as p -> 1.
        radius = reg.alpha * t.weights**reg.p * float(np.exp(500.0 / reg.q))
        cons = _BoxInfConstraint(radius)

    if nu0 is not None and nu0.size == coeff_dim:
        nu = cons.project(nu0_scale * nu0)
    else:
        nu = np.zeros(coeff_dim)

    gamma1_f = penalty_on_coeffs(reg, coeffs_f)
    c_quad = 0.5 * lam * float(g0 @ (d * g0))

    def apply_mt(nu_vec):
        return transform_adjoint(t, CoeffStack(t.sigma, side, nu_vec)).values

    def gstar(nu_vec):
        if reg.p == 1.0:
            return 0.0  # projection keeps nu inside the box
        return conjugate_on_coeffs(reg, nu_vec)

    def gstar_grad(nu_vec):
        if reg.p == 1.0:
            return np.zeros_like(nu_vec)
        return conjugate_gradient(reg, nu_vec)

    if reg.p == 1.0:
        gstar_curv = None
    else:
        sc_vec = reg.alpha * t.weights**reg.p
        q_curv = reg.q - 1.0

        def gstar_curv(nu_vec):
            # second derivative of the conjugate, (q-1)/s |nu/s|^(q-2); for
            # p near 1 this explodes close to |nu| = s and the identity-metric
            # steps crawl, so it feeds the diagonal scaling below
            with np.errstate(over="ignore"):
                c = q_curv / sc_vec * np.abs(nu_vec / sc_vec) ** (reg.q - 2.0)
            return np.clip(c, 0.0, 1e300)

    def primal_point(u):
        vu = z - lam * (d * u)
        return np.maximum(vu, 0.0) if nonneg else vu

    def psi(v_vec, nu_vec):
        # negative dual; the eliminated image block contributes its minimum
        # value (||v - z||^2_D - ||z||^2_D) / (2 lam) in factored form
        with np.errstate(over="ignore"):
            quad = 0.5 / lam * float(((v_vec - z) * (v_vec + z) / d).sum())
            return quad + gstar(nu_vec)

    ones = np.ones(coeff_dim)
    quad_base = max(lam * float(d.mean()), 1e-30)
    bounds = (cfg.lambda_min, cfg.lambda_max)
    u = apply_mt(nu)
    v = primal_point(u)
    psi_val = psi(v, nu)
    if nu.any():
        # a rescaled restart can land in the steep far zone of the conjugate;
        # fall back to the cold start whenever it scores better
        v0 = primal_point(np.zeros_like(z))
        psi0 = psi(v0, np.zeros(coeff_dim))
        if not psi_val <= psi0:
            nu, u, v, psi_val = np.zeros(coeff_dim), np.zeros_like(z), v0, psi0
    lam_in = cfg.lambda0 if lam_in0 is None else lam_in0
    mem = []
    s_in = y_in = grad_old = None
    coeffs_v = None
    no_progress = 0

    for inner in range(1, cfg.max_inner + 1):
        if coeffs_v is None:
            coeffs_v = transform_analysis(t, Image(side, v)).values
        grad = -coeffs_v + gstar_grad(nu)
        if gstar_curv is None:
            scal = ones
        else:
            scal = np.clip(1.0 / (quad_base + gstar_curv(nu)), 1e-10, 1e10)
            scal /= scal.max()
        if s_in is not None:
            y_in = grad - grad_old
            lam_in = bb_steplength(s_in, y_in, scal, bounds, cfg.bb_tau, mem)
        with np.errstate(over="ignore"):
            z_nu = cons.project(nu - lam_in * (scal * grad))
            d_nu = z_nu - nu
            gd = float(grad @ d_nu)
        stalled = gd >= 0.0
        if not stalled:
            u_z = apply_mt(z_nu)
            mu_in = 1.0
            for _ in range(_MAX_BACKTRACKS):
                nu_t = nu + mu_in * d_nu
                u_t = u + mu_in * (u_z - u)
                v_t = primal_point(u_t)
                psi_t = psi(v_t, nu_t)
                if np.isfinite(psi_t) and psi_t <= psi_val + cfg.armijo_sigma * mu_in * gd:
                    break
                mu_in *= cfg.armijo_beta
            else:
                raise SolverError(
                    f"dual line search failed after {_MAX_BACKTRACKS} backtracks"
                )
            grad_old = grad
            s_in = nu_t - nu
            # dual value pinned at the arithmetic floor counts as a stall
            if psi_val - psi_t <= 1e-15 * max(1.0, abs(psi_t)):
                no_progress += 1
            else:
                no_progress = 0
            nu, u, v, psi_val = nu_t, u_t, v_t, psi_t
            coeffs_v = None
        if coeffs_v is None:
            coeffs_v = transform_analysis(t, Image(side, v)).values
        dv = v - f
        h = (
            float(g0 @ dv)
            + 0.5 / lam * float(dv @ (dv / d))
            + penalty_on_coeffs(reg, coeffs_v)
            - gamma1_f
        )
        big_h = -psi_val - c_quad - gamma1_f
        if h <= cfg.eta * big_h + 1e-14 * j_scale or stalled or no_progress >= 3:
            return v, coeffs_v, h, big_h, inner, nu, lam_in
    if -cfg.tol_rel_obj * j_scale * min(lam, 1.0) <= h <= 1e-12 * j_scale:
        # budget exhausted but the model decrease is already below the
        # objective tolerance: the iterate is numerically stationary and the
        # certificate cannot tighten further in floating point (the model
        # decrease scales with lam, hence the lam factor)
        return v, coeffs_v, h, big_h, cfg.max_inner, nu, lam_in
    raise SolverError(
        f"inexact prox did not reach the eta criterion in {cfg.max_inner} iterations"
    )


def vmila_minimize(problem: CompositeProblem, cfg: SolverConfig, x0=None):
    """Minimize the composite objective by variable-metric forward-backward
    steps with an inexact dual prox and Armijo damping.

    Returns ``(solution, trace)`` with the solution as an Image.  With p = 2
    the penalty is smooth and folded into the gradient step, so the prox
    reduces to the feasibility projection in closed form.
    """
    op, reg = problem.operator, problem.reg
    t = reg.transform
    n2 = op.side * op.side
    n_ang = float(op.n_angles)
    g_data = problem.data.values
    p2_mode = reg.p == 2.0

    if x0 is None:
        f = np.zeros(n2)
    else:
        f = np.asarray(x0.values if isinstance(x0, Image) else x0, dtype=np.float64)
        f = f.ravel().copy()
        if f.size != n2:
            raise ValueError(f"x0 has {f.size} entries, expected {n2}")
    if reg.nonneg:
        if float(f.min(initial=0.0)) < -1e-12:
            raise ValueError("x0 must be feasible for the nonnegativity constraint")
        f = np.maximum(f, 0.0)

    rt_g = radon_adjoint(op, problem.data).values

    def smooth_state(fvec, coeffs):
        """(Rf, R^T R f, smooth value, smooth gradient) at fvec."""
        rf = radon_forward(op, Image(op.side, fvec)).values
        rtrf = radon_adjoint(op, Sinogram(op.n_angles, op.n_dtc, rf)).values
        resid = rf - g_data
        val = 0.5 / n_ang * float(np.sum(resid * resid))
        grad = (rtrf - rt_g) / n_ang
        if p2_mode:
            val += penalty_on_coeffs(reg, coeffs)
            grad = grad + _penalty_gradient(reg, coeffs)
        return rf, rtrf, val, grad

    def gamma1(coeffs):
        return 0.0 if p2_mode else penalty_on_coeffs(reg, coeffs)

    coeffs_f = transform_analysis(t, Image(op.side, f)).values
    rf, rtrf, val_s, g0 = smooth_state(f, coeffs_f)
    obj = val_s + gamma1(coeffs_f)
    if not np.isfinite(obj):
        raise SolverError("objective is not finite at the starting point")

    trace = SolverTrace()
    nu = None
    lam = cfg.lambda0
    lam_prev = cfg.lambda0
    lam_cap = cfg.lambda_max
    lam_inner = None
    bb2_mem = []
    s_out = y_out = None
    streak = 0
    reason, converged = "max_outer", False

    for _ in range(cfg.max_outer):
        j_scale = max(1.0, abs(obj))
        d = _split_ratio(f, rtrf, cfg.L_scale)
        if s_out is not None:
            lam = bb_steplength(
                s_out, y_out, d, (cfg.lambda_min, cfg.lambda_max), cfg.bb_tau, bb2_mem
            )
        lam = min(lam, lam_cap)
        if p2_mode:
            z = f - lam * (d * g0)
            v = np.maximum(z, 0.0) if reg.nonneg else z
            dv = v - f
            h_val = float(g0 @ dv) + 0.5 / lam * float(dv @ (dv / d))
            big_h = h_val  # exact prox: the dual bound is attained
            n_inner = 1
            coeffs_v = transform_analysis(t, Image(op.side, v)).values
        else:
            while True:
                z = f - lam * (d * g0)
                warm = nu if cfg.warm_restart else None
                try:
                    v, coeffs_v, h_val, big_h, n_inner, nu, lam_inner = _inexact_prox(
                        reg, f, coeffs_f, g0, z, lam, d, cfg, warm, j_scale,
                        nu0_scale=lam_prev / lam,
                        lam_in0=lam_inner if cfg.warm_restart else None,
                    )
                    break
                except SolverError:
                    # the dual subproblem hardens with the steplength; any
                    # value in [lambda_min, lambda_max] is admissible, so back
                    # off and cap later proposals before giving up
                    if lam <= cfg.lambda_min * (1.0 + 1e-12):
                        raise
                    lam = max(lam / 10.0, cfg.lambda_min)
                    lam_cap = lam
            lam_cap = min(lam_cap * 2.0, cfg.lambda_max)
        lam_prev = lam
        desc = v - f
        if h_val >= -0.1 * cfg.tol_rel_obj * j_scale * min(lam, 1.0):
            # the model decrease, normalized for the step size, is below the
            # objective tolerance: no step from here can change the objective
            # at the tracked resolution
            reason, converged = "stationary", True
            break
        if not p2_mode and n_inner >= cfg.max_inner:
            # the prox returned at its budget, which it only does when the
            # remaining decrease is inside the tolerance band
            reason, converged = "prox_budget", True
            break
        rv = radon_forward(op, Image(op.side, v)).values
        mu = 1.0
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            f_t = f + mu * desc
            rf_t = rf + mu * (rv - rf)
            coeffs_t = coeffs_f + mu * (coeffs_v - coeffs_f)
            resid = rf_t - g_data
            val_t = 0.5 / n_ang * float(np.sum(resid * resid))
            if p2_mode:
                val_t += penalty_on_coeffs(reg, coeffs_t)
            obj_t = val_t + gamma1(coeffs_t)
            if np.isfinite(obj_t) and obj_t <= obj + cfg.armijo_sigma * mu * h_val:
                accepted = True
                break
            mu *= cfg.armijo_beta
        if not accepted:
            raise SolverError(f"line search failed after {_MAX_BACKTRACKS} backtracks")
        f = f + mu * desc
        coeffs_f = transform_analysis(t, Image(op.side, f)).values
        rf, rtrf, val_s, g_new = smooth_state(f, coeffs_f)
        obj_prev, obj = obj, val_s + gamma1(coeffs_f)
        s_out = mu * desc
        y_out = g_new - g0
        g0 = g_new
        feas = max(0.0, -float(np.min(f))) if reg.nonneg else 0.0
        trace._append(obj, lam, mu, n_inner, feas, h_val, big_h)
        rel = abs(obj_prev - obj) / max(abs(obj), 1e-300)
        streak = streak + 1 if rel < cfg.tol_rel_obj else 0
        if streak >= 3:
            reason, converged = "tol_rel_obj", True
            break

    trace.converged = converged
    trace.stop_reason = reason
    return Image(op.side, f), trace
