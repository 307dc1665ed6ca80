"""Convergence-rate experiment harness.

Runs the randomized-angle decay experiments under the two noise regimes,
averages Bregman distances and squared relative errors over noise
realizations, fits monomial rates on log-log axes, studies the p -> 1 limit
on shared data, and compares regularization strategies by reconstruction
error.  All randomness is derived from per-cell seeds so any single (N, k)
cell can be reproduced bit-exactly in isolation.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .phantoms import Image, generate_phantom
from .radon import add_noise, make_operator, radon_forward, refined_operator, sample_angles
from .regularizers import RegularizerSpec, bregman_distance
from .solvers import (
    CompositeProblem,
    SolverConfig,
    SolverError,
    composite_objective,
    sgp_minimize,
    vmila_minimize,
)
from .transforms import TransformSpec

log = logging.getLogger(__name__)

REGIMES = ("fixed_noise", "decreasing_noise")

# Grid-search stand-in for hand tuning the rate constant c_alpha: candidates
# swept at the median N over a few spare realizations, best mean Bregman wins.
PILOT_GRID = tuple(float(c) for c in np.logspace(-4.0, -1.0, 7))
PILOT_REALIZATIONS = 3


# ------------------------------------------------------------------ types


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a decay run needs besides the ground-truth image.

    ``regime`` selects the noise/penalty schedules: "fixed_noise" keeps
    delta = 0.01 * peak constant and sets alpha = c_alpha * N^(-1/3);
    "decreasing_noise" uses delta = 0.02 * N_min * peak / N and
    alpha = c_alpha / N.  ``peak`` is the sup-norm of the refined-grid
    sinogram of the ground truth (``n_ref`` equispaced angles).

    ``N_step`` = 0 (default) means a log-spaced grid of ``n_points`` values
    between N_min and N_max; a positive step gives an arithmetic grid.
    ``c_alpha`` = None defers to :func:`pilot_c_alpha`.  ``c_delta_policy``
    is "auto" for the schedules above, or a numeric literal that replaces
    the constant (fixed regime: delta itself; decreasing: the numerator).
    """

    regime: str
    p: float
    transform: TransformSpec
    side: int
    N_min: int = 16
    N_max: int = 64
    N_step: int = 0
    n_points: int = 8
    K: int = 10
    c_alpha: float | None = None
    c_delta_policy: str = "auto"
    nonneg: bool = True
    master_seed: int = 0
    n_ref: int = 180
    solver: SolverConfig = field(default_factory=lambda: SolverConfig(tol_rel_obj=1e-6))

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if not 1.0 <= self.p <= 2.0:
            raise ValueError(f"p must lie in [1, 2], got {self.p}")
        if self.transform.side != self.side:
            raise ValueError(
                f"transform is bound to side {self.transform.side}, config says {self.side}"
            )
        if not 1 <= self.N_min <= self.N_max:
            raise ValueError(f"need 1 <= N_min <= N_max, got {self.N_min}..{self.N_max}")
        if self.N_step < 0:
            raise ValueError("N_step must be >= 0")
        if self.N_step == 0 and self.n_points < (2 if self.N_min < self.N_max else 1):
            raise ValueError("log-spaced grid needs n_points >= 2 to span N_min..N_max")
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.c_alpha is not None and not self.c_alpha > 0:
            raise ValueError("c_alpha must be positive when given")
        _resolve_c_delta(self.c_delta_policy)
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")
        if self.n_ref < 1:
            raise ValueError("n_ref must be >= 1")


@dataclass(frozen=True)
class DecayRecord:
    """One solved (N, k) cell.

    ``seed`` alone determines the cell's angles and noise.  Failed cells
    carry status "failed" and NaN metrics; they are excluded from summaries.
    """

    regime: str
    p: float
    transform_kind: str
    N: int
    k: int
    seed: int
    alpha: float
    delta: float
    bregman: float
    rel_err_sq: float
    objective_final: float
    status: str

    def __post_init__(self):
        if self.status not in ("ok", "failed"):
            raise ValueError(f"unknown status {self.status!r}")
        if self.status == "ok":
            if not (math.isfinite(self.bregman) and self.bregman >= 0.0):
                raise ValueError(f"bregman must be finite and >= 0, got {self.bregman}")
            if not (math.isfinite(self.rel_err_sq) and self.rel_err_sq >= 0.0):
                raise ValueError(f"rel_err_sq must be finite and >= 0, got {self.rel_err_sq}")


@dataclass(frozen=True)
class RateFit:
    """Best monomial approximation c * N^beta of a positive curve."""

    c: float
    beta_exp: float
    r_squared: float

    def __post_init__(self):
        for name in ("c", "beta_exp", "r_squared"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")


@dataclass(frozen=True)
class SummaryRow:
    """Per-N sample statistics over the successful realizations."""

    N: int
    n_ok: int
    mean_bregman: float
    std_bregman: float
    mean_rel_err_sq: float
    std_rel_err_sq: float


@dataclass(frozen=True)
class ComparisonResult:
    """Per-strategy error curves on shared data."""

    labels: tuple[str, ...]
    records: dict[str, list[DecayRecord]]
    table: list[tuple[str, int, float]]  # (label, N, mean rel_err_sq)
    best_at_n_max: str


# ------------------------------------------------------------------ schedules


def _resolve_c_delta(policy: str) -> float | None:
    """"auto" -> None (use the regime rule); numeric literal -> that constant."""
    if policy == "auto":
        return None
    try:
        value = float(policy)
    except ValueError:
        raise ValueError(
            f"c_delta_policy must be 'auto' or a numeric literal, got {policy!r}"
        ) from None
    if not value > 0:
        raise ValueError("explicit c_delta must be positive")
    return value


def n_grid(cfg: ExperimentConfig) -> list[int]:
    """The angle-count grid: arithmetic if N_step > 0, else log-spaced."""
    if cfg.N_step > 0:
        return list(range(cfg.N_min, cfg.N_max + 1, cfg.N_step))
    if cfg.N_min == cfg.N_max:
        return [cfg.N_min]
    raw = np.geomspace(cfg.N_min, cfg.N_max, cfg.n_points)
    vals, seen = [], set()
    for v in np.rint(raw).astype(int):
        if v not in seen:
            seen.add(v)
            vals.append(int(v))
    return vals


def noise_peak(cfg: ExperimentConfig, f_dag: Image) -> float:
    """Sup-norm of the refined-grid sinogram of the ground truth."""
    refined = refined_operator(cfg.side, None, cfg.n_ref)
    peak = float(np.abs(radon_forward(refined, f_dag).values).max())
    if peak <= 0:
        raise ValueError("ground truth has an identically zero sinogram")
    return peak


def delta_for(cfg: ExperimentConfig, peak: float, N: int) -> float:
    """Noise level at N under the config's regime."""
    const = _resolve_c_delta(cfg.c_delta_policy)
    if cfg.regime == "fixed_noise":
        return const if const is not None else 0.01 * peak
    c_delta = const if const is not None else 0.02 * cfg.N_min * peak
    return c_delta / N


def alpha_for(cfg: ExperimentConfig, c_alpha: float, N: int) -> float:
    """Penalty weight at N under the config's regime."""
    if cfg.regime == "fixed_noise":
        return c_alpha * float(N) ** (-1.0 / 3.0)
    return c_alpha / N


def cell_seed(master_seed: int, N: int, k: int) -> int:
    """Stable 64-bit seed for one grid cell; determines angles and noise."""
    return int(np.random.SeedSequence((master_seed, N, k)).generate_state(1, np.uint64)[0])


# ------------------------------------------------------------------ cells


def _solve(problem: CompositeProblem, solver_cfg: SolverConfig):
    if problem.reg.p == 2.0:
        cons = "nonneg" if problem.reg.nonneg else "none"
        x0 = np.zeros(problem.operator.side ** 2)
        x, trace = sgp_minimize(composite_objective(problem), cons, "gradient_split",
                                solver_cfg, x0)
        return Image(problem.operator.side, x), trace
    return vmila_minimize(problem, solver_cfg)


def run_cell(cfg: ExperimentConfig, f_dag: Image, N: int, k: int,
             alpha: float, delta: float) -> DecayRecord:
    """Draw the cell's angles and noise, solve, and measure the errors."""
    seed = cell_seed(cfg.master_seed, N, k)
    angles = sample_angles(N, np.random.SeedSequence((seed, 1)))
    op = make_operator(cfg.side, angles)
    data = add_noise(radon_forward(op, f_dag), delta, np.random.SeedSequence((seed, 2)))
    reg = RegularizerSpec(cfg.p, alpha, cfg.transform, nonneg=cfg.nonneg)
    problem = CompositeProblem(op, data, reg)
    try:
        img, trace = _solve(problem, cfg.solver)
    except SolverError as exc:
        log.warning("cell N=%d k=%d (p=%g, alpha=%.3e) failed: %s", N, k, cfg.p, alpha, exc)
        return DecayRecord(cfg.regime, cfg.p, cfg.transform.kind, N, k, seed,
                           alpha, delta, math.nan, math.nan, math.nan, "failed")
    breg = bregman_distance(reg, img, f_dag)
    diff = img.values - f_dag.values
    rel = float(diff @ diff) / float(f_dag.values @ f_dag.values)
    return DecayRecord(cfg.regime, cfg.p, cfg.transform.kind, N, k, seed,
                       alpha, delta, breg, rel, float(trace.objective[-1]), "ok")


def _cell_worker(task):
    # top-level so ProcessPoolExecutor can pickle it
    return run_cell(*task)


def _check_ground_truth(cfg: ExperimentConfig, f_dag: Image):
    if f_dag.side != cfg.side:
        raise ValueError(f"ground truth side {f_dag.side} != config side {cfg.side}")
    if float(f_dag.values.min()) < 0:
        raise ValueError("ground truth must be nonnegative")
    if not f_dag.values.any():
        raise ValueError("ground truth is identically zero")


# ------------------------------------------------------------------ pilot


def pilot_c_alpha(cfg: ExperimentConfig, f_dag: Image, peak: float | None = None,
                  grid=PILOT_GRID, realizations: int = PILOT_REALIZATIONS) -> float:
    """Pick c_alpha by coarse grid search at the median N.

    Each candidate is scored by the mean Bregman distance over a few
    realizations drawn outside the main k-range (k = K, K+1, ...), so the
    frozen choice never reuses the cells of the full run.  Candidates whose
    every realization fails score infinity.
    """
    _check_ground_truth(cfg, f_dag)
    if peak is None:
        peak = noise_peak(cfg, f_dag)
    ns = n_grid(cfg)
    n_med = ns[len(ns) // 2]
    delta = delta_for(cfg, peak, n_med)
    best_c, best_score = None, math.inf
    for c in grid:
        alpha = alpha_for(cfg, float(c), n_med)
        vals = [
            rec.bregman
            for j in range(realizations)
            if (rec := run_cell(cfg, f_dag, n_med, cfg.K + j, alpha, delta)).status == "ok"
        ]
        score = float(np.mean(vals)) if vals else math.inf
        log.info("pilot c_alpha=%.3e: mean Bregman %.5g over %d/%d cells",
                 c, score, len(vals), realizations)
        if score < best_score:
            best_c, best_score = float(c), score
    if best_c is None or not math.isfinite(best_score):
        raise SolverError("every pilot candidate failed; widen the grid or loosen the solver")
    return best_c


# ------------------------------------------------------------------ decay


def run_decay_experiment(cfg: ExperimentConfig, f_dag: Image, jobs: int = 1) -> list[DecayRecord]:
    """Solve every (N, k) cell of the grid and record the error metrics.

    Resolves c_alpha through the pilot search when the config leaves it
    unset.  ``jobs`` > 1 distributes cells over a process pool; results are
    returned in grid order either way.
    """
    _check_ground_truth(cfg, f_dag)
    peak = noise_peak(cfg, f_dag)
    c_alpha = cfg.c_alpha if cfg.c_alpha is not None else pilot_c_alpha(cfg, f_dag, peak)
    tasks = [
        (cfg, f_dag, N, k, alpha_for(cfg, c_alpha, N), delta_for(cfg, peak, N))
        for N in n_grid(cfg)
        for k in range(cfg.K)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_cell_worker, tasks))
    return [_cell_worker(t) for t in tasks]


def summarize_decay(records: list[DecayRecord]) -> list[SummaryRow]:
    """Per-N means and standard deviations over the successful cells."""
    by_n: dict[int, list[DecayRecord]] = {}
    for rec in records:
        by_n.setdefault(rec.N, []).append(rec)
    rows = []
    for N in sorted(by_n):
        ok = [r for r in by_n[N] if r.status == "ok"]
        if not ok:
            rows.append(SummaryRow(N, 0, math.nan, math.nan, math.nan, math.nan))
            continue
        breg = np.array([r.bregman for r in ok])
        rel = np.array([r.rel_err_sq for r in ok])
        ddof = 1 if len(ok) > 1 else 0
        rows.append(SummaryRow(
            N, len(ok),
            float(breg.mean()), float(breg.std(ddof=ddof)),
            float(rel.mean()), float(rel.std(ddof=ddof)),
        ))
    return rows


def fit_monomial(points) -> RateFit:
    """Least-squares line on log-log axes: points (N, value) -> c * N^beta."""
    pts = list(points)
    if len(pts) < 2:
        raise ValueError("need at least two points to fit a rate")
    n = np.array([float(p[0]) for p in pts])
    y = np.array([float(p[1]) for p in pts])
    if np.any(n <= 0) or np.any(y <= 0):
        raise ValueError("monomial fit needs positive N and positive values")
    ln, ly = np.log(n), np.log(y)
    beta, log_c = np.polyfit(ln, ly, 1)
    resid = ly - (beta * ln + log_c)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return RateFit(float(np.exp(log_c)), float(beta), float(r2))


def fit_from_records(records: list[DecayRecord]) -> RateFit:
    """Rate fit on the per-N mean Bregman distances."""
    rows = [r for r in summarize_decay(records) if r.n_ok > 0]
    return fit_monomial([(r.N, r.mean_bregman) for r in rows])


# ------------------------------------------------------------------ p -> 1


def gamma_convergence_study(base_cfg: ExperimentConfig, p_list,
                            shared_seed: int, f_dag: Image | None = None):
    """Distance of the l^p solutions to the l^1 solution on one shared draw.

    All solves see identical angles, noise, and alpha (the base config's
    schedule at N = N_max); only p varies.  Returns [(p, rel_distance)] in
    the order given.  ``p_list`` must decrease strictly within [1, 2]; the
    p = 1 baseline run is implicit, and listing 1 itself reproduces it
    (distance exactly zero, by determinism).
    """
    ps = [float(p) for p in p_list]
    if not ps:
        raise ValueError("p_list is empty")
    if any(not 1.0 <= p <= 2.0 for p in ps):
        raise ValueError(f"p_list must lie in [1, 2], got {ps}")
    if any(a <= b for a, b in zip(ps, ps[1:])):
        raise ValueError(f"p_list must be strictly decreasing, got {ps}")
    if f_dag is None:
        f_dag = generate_phantom("plant_like", base_cfg.side, base_cfg.master_seed)
    _check_ground_truth(base_cfg, f_dag)

    N = base_cfg.N_max
    peak = noise_peak(base_cfg, f_dag)
    delta = delta_for(base_cfg, peak, N)
    cfg_p1 = replace(base_cfg, p=1.0)
    c_alpha = base_cfg.c_alpha
    if c_alpha is None:
        c_alpha = pilot_c_alpha(cfg_p1, f_dag, peak)
    alpha = alpha_for(base_cfg, c_alpha, N)

    seed = int(shared_seed)
    angles = sample_angles(N, np.random.SeedSequence((seed, 1)))
    op = make_operator(base_cfg.side, angles)
    data = add_noise(radon_forward(op, f_dag), delta, np.random.SeedSequence((seed, 2)))

    def solve(p):
        reg = RegularizerSpec(p, alpha, base_cfg.transform, nonneg=base_cfg.nonneg)
        img, _ = _solve(CompositeProblem(op, data, reg), base_cfg.solver)
        return img.values

    f1 = solve(1.0)
    norm1 = float(np.linalg.norm(f1))
    if norm1 == 0.0:
        raise SolverError("the p=1 reference solution is identically zero")
    return [(p, float(np.linalg.norm(solve(p) - f1)) / norm1) for p in ps]


# ------------------------------------------------------------------ comparison


def strategy_label(cfg: ExperimentConfig) -> str:
    return f"{cfg.transform.kind}-p{cfg.p:g}"


def compare_regularizers(cfg_list, f_dag: Image | None = None,
                         jobs: int = 1) -> ComparisonResult:
    """Error curves for several regularization strategies on shared data.

    The configs must agree on everything that shapes the data (side, grid,
    K, regime, noise policy, master seed, n_ref) and differ in (transform,
    p); identical per-cell seeds then give every strategy the same angles
    and noise, so errors are paired across strategies.
    """
    cfgs = list(cfg_list)
    if not cfgs:
        raise ValueError("cfg_list is empty")
    ref = cfgs[0]
    for cfg in cfgs[1:]:
        for name in ("side", "regime", "N_min", "N_max", "N_step", "n_points",
                     "K", "master_seed", "n_ref", "c_delta_policy"):
            if getattr(cfg, name) != getattr(ref, name):
                raise ValueError(f"strategies disagree on {name}; data would not be shared")
    labels = [strategy_label(cfg) for cfg in cfgs]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate strategy labels: {labels}")
    if f_dag is None:
        f_dag = generate_phantom("plant_like", ref.side, ref.master_seed)

    records: dict[str, list[DecayRecord]] = {}
    for label, cfg in zip(labels, cfgs):
        log.info("comparison strategy %s", label)
        records[label] = run_decay_experiment(cfg, f_dag, jobs=jobs)

    table = []
    for label in labels:
        for row in summarize_decay(records[label]):
            table.append((label, row.N, row.mean_rel_err_sq))
    n_max = max(N for _, N, _ in table)
    finals = {lbl: val for lbl, N, val in table if N == n_max and math.isfinite(val)}
    if not finals:
        raise SolverError("every strategy failed at N_max; no winner to report")
    best = min(finals, key=finals.get)
    return ComparisonResult(tuple(labels), records, table, best)
