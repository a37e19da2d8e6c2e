"""Bayesian optimization loops over (theta, noise level).

All four methods share one loop and one random stream; they differ only in
how a batch of parameter vectors is scored against the acquisition surface:

* ``DRBO``: LCB row reweighted by the worst-case distribution in the MMD ball
* ``BoLcb``: LCB row weighted by the reference distribution
* ``BoEi``: expected improvement weighted by the reference distribution
* ``BoStable``: LCB at the worst grid level

The incumbent and the final answer are picked with the same aggregate
applied to the posterior mean: worst case in the ball for DRBO, worst level
for BoStable, reference weights otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .dro import DiscretePdf, MmdBall, NoiseGrid, worst_case_weights
from .errors import DomainError, NumericalError, OptimizerAborted
from .gp import GpConfig, GpModel, InputScaler, ei_values, fit

METHODS = ("DRBO", "BoLcb", "BoEi", "BoStable")


@dataclass(frozen=True)
class SearchBudget:
    """Multi-start compass search settings (steps are fractions of each bound width)."""

    restarts: int = 32
    evals: int = 100
    initial_step: float = 0.25
    min_step: float = 1e-6

    def __post_init__(self):
        if self.restarts < 0 or self.evals < 1:
            raise DomainError("restarts must be >= 0 and evals >= 1")
        if not 0 < self.min_step <= self.initial_step:
            raise DomainError("need 0 < min_step <= initial_step")


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "DRBO"
    init_count: int = 20
    max_iterations: int = 20
    batch_size: int = 5
    beta: float = 2.0
    ball: MmdBall | None = None
    seed: int = 0
    gp: GpConfig = field(default_factory=GpConfig)
    search: SearchBudget = field(default_factory=SearchBudget)
    # "min" selects argmin of the expected posterior mean; "max" the literal argmax reading
    selection_sense: str = "min"
    # DRBO and BoStable score candidates under their own robust aggregate
    # (worst case in the ball, worst grid level); the others use the reference pdf
    robust_selection: bool = True
    ei_standard: bool = False
    polish: bool = False
    polish_evals: int = 200

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.init_count < 2 or self.max_iterations < 1 or self.batch_size < 1:
            raise DomainError("need init_count >= 2, max_iterations >= 1, batch_size >= 1")
        if self.beta < 0:
            raise DomainError("beta must be non-negative")
        if self.method == "DRBO" and self.ball is None:
            raise DomainError("DRBO needs an MMD ball")
        if self.selection_sense not in ("min", "max"):
            raise DomainError("selection_sense must be 'min' or 'max'")
        if self.seed < 0:
            raise DomainError("seed must be unsigned")


@dataclass(frozen=True)
class IterationRecord:
    theta: np.ndarray
    xi: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    acquisition: float
    nominal_acquisition: float
    incumbent: np.ndarray
    incumbent_score: float
    lengthscale: float
    noise: float


@dataclass
class OptimizationTrace:
    method: str
    seed: int
    init_theta: np.ndarray
    init_xi: np.ndarray
    init_values: np.ndarray
    records: list[IterationRecord] = field(default_factory=list)
    theta_star: np.ndarray | None = None
    # every point the last iteration's outer search scored, with its score
    final_probes: np.ndarray | None = None
    final_probe_scores: np.ndarray | None = None

    @property
    def dataset_size(self):
        return len(self.init_theta) + sum(len(r.xi) for r in self.records)

    def explored_thetas(self):
        return np.vstack([self.init_theta] + [r.theta[None] for r in self.records])

    def to_dict(self):
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return {
            "method": self.method,
            "seed": self.seed,
            "init_theta": arr(self.init_theta),
            "init_xi": arr(self.init_xi),
            "init_values": arr(self.init_values),
            "theta_star": arr(self.theta_star),
            "records": [
                {
                    "theta": arr(r.theta),
                    "xi": arr(r.xi),
                    "values": arr(r.values),
                    "weights": arr(r.weights),
                    "acquisition": r.acquisition,
                    "nominal_acquisition": r.nominal_acquisition,
                    "incumbent": arr(r.incumbent),
                    "incumbent_score": r.incumbent_score,
                    "lengthscale": r.lengthscale,
                    "noise": r.noise,
                }
                for r in self.records
            ],
        }


def latin_hypercube(count, bounds, rng):
    """Stratified sample: one point per equal-width stratum in every coordinate."""
    if count < 1:
        raise DomainError("count must be >= 1")
    bounds = np.asarray(bounds, dtype=float)
    rng = np.random.default_rng(rng)
    unit = qmc.LatinHypercube(d=len(bounds), rng=rng).random(count)
    return qmc.scale(unit, bounds[:, 0], bounds[:, 1])


@dataclass(frozen=True)
class SearchResult:
    x: np.ndarray
    value: float
    probes: np.ndarray
    scores: np.ndarray


def pattern_search(surface, bounds, budget: SearchBudget, rng, incumbent=None) -> SearchResult:
    """Multi-start compass search on a batched surface ``surface(X (B, d)) -> (B,)``.

    All starts advance in lockstep: each round polls ``x +- step * e_j`` for
    every coordinate, moves to the best improving poll, and halves the step
    when nothing improves. Each start spends at most ``budget.evals`` surface
    evaluations. Ties resolve to the lowest probe index.
    """
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    width = hi - lo
    d = len(bounds)
    starts = [rng.uniform(lo, hi, size=(budget.restarts, d))]
    if incumbent is not None:
        starts.append(np.clip(np.asarray(incumbent, dtype=float), lo, hi)[None])
    x = np.vstack(starts)
    if len(x) == 0:
        raise DomainError("search needs at least one start")
    fx = np.asarray(surface(x), dtype=float)
    probes, scores = [x.copy()], [fx.copy()]
    step = np.full(len(x), budget.initial_step)
    basis = np.vstack([np.eye(d), -np.eye(d)])
    rounds = (budget.evals - 1) // (2 * d)
    for _ in range(rounds):
        live = step >= budget.min_step
        if not np.any(live):
            break
        idx = np.flatnonzero(live)
        poll = x[idx, None, :] + step[idx, None, None] * basis[None] * width
        poll = np.clip(poll, lo, hi).reshape(-1, d)
        fp = np.asarray(surface(poll), dtype=float).reshape(len(idx), 2 * d)
        probes.append(poll)
        scores.append(fp.ravel())
        best = np.argmin(fp, axis=1)
        fbest = fp[np.arange(len(idx)), best]
        better = fbest < fx[idx]
        moved = idx[better]
        x[moved] = poll.reshape(len(idx), 2 * d, d)[better, best[better]]
        fx[moved] = fbest[better]
        step[idx[~better]] *= 0.5
    probes, scores = np.vstack(probes), np.concatenate(scores)
    k = int(np.argmin(scores))
    return SearchResult(probes[k].copy(), float(scores[k]), probes, scores)


def outer_minimize(surface, bounds, budget: SearchBudget, rng, incumbent=None):
    """Best point found by :func:`pattern_search`."""
    return pattern_search(surface, bounds, budget, rng, incumbent).x


def _posterior_rows(model: GpModel, scaler: InputScaler, theta, levels):
    rows = scaler.grid_rows(theta, levels)
    mu, sigma = model.predict(rows)
    n = len(levels)
    return mu.reshape(-1, n), sigma.reshape(-1, n)


def expected_posterior_mean(model, scaler, theta, weights, levels, ball: MmdBall | None = None, worst_level=False):
    """``<w, mu(theta, .)>`` per row.

    With a ball, ``w`` is each row's worst case in it; with ``worst_level``
    the score is the largest mean over the grid instead.
    """
    mu, _ = _posterior_rows(model, scaler, theta, levels)
    if worst_level:
        return np.max(mu, axis=1)
    if ball is not None:
        weights = worst_case_weights(mu, ball)
    else:
        weights = np.broadcast_to(weights, mu.shape)
    return np.sum(mu * weights, axis=1)


def select_optimal(
    model: GpModel, candidates, w: DiscretePdf, grid: NoiseGrid, scaler: InputScaler, sense="min", ball=None,
    worst_level=False,
):
    """Candidate with the best expected posterior mean under ``w``; earliest wins ties.

    ``ball`` scores each candidate under its own worst-case distribution
    instead, which equals the plain score when the radius is 0.
    ``worst_level`` scores it at its worst grid level.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.size == 0 or len(candidates) == 0:
        raise DomainError("no candidates to select from")
    score = expected_posterior_mean(model, scaler, candidates, w.weights, grid.levels, ball, worst_level)
    k = int(np.argmin(score) if sense == "min" else np.argmax(score))
    return candidates[k].copy(), float(score[k])


class _Acquisition:
    """Batched method-specific score, lower is better."""

    def __init__(self, config: OptimizerConfig, model, scaler, w, levels, best_value):
        self.config = config
        self.model = model
        self.scaler = scaler
        self.w = w
        self.levels = levels
        self.best_value = best_value

    def details(self, theta):
        """(score, weights, nominal) for each row of ``theta``."""
        cfg = self.config
        mu, sigma = _posterior_rows(self.model, self.scaler, theta, self.levels)
        nominal_w = np.broadcast_to(self.w, mu.shape)
        if cfg.method == "BoEi":
            ei = ei_values(mu, sigma, self.best_value, standard=cfg.ei_standard)
            value = -np.sum(ei * nominal_w, axis=1)
            return value, nominal_w, value
        lcb = mu - cfg.beta * sigma
        nominal = np.sum(lcb * nominal_w, axis=1)
        if cfg.method == "BoLcb":
            return nominal, nominal_w, nominal
        if cfg.method == "BoStable":
            worst = np.argmax(lcb, axis=1)
            weights = np.zeros_like(lcb)
            weights[np.arange(len(lcb)), worst] = 1.0
            return lcb[np.arange(len(lcb)), worst], weights, nominal
        weights = worst_case_weights(lcb, cfg.ball)
        return np.sum(lcb * weights, axis=1), weights, nominal

    def __call__(self, theta):
        return self.details(theta)[0]


def _evaluate(problem, theta, xi):
    """Objective at each noise level, simulating every distinct level once."""
    out = np.empty(len(xi))
    for level in np.unique(xi):
        out[xi == level] = problem.objective(theta, float(level))
    return out


def run_optimizer(problem, ref_pdf: DiscretePdf, grid: NoiseGrid, config: OptimizerConfig):
    """Run one optimization; returns ``(theta_star, trace)``.

    ``problem`` needs ``theta_bounds`` (d, 2) and ``objective(theta, xi)``.
    """
    if len(ref_pdf) != len(grid):
        raise DomainError("reference pdf and grid differ in size")
    if config.ball is not None and len(config.ball.center) != len(grid):
        raise DomainError("ball and grid differ in size")
    bounds = np.asarray(problem.theta_bounds, dtype=float)
    levels = np.asarray(grid.levels, dtype=float)
    w = np.asarray(ref_pdf.weights, dtype=float)
    scaler = InputScaler(bounds, grid.range)
    rng = np.random.default_rng(config.seed)
    k = config.batch_size
    sel_ball = config.ball if config.method == "DRBO" and config.robust_selection else None
    sel_worst = config.method == "BoStable" and config.robust_selection

    theta0 = latin_hypercube(config.init_count, bounds, rng)
    xi0 = levels[rng.choice(len(levels), size=config.init_count, p=w)]
    y0 = np.array([problem.objective(t, float(x)) for t, x in zip(theta0, xi0)])
    trace = OptimizationTrace(config.method, config.seed, theta0, xi0, y0)
    thetas, xis, ys = [theta0], [xi0], [y0]

    def fit_model():
        X = scaler.transform(np.vstack(thetas), np.concatenate(xis))
        try:
            return fit(X, np.concatenate(ys), config.gp)
        except NumericalError as exc:
            raise OptimizerAborted(f"surrogate fit failed: {exc}", trace) from exc

    for _ in range(config.max_iterations):
        model = fit_model()
        explored = trace.explored_thetas()
        incumbent, inc_score = select_optimal(
            model, explored, ref_pdf, grid, scaler, config.selection_sense, sel_ball, sel_worst
        )
        acq = _Acquisition(config, model, scaler, w, levels, float(np.min(np.concatenate(ys))))
        search = pattern_search(acq, bounds, config.search, rng, incumbent)
        theta_t = search.x
        trace.final_probes, trace.final_probe_scores = search.probes, search.scores
        score, weights, nominal = acq.details(theta_t[None])
        xi_t = levels[rng.choice(len(levels), size=k, p=w)]
        y_t = _evaluate(problem, theta_t, xi_t)
        thetas.append(np.repeat(theta_t[None], k, axis=0))
        xis.append(xi_t)
        ys.append(y_t)
        trace.records.append(
            IterationRecord(
                theta_t, xi_t, y_t, np.array(weights[0]), float(score[0]), float(nominal[0]),
                incumbent, inc_score, model.lengthscale, model.noise,
            )
        )

    model = fit_model()
    sign = 1.0 if config.selection_sense == "min" else -1.0

    def mean_surface(theta):
        return sign * expected_posterior_mean(model, scaler, theta, w, levels, sel_ball, sel_worst)

    explored = trace.explored_thetas()
    found = outer_minimize(mean_surface, bounds, config.search, rng, explored[-1])
    candidates = np.vstack([explored, found[None]])
    theta_star, _ = select_optimal(
        model, candidates, ref_pdf, grid, scaler, config.selection_sense, sel_ball, sel_worst
    )

    if config.polish:
        theta_star = polish(problem, theta_star, w, levels, config.polish_evals)
    trace.theta_star = theta_star
    return theta_star, trace


def polish(problem, theta, w, levels, max_evals=200):
    """Local Nelder-Mead refinement of the true expected objective."""
    bounds = np.asarray(problem.theta_bounds, dtype=float)
    support = np.flatnonzero(w > 0)

    def expected(t):
        t = np.clip(t, bounds[:, 0], bounds[:, 1])
        return float(sum(w[i] * problem.objective(t, float(levels[i])) for i in support))

    res = minimize(expected, theta, method="Nelder-Mead", bounds=bounds, options={"maxfev": max_evals})
    return np.clip(res.x, bounds[:, 0], bounds[:, 1])
