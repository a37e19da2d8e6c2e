"""Experiment orchestration: shift sweeps, landscape scans and result files."""

from __future__ import annotations

import csv
import dataclasses
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dro import DiscretePdf, MmdBall, NoiseGrid, mmd_kernel_matrix, truncated_gaussian_pdf
from .errors import DomainError
from .gp import GpConfig
from .optimizers import METHODS, OptimizationTrace, OptimizerConfig, SearchBudget, run_optimizer
from .problems import VqaProblem, approximation_ratio, read_edge_list, regular_graph_set, with_maxcut_cached

N_XI_COLUMNS = 20
CSV_HEADER = ["method", "problem_id", "seed", "shift_index", "eval_mean", "metric_expected"] + [
    f"metric_xi_{i:02d}" for i in range(N_XI_COLUMNS)
]


def _from_dict(cls, data, where):
    if not isinstance(data, dict):
        raise DomainError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise DomainError(f"{where}: unknown keys {unknown}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise DomainError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class ProblemSpec:
    """``kind='maxcut'`` uses the graph fields; ``kind='heisenberg'`` the spin-chain fields."""

    kind: str = "maxcut"
    n: int = 8
    degree: int = 3
    count: int = 5
    graph_seed: int = 0
    depth: int = 1
    edge_list: str | None = None
    J: float = 1.0
    B: float = 0.2
    layers: int = 2
    periodic: bool = False
    restarts: int = 20
    ansatz_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("maxcut", "heisenberg"):
            raise DomainError(f"unknown problem kind {self.kind!r}")
        if self.n < 2 or self.count < 1 or self.depth < 1 or self.layers < 1:
            raise DomainError("problem sizes must be positive (n >= 2)")


@dataclass(frozen=True)
class GridSpec:
    count: int = 20
    lo: float = 0.0
    hi: float = 0.08

    def build(self):
        return NoiseGrid.uniform(self.count, self.lo, self.hi)


@dataclass(frozen=True)
class PdfSpec:
    mean: float = -0.01
    std: float = 0.01


@dataclass(frozen=True)
class ShiftSpec:
    """Evaluation means: explicit ``means`` or ``count`` steps of ``step`` from the reference mean."""

    means: tuple[float, ...] | None = None
    count: int = 9
    step: float = 0.01

    def __post_init__(self):
        if self.means is not None:
            object.__setattr__(self, "means", tuple(float(m) for m in self.means))
            if len(self.means) == 0:
                raise DomainError("shift series is empty")
        elif self.count < 1:
            raise DomainError("shift series is empty")


@dataclass(frozen=True)
class BudgetSpec:
    """Optimizer settings; ``None`` budgets fall back to per-problem defaults."""

    init_count: int | None = None
    max_iterations: int | None = None
    batch_size: int = 5
    beta: float = 2.0
    restarts: int = 32
    evals: int = 100
    gp_mode: str = "mle"
    selection_sense: str = "min"


@dataclass(frozen=True)
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    grid: GridSpec = field(default_factory=GridSpec)
    reference: PdfSpec = field(default_factory=PdfSpec)
    shifts: ShiftSpec = field(default_factory=ShiftSpec)
    epsilon: float = 0.1
    methods: tuple[str, ...] = METHODS
    optimizer: BudgetSpec = field(default_factory=BudgetSpec)
    seeds: tuple[int, ...] = (0, 1, 2)
    output: str = "results"

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.methods:
            raise DomainError("no methods enabled")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise DomainError(f"unknown methods {bad}")
        if not self.seeds or min(self.seeds) < 0:
            raise DomainError("need at least one non-negative seed")
        if self.epsilon < 0:
            raise DomainError("epsilon must be non-negative")

    @classmethod
    def from_dict(cls, data):
        parts = {
            "problem": ProblemSpec,
            "grid": GridSpec,
            "reference": PdfSpec,
            "shifts": ShiftSpec,
            "optimizer": BudgetSpec,
        }
        if not isinstance(data, dict):
            raise DomainError("config must be a JSON object")
        data = dict(data)
        for key, sub in parts.items():
            if key in data:
                data[key] = _from_dict(sub, data[key], key)
        return _from_dict(cls, data, "config")

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DomainError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(data)

    def to_dict(self):
        return dataclasses.asdict(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def shift_means(config: ExperimentConfig):
    s = config.shifts
    if s.means is not None:
        return list(s.means)
    return [config.reference.mean + k * s.step for k in range(s.count)]


def shift_series(config: ExperimentConfig, grid: NoiseGrid) -> list[DiscretePdf]:
    return [truncated_gaussian_pdf(m, config.reference.std, grid) for m in shift_means(config)]


def build_problems(config: ExperimentConfig) -> list[VqaProblem]:
    p = config.problem
    if p.kind == "maxcut":
        if p.edge_list is not None:
            graphs = [read_edge_list(p.edge_list)]
        else:
            graphs = regular_graph_set(p.count, p.n, p.degree, p.graph_seed)
        return [
            with_maxcut_cached(VqaProblem.qaoa_maxcut(g, p.depth), f"maxcut-n{g.n_vertices}-g{i}-p{p.depth}")
            for i, g in enumerate(graphs)
        ]
    prob = VqaProblem.hea_vqe(p.n, p.J, p.B, p.layers, p.periodic, p.restarts, p.ansatz_seed)
    prob.meta["id"] = f"heisenberg-n{p.n}-L{p.layers}"
    return [prob]


def optimizer_config(config: ExperimentConfig, method, seed, problem: VqaProblem, grid, ref) -> OptimizerConfig:
    b = config.optimizer
    if problem.kind == "qaoa_maxcut":
        default = 20 * problem.depth
    else:
        default = 40
    ball = MmdBall(ref, config.epsilon, mmd_kernel_matrix(grid)) if method == "DRBO" else None
    return OptimizerConfig(
        method=method,
        init_count=b.init_count or default,
        max_iterations=b.max_iterations or default,
        batch_size=b.batch_size,
        beta=b.beta,
        ball=ball,
        seed=seed,
        gp=GpConfig(mode=b.gp_mode),
        search=SearchBudget(restarts=b.restarts, evals=b.evals),
        selection_sense=b.selection_sense,
    )


def metric_values(problem: VqaProblem, theta, grid: NoiseGrid):
    """Approximation ratio (MaxCut) or energy (VQE) at every grid level."""
    if problem.kind == "qaoa_maxcut":
        return np.array([approximation_ratio(problem, theta, float(x)) for x in grid.levels])
    return np.array([problem.objective(theta, float(x)) for x in grid.levels])


@dataclass(frozen=True)
class ResultRow:
    method: str
    problem_id: str
    seed: int
    shift_index: int
    eval_mean: float
    metric_expected: float
    metrics: tuple[float, ...]


@dataclass
class ResultsTable:
    rows: list[ResultRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def check(self, pdfs: list[DiscretePdf], tol=1e-12):
        """Every expected metric must equal its pdf-weighted per-level column."""
        for r in self.rows:
            dot = float(pdfs[r.shift_index].weights @ np.asarray(r.metrics))
            if abs(dot - r.metric_expected) > tol:
                raise DomainError(f"row {r} disagrees with its per-level metrics by {dot - r.metric_expected:.3g}")

    def select(self, method=None, shift_index=None):
        return [
            r
            for r in self.rows
            if (method is None or r.method == method) and (shift_index is None or r.shift_index == shift_index)
        ]

    def medians(self):
        """Median expected metric per (method, shift index)."""
        keys = sorted({(r.method, r.shift_index) for r in self.rows})
        return {k: float(np.median([r.metric_expected for r in self.select(*k)])) for k in keys}


@dataclass(frozen=True)
class Cell:
    method: str
    seed: int
    problem_index: int


def _run_cell(args):
    config, cell, problem = args
    grid = config.grid.build()
    ref = truncated_gaussian_pdf(config.reference.mean, config.reference.std, grid)
    # the same seed for every method keeps the comparison paired
    opt = optimizer_config(config, cell.method, cell.seed * 1000 + cell.problem_index, problem, grid, ref)
    theta, trace = run_optimizer(problem, ref, grid, opt)
    per_xi = metric_values(problem, theta, grid)
    rows = []
    for k, (mean, pdf) in enumerate(zip(shift_means(config), shift_series(config, grid))):
        rows.append(
            ResultRow(
                cell.method, problem.problem_id(), cell.seed, k, float(mean),
                float(pdf.weights @ per_xi), tuple(float(v) for v in per_xi),
            )
        )
    return rows, trace


def sweep_cells(config: ExperimentConfig, problems):
    return [
        Cell(m, s, i) for i in range(len(problems)) for s in config.seeds for m in config.methods
    ]


def run_shift_sweep(config: ExperimentConfig, jobs=1, out_dir=None, progress=None):
    """Optimize every (method, seed, problem) cell once, then score it under each shifted pdf.

    Returns ``(table, traces)`` in cell order regardless of ``jobs``. When
    ``out_dir`` is given the rows finished so far are written even if a cell fails.
    """
    problems = build_problems(config)
    cells = sweep_cells(config, problems)
    table, traces = ResultsTable(), []
    tasks = [(config, c, problems[c.problem_index]) for c in cells]
    try:
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = pool.map(_run_cell, tasks)
                for cell, (rows, trace) in zip(cells, results):
                    table.rows.extend(rows)
                    traces.append(trace)
                    if progress:
                        progress(cell)
        else:
            for cell, task in zip(cells, tasks):
                rows, trace = _run_cell(task)
                table.rows.extend(rows)
                traces.append(trace)
                if progress:
                    progress(cell)
    finally:
        if out_dir is not None:
            write_results_csv(table, Path(out_dir) / "results.csv")
    return table, traces


def expected_value(problem: VqaProblem, theta, pdf: DiscretePdf, grid: NoiseGrid):
    vals = np.array([problem.objective(theta, float(x)) for x in grid.levels])
    return float(pdf.weights @ vals)


def relative_improvement(theta, theta0, pdf: DiscretePdf, problem: VqaProblem, grid: NoiseGrid):
    """(E[f(theta)] - E[f(theta0)]) / E[f(theta0)]; positive means lower energy for negative baselines."""
    base = expected_value(problem, theta0, pdf, grid)
    if abs(base) <= 1e-12:
        raise DomainError("baseline expectation is zero; relative improvement undefined")
    return (expected_value(problem, theta, pdf, grid) - base) / base


def relative_improvements(table: ResultsTable, problems, config: ExperimentConfig):
    """Relative improvement of every VQE row over its problem's ``theta0``.

    Uses the row's per-level energies and the same shifted pdfs, so each value
    is ``(E[f(theta*)] - E[f(theta0)]) / E[f(theta0)]`` at that shift.
    """
    grid = config.grid.build()
    pdfs = shift_series(config, grid)
    by_id = {p.problem_id(): p for p in problems}
    base = {}
    out = {}
    for r in table.rows:
        prob = by_id[r.problem_id]
        if "theta0" not in prob.meta:
            raise DomainError(f"{r.problem_id} has no reference parameters")
        if r.problem_id not in base:
            base[r.problem_id] = np.array([prob.objective(prob.meta["theta0"], float(x)) for x in grid.levels])
        e0 = float(pdfs[r.shift_index].weights @ base[r.problem_id])
        if abs(e0) <= 1e-12:
            raise DomainError("baseline expectation is zero; relative improvement undefined")
        out[(r.method, r.problem_id, r.seed, r.shift_index)] = (r.metric_expected - e0) / e0
    return out


@dataclass(frozen=True)
class Landscape:
    xi: float
    gammas: np.ndarray
    betas: np.ndarray
    values: np.ndarray
    argmin: tuple[int, int]

    @property
    def argmin_theta(self):
        i, j = self.argmin
        return np.array([self.gammas[i], self.betas[j]])

    def to_dict(self):
        return {
            "xi": self.xi,
            "gammas": self.gammas.tolist(),
            "betas": self.betas.tolist(),
            "values": self.values.tolist(),
            "argmin": list(self.argmin),
        }


def landscape_scan(problem: VqaProblem, steps=(64, 64), xi=0.0) -> Landscape:
    """Objective on a ``steps`` cell grid over the bounds.

    Points are the lower cell corners ``lo + k * (hi - lo) / steps``, so the
    upper bound itself is excluded. Over the symmetry-reduced bounds that
    edge duplicates the lower one for the mixing angle.
    """
    if problem.theta_dim != 2:
        raise DomainError("landscape scans need a two-parameter problem")
    b = problem.theta_bounds
    gammas = np.linspace(b[0, 0], b[0, 1], steps[0], endpoint=False)
    betas = np.linspace(b[1, 0], b[1, 1], steps[1], endpoint=False)
    values = np.empty((len(gammas), len(betas)))
    for i, g in enumerate(gammas):
        for j, be in enumerate(betas):
            values[i, j] = problem.objective(np.array([g, be]), xi)
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    return Landscape(float(xi), gammas, betas, values, (int(i), int(j)))


# ---- files


def _fmt(x):
    return repr(float(x))


def write_results_csv(table: ResultsTable, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_HEADER)
        for r in table.rows:
            if len(r.metrics) != N_XI_COLUMNS:
                raise DomainError(f"CSV schema needs {N_XI_COLUMNS} per-level metrics, row has {len(r.metrics)}")
            out.writerow(
                [r.method, r.problem_id, r.seed, r.shift_index, _fmt(r.eval_mean), _fmt(r.metric_expected)]
                + [_fmt(v) for v in r.metrics]
            )
    return path


def read_results_csv(path) -> ResultsTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise DomainError(f"{path}: unexpected header")
        rows = [
            ResultRow(r[0], r[1], int(r[2]), int(r[3]), float(r[4]), float(r[5]), tuple(float(v) for v in r[6:]))
            for r in reader
        ]
    return ResultsTable(rows)


def _write_json(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
    os.replace(tmp, path)
    return path


def write_traces_json(traces: list[OptimizationTrace], problem_ids, path):
    """Per-iteration evolution series: explored theta, batch, incumbent and its score."""
    return _write_json(
        [dict(t.to_dict(), problem_id=pid) for t, pid in zip(traces, problem_ids)],
        path,
    )


def write_worst_case_json(traces: list[OptimizationTrace], problem_ids, grid: NoiseGrid, path):
    """Worst-case weights chosen at each DRBO iteration, with their mean noise level."""
    snaps = []
    for t, pid in zip(traces, problem_ids):
        if t.method != "DRBO":
            continue
        snaps.append(
            {
                "problem_id": pid,
                "seed": t.seed,
                "levels": grid.levels.tolist(),
                "weights": [r.weights.tolist() for r in t.records],
                "mean_level": [float(r.weights @ grid.levels) for r in t.records],
            }
        )
    return _write_json(snaps, path)


def write_landscape_json(landscapes: list[Landscape], path):
    return _write_json([s.to_dict() for s in landscapes], path)


def read_landscape_json(path) -> list[Landscape]:
    with open(path) as fh:
        data = json.load(fh)
    return [
        Landscape(d["xi"], np.array(d["gammas"]), np.array(d["betas"]), np.array(d["values"]), tuple(d["argmin"]))
        for d in data
    ]


def export_results(table: ResultsTable, traces, config: ExperimentConfig, out_dir, problem_ids=None):
    """Write results.csv, traces.json, worst_case.json and the config used."""
    out = Path(out_dir)
    grid = config.grid.build()
    if problem_ids is None:
        problems = build_problems(config)
        problem_ids = [problems[c.problem_index].problem_id() for c in sweep_cells(config, problems)]
    return {
        "results": write_results_csv(table, out / "results.csv"),
        "traces": write_traces_json(traces, problem_ids, out / "traces.json"),
        "worst_case": write_worst_case_json(traces, problem_ids, grid, out / "worst_case.json"),
        "config": _write_json(config.to_dict(), out / "config.json"),
    }


def summarize(table: ResultsTable):
    """Text table of medians, one line per method, one column per shift index."""
    med = table.medians()
    methods = sorted({m for m, _ in med}, key=lambda m: (METHODS + (m,)).index(m))
    shifts = sorted({k for _, k in med})
    lines = ["method    " + " ".join(f"{k:>8d}" for k in shifts)]
    for m in methods:
        lines.append(f"{m:<10}" + " ".join(f"{med[(m, k)]:8.5f}" if (m, k) in med else " " * 8 for k in shifts))
    return "\n".join(lines)
