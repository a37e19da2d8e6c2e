"""Problem definitions: MaxCut/QAOA and Heisenberg/hardware-efficient VQE.

Every problem is phrased as a minimization of ``f(theta, xi)``. For MaxCut
the objective is the negated cut expectation, so lower is better for both
problem kinds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, ResourceError
from .pauli import PauliHamiltonian
from .sim import Circuit, Gate, GateKind, expectation, pure_expectation, run_noisy_circuit, statevector

MAXCUT_CAP = 24
EIGEN_CAP = 12


@dataclass(frozen=True)
class Graph:
    n_vertices: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise DomainError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n_vertices and 0 <= v < self.n_vertices):
                raise DomainError(f"edge ({u}, {v}) references a missing vertex")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise DomainError(f"duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, "edges", tuple(sorted(seen)))

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.n_vertices))
        g.add_edges_from(self.edges)
        return g


def read_edge_list(path) -> Graph:
    """Parse a graph file: vertex count on the first line, then ``u v`` per line."""
    lines = [ln.split("#")[0].strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise DomainError(f"{path}: empty graph file")
    try:
        n = int(lines[0])
        edges = [tuple(int(tok) for tok in ln.split()) for ln in lines[1:]]
    except ValueError as exc:
        raise DomainError(f"{path}: {exc}") from exc
    if any(len(e) != 2 for e in edges):
        raise DomainError(f"{path}: every edge line needs exactly two vertices")
    return Graph(n, tuple(edges))


def write_edge_list(graph: Graph, path):
    body = "\n".join(f"{u} {v}" for u, v in graph.edges)
    Path(path).write_text(f"{graph.n_vertices}\n{body}\n" if body else f"{graph.n_vertices}\n")


def random_regular_graph(n, degree, rng, max_tries=10_000) -> Graph:
    """Uniform random regular graph by the configuration model with rejection."""
    if (n * degree) % 2 or degree >= n:
        raise DomainError(f"no simple {degree}-regular graph on {n} vertices")
    stubs = np.repeat(np.arange(n), degree)
    for _ in range(max_tries):
        perm = rng.permutation(stubs).reshape(-1, 2)
        if np.any(perm[:, 0] == perm[:, 1]):
            continue
        keys = {(min(u, v), max(u, v)) for u, v in perm.tolist()}
        if len(keys) == len(perm):
            return Graph(n, tuple(keys))
    raise ResourceError("configuration model kept producing multigraphs")


def regular_graph_set(count, n, degree, seed) -> list[Graph]:
    """``count`` pairwise non-isomorphic random regular graphs."""
    import networkx as nx

    if n > 14:
        raise ResourceError("isomorphism rejection is only supported for n <= 14")
    rng = np.random.default_rng(seed)
    graphs, nxs = [], []
    for _ in range(200 * count):
        g = random_regular_graph(n, degree, rng)
        cand = g.to_networkx()
        if any(nx.is_isomorphic(cand, h) for h in nxs):
            continue
        graphs.append(g)
        nxs.append(cand)
        if len(graphs) == count:
            return graphs
    raise ResourceError(f"found only {len(graphs)} non-isomorphic {degree}-regular graphs on {n} vertices")


def maxcut_hamiltonian(graph: Graph) -> PauliHamiltonian:
    """H_C = sum over edges of (I - Z_u Z_v) / 2."""
    terms = []
    for u, v in graph.edges:
        terms.append((0.5, {}))
        terms.append((-0.5, {u: "Z", v: "Z"}))
    return PauliHamiltonian.from_sparse(graph.n_vertices, terms)


def heisenberg_hamiltonian(n, J, B, periodic=False) -> PauliHamiltonian:
    """J * sum (XX + YY + ZZ) over chain bonds + B * sum Z, in Pauli units."""
    if n < 2:
        raise DomainError("Heisenberg chain needs at least two spins")
    bonds = [(i, i + 1) for i in range(n - 1)]
    if periodic and n > 2:
        bonds.append((n - 1, 0))
    terms = [(J, {i: p, j: p}) for i, j in bonds for p in "XYZ"]
    terms += [(B, {i: "Z"}) for i in range(n)]
    return PauliHamiltonian.from_sparse(n, terms)


def qaoa_circuit(graph: Graph, gammas, betas) -> Circuit:
    gammas, betas = np.atleast_1d(gammas), np.atleast_1d(betas)
    if gammas.shape != betas.shape:
        raise DomainError("gammas and betas must have equal length")
    n = graph.n_vertices
    gates = [Gate(GateKind.H, (q,)) for q in range(n)]
    for gamma, beta in zip(gammas, betas):
        # exp(-i gamma (I - ZZ)/2) = global phase * RZZ(-gamma)
        gates += [Gate(GateKind.RZZ, (u, v), -float(gamma)) for u, v in graph.edges]
        gates += [Gate(GateKind.RX, (q,), 2.0 * float(beta)) for q in range(n)]
    return Circuit(n, tuple(gates))


def hea_param_count(n, layers):
    return n * layers


def hea_circuit(n, layers, theta) -> Circuit:
    """RY layer, then ``layers - 1`` rounds of (CNOT chain, RY layer)."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (hea_param_count(n, layers),):
        raise DomainError(f"expected {hea_param_count(n, layers)} parameters, got {theta.shape}")
    rows = theta.reshape(layers, n)
    gates = [Gate(GateKind.RY, (q,), a) for q, a in enumerate(rows[0])]
    for row in rows[1:]:
        gates += [Gate(GateKind.CNOT, (q, q + 1)) for q in range(n - 1)]
        gates += [Gate(GateKind.RY, (q,), a) for q, a in enumerate(row)]
    return Circuit(n, tuple(gates))


def brute_force_maxcut(graph: Graph) -> int:
    n = graph.n_vertices
    if n > MAXCUT_CAP:
        raise ResourceError(f"{n} vertices exceeds the brute-force cap of {MAXCUT_CAP}")
    if n < 2 or not graph.edges:
        return 0
    edges = np.array(graph.edges)
    best = 0
    total = 1 << (n - 1)  # last vertex pinned to side 0
    chunk = 1 << 18
    for start in range(0, total, chunk):
        masks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits_u = (masks[:, None] >> edges[:, 0]) & 1
        bits_v = (masks[:, None] >> edges[:, 1]) & 1
        best = max(best, int(np.max(np.sum(bits_u != bits_v, axis=1))))
    return best


def exact_ground_energy(h: PauliHamiltonian) -> float:
    if h.n_qubits > EIGEN_CAP:
        raise ResourceError(f"{h.n_qubits} qubits exceeds the diagonalization cap of {EIGEN_CAP}")
    if h.is_diagonal:
        return float(np.min(h.diagonal))
    return float(np.linalg.eigvalsh(h.matrix)[0])


@dataclass(frozen=True)
class VqaProblem:
    """A parameterized circuit family plus the cost observable it minimizes.

    ``theta`` passed to :meth:`objective` holds only the free coordinates;
    fixed coordinates come from ``base_params``.
    """

    kind: str
    n_qubits: int
    cost: PauliHamiltonian
    theta_bounds: np.ndarray
    graph: Graph | None = None
    depth: int = 0
    layers: int = 0
    base_params: np.ndarray | None = None
    free_mask: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        bounds = np.asarray(self.theta_bounds, dtype=float)
        bounds.setflags(write=False)
        object.__setattr__(self, "theta_bounds", bounds)
        if not np.all(np.isfinite(bounds)) or np.any(bounds[:, 0] >= bounds[:, 1]):
            raise DomainError("theta bounds must be finite, non-empty intervals")

    @property
    def theta_dim(self):
        return self.theta_bounds.shape[0]

    @classmethod
    def qaoa_maxcut(cls, graph: Graph, depth: int = 1):
        bounds = [(0.0, math.pi)] * depth + [(0.0, math.pi / 2)] * depth
        return cls(
            "qaoa_maxcut",
            graph.n_vertices,
            -maxcut_hamiltonian(graph),
            np.array(bounds).reshape(-1, 2),
            graph=graph,
            depth=depth,
        )

    @classmethod
    def hea_vqe(cls, n, J, B, layers=2, periodic=False, restarts=20, seed=0, base_params=None):
        """Heisenberg VQE with only the final rotation layer free.

        Unless ``base_params`` is given, all ``n * layers`` angles are first
        optimized noiselessly from ``restarts`` random starts; the best full
        vector is kept, its prefix fixed and its last layer recorded in
        ``meta['theta0']``.
        """
        h = heisenberg_hamiltonian(n, J, B, periodic=periodic)
        count = hea_param_count(n, layers)
        if base_params is None:
            base_params = noiseless_hea_optimum(h, n, layers, restarts, seed)
        base = np.asarray(base_params, dtype=float).copy()
        if base.shape != (count,):
            raise DomainError("base_params has the wrong length")
        mask = np.zeros(count, dtype=bool)
        mask[count - n :] = True
        base.setflags(write=False)
        mask.setflags(write=False)
        return cls(
            "hea_vqe",
            n,
            h,
            np.array([(-math.pi, math.pi)] * n),
            layers=layers,
            base_params=base,
            free_mask=mask,
            meta={"J": J, "B": B, "periodic": periodic, "theta0": base[mask].copy()},
        )

    def full_params(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.theta_dim,):
            raise DomainError(f"expected {self.theta_dim} parameters, got shape {theta.shape}")
        if self.free_mask is None:
            return theta
        full = self.base_params.copy()
        full[self.free_mask] = theta
        return full

    def circuit(self, theta) -> Circuit:
        full = self.full_params(theta)
        if self.kind == "qaoa_maxcut":
            return qaoa_circuit(self.graph, full[: self.depth], full[self.depth :])
        return hea_circuit(self.n_qubits, self.layers, full)

    def objective(self, theta, xi):
        """f(theta, xi) = Tr[rho(theta, xi) cost]."""
        theta = np.asarray(theta, dtype=float)
        lo, hi = self.theta_bounds[:, 0], self.theta_bounds[:, 1]
        if theta.shape == (self.theta_dim,) and (np.any(theta < lo - 1e-12) or np.any(theta > hi + 1e-12)):
            raise DomainError(f"theta {theta} outside bounds")
        if not 0.0 <= xi <= 1.0:
            raise DomainError(f"noise level {xi} outside [0, 1]")
        rho = run_noisy_circuit(self.circuit(theta), xi)
        return expectation(rho, self.cost)

    def problem_id(self):
        if self.kind == "qaoa_maxcut":
            return self.meta.get("id", f"maxcut-n{self.n_qubits}-p{self.depth}")
        return self.meta.get("id", f"heisenberg-n{self.n_qubits}-L{self.layers}")


def evaluate_objective(problem: VqaProblem, theta, xi) -> float:
    return problem.objective(theta, xi)


def approximation_ratio(problem: VqaProblem, theta, xi) -> float:
    if problem.kind != "qaoa_maxcut":
        raise DomainError("approximation ratio is defined for MaxCut problems only")
    best = problem.meta.get("maxcut") or brute_force_maxcut(problem.graph)
    if best == 0:
        raise DomainError("graph has no cut edges; approximation ratio undefined")
    return -problem.objective(theta, xi) / best


def with_maxcut_cached(problem: VqaProblem, problem_id=None) -> VqaProblem:
    """Attach the brute-force optimum (and an id) to a MaxCut problem's metadata."""
    problem.meta["maxcut"] = brute_force_maxcut(problem.graph)
    if problem_id is not None:
        problem.meta["id"] = problem_id
    return problem


def noiseless_hea_optimum(h: PauliHamiltonian, n, layers, restarts=20, seed=0):
    """Multi-start L-BFGS-B on the noiseless HEA energy; returns the best angles."""
    count = hea_param_count(n, layers)
    rng = np.random.default_rng(seed)

    def energy(theta):
        return pure_expectation(statevector(hea_circuit(n, layers, theta)), h)

    best_x, best_f = None, np.inf
    for _ in range(restarts):
        x0 = rng.uniform(-math.pi, math.pi, count)
        res = minimize(energy, x0, method="L-BFGS-B", bounds=[(-math.pi, math.pi)] * count)
        if res.fun < best_f - 1e-12:
            best_x, best_f = res.x, res.fun
    return np.asarray(best_x)


def heisenberg_convention_table(n, J, B):
    """Ground energies under coupling sign x boundary combinations."""
    rows = []
    for sign, periodic in itertools.product((+1, -1), (False, True)):
        h = heisenberg_hamiltonian(n, sign * abs(J), B, periodic=periodic)
        rows.append({"coupling_sign": sign, "periodic": periodic, "ground_energy": exact_ground_energy(h)})
    return rows
