import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from drvqa.errors import DomainError, ResourceError
from drvqa.pauli import PauliHamiltonian
from drvqa.problems import (
    Graph,
    VqaProblem,
    approximation_ratio,
    brute_force_maxcut,
    exact_ground_energy,
    hea_circuit,
    hea_param_count,
    heisenberg_convention_table,
    heisenberg_hamiltonian,
    maxcut_hamiltonian,
    qaoa_circuit,
    random_regular_graph,
    read_edge_list,
    regular_graph_set,
    with_maxcut_cached,
    write_edge_list,
)
from drvqa.sim import DensityMatrix, expectation, run_noisy_circuit

TRIANGLE = Graph(3, ((0, 1), (1, 2), (0, 2)))
EDGE = Graph(2, ((0, 1),))


def basis_state(n, idx):
    psi = np.zeros(2**n)
    psi[idx] = 1
    return DensityMatrix.from_statevector(psi)


def single_edge_optimum(steps=257):
    """Dense grid search of the noiseless single-edge cut over (gamma, beta)."""
    gammas = np.linspace(0, math.pi, steps)
    betas = np.linspace(0, math.pi / 2, steps)
    best = (-1.0, None)
    for g in gammas:
        for b in betas:
            val = oracles.qaoa_cut_expectation(2, EDGE.edges, g, b)
            if val > best[0]:
                best = (val, (g, b))
    return best


class TestGraphs:
    def test_rejects_bad_edges(self):
        for edges in [((0, 0),), ((0, 3),), ((0, 1), (1, 0))]:
            with pytest.raises(DomainError):
                Graph(3, edges)

    def test_edges_are_canonical(self):
        assert Graph(3, ((2, 0), (1, 0))).edges == ((0, 1), (0, 2))

    def test_edge_list_round_trip(self, tmp_path):
        g = Graph(5, ((0, 1), (3, 4), (1, 4)))
        write_edge_list(g, tmp_path / "g.txt")
        assert read_edge_list(tmp_path / "g.txt") == g
        empty = Graph(4, ())
        write_edge_list(empty, tmp_path / "e.txt")
        assert read_edge_list(tmp_path / "e.txt") == empty

    @pytest.mark.parametrize("body", ["", "x\n0 1\n", "3\n0 1 2\n", "2\n0 0\n"])
    def test_malformed_edge_files(self, tmp_path, body):
        (tmp_path / "bad.txt").write_text(body)
        with pytest.raises(DomainError):
            read_edge_list(tmp_path / "bad.txt")

    def test_regular_graph_is_regular(self, rng):
        g = random_regular_graph(8, 3, rng)
        assert all(d == 3 for _, d in g.to_networkx().degree())

    def test_impossible_regular_graph(self, rng):
        with pytest.raises(DomainError):
            random_regular_graph(7, 3, rng)

    def test_graph_set_non_isomorphic_and_seeded(self):
        graphs = regular_graph_set(5, 8, 3, seed=0)
        nxs = [g.to_networkx() for g in graphs]
        for i in range(5):
            for j in range(i):
                assert not nx.is_isomorphic(nxs[i], nxs[j])
        assert regular_graph_set(5, 8, 3, seed=0) == graphs

    def test_graph_set_exhaustion(self):
        # only two non-isomorphic cubic graphs exist on 6 vertices
        with pytest.raises(ResourceError):
            regular_graph_set(3, 6, 3, seed=0)
        with pytest.raises(ResourceError):
            regular_graph_set(1, 16, 3, seed=0)


class TestMaxCut:
    def test_triangle_on_basis_state(self):
        assert expectation(basis_state(3, 0b001), maxcut_hamiltonian(TRIANGLE)) == pytest.approx(2)

    def test_single_edge_on_plus(self):
        plus = DensityMatrix(2, np.full((4, 4), 0.25))
        assert expectation(plus, maxcut_hamiltonian(EDGE)) == pytest.approx(0.5)

    def test_empty_graph(self):
        h = maxcut_hamiltonian(Graph(3, ()))
        assert np.all(h.diagonal == 0)

    def test_negated_triangle_ground_energy(self):
        assert exact_ground_energy(-maxcut_hamiltonian(TRIANGLE)) == pytest.approx(-2)

    @pytest.mark.parametrize(
        "graph,best", [(TRIANGLE, 2), (Graph(5, tuple((i, (i + 1) % 5) for i in range(5))), 4), (EDGE, 1)]
    )
    def test_brute_force_small(self, graph, best):
        assert brute_force_maxcut(graph) == best

    @pytest.mark.parametrize("seed", range(3))
    def test_brute_force_matches_double_enumeration(self, seed):
        g = random_regular_graph(8, 3, np.random.default_rng(seed))
        assert brute_force_maxcut(g) == oracles.maxcut_both_ways(8, g.edges)

    def test_cut_diagonal_matches_oracle(self, rng):
        g = random_regular_graph(6, 3, rng)
        assert np.allclose(maxcut_hamiltonian(g).diagonal, oracles.cut_diagonal(6, g.edges))


class TestQaoa:
    def test_zero_angles_cut_half(self):
        g = random_regular_graph(6, 3, np.random.default_rng(1))
        rho = run_noisy_circuit(qaoa_circuit(g, [0.0], [0.0]), 0.0)
        assert expectation(rho, maxcut_hamiltonian(g)) == pytest.approx(len(g.edges) / 2)

    @given(st.floats(0, math.pi), st.floats(0, math.pi / 2), st.integers(0, 50))
    @settings(max_examples=25)
    def test_noiseless_matches_statevector_oracle(self, gamma, beta, seed):
        g = random_regular_graph(6, 3, np.random.default_rng(seed))
        rho = run_noisy_circuit(qaoa_circuit(g, [gamma], [beta]), 0.0)
        want = oracles.qaoa_cut_expectation(6, g.edges, gamma, beta)
        assert expectation(rho, maxcut_hamiltonian(g)) == pytest.approx(want, abs=1e-10)

    def test_depth_two_matches_oracle(self, rng):
        g = random_regular_graph(6, 3, rng)
        gammas, betas = rng.uniform(0, math.pi, 2), rng.uniform(0, math.pi / 2, 2)
        rho = run_noisy_circuit(qaoa_circuit(g, gammas, betas), 0.0)
        want = oracles.qaoa_cut_expectation(6, g.edges, gammas, betas)
        assert expectation(rho, maxcut_hamiltonian(g)) == pytest.approx(want, abs=1e-10)

    def test_single_edge_reaches_full_cut(self):
        best, (g, b) = single_edge_optimum()
        assert best == pytest.approx(1.0, abs=1e-6)
        prob = VqaProblem.qaoa_maxcut(EDGE)
        assert -prob.objective(np.array([g, b]), 0.0) == pytest.approx(1.0, abs=1e-6)

    def test_mismatched_layers(self):
        with pytest.raises(DomainError):
            qaoa_circuit(EDGE, [0.1, 0.2], [0.3])


class TestHeisenberg:
    def test_singlet(self):
        assert exact_ground_energy(heisenberg_hamiltonian(2, 1.0, 0.0)) == pytest.approx(-3)

    def test_field_only(self):
        assert exact_ground_energy(heisenberg_hamiltonian(2, 0.0, 1.0)) == pytest.approx(-2)

    @pytest.mark.parametrize("periodic", [False, True])
    def test_matrix_matches_kron_oracle(self, periodic):
        h = heisenberg_hamiltonian(4, 0.7, -0.3, periodic=periodic)
        assert np.allclose(h.matrix, oracles.heisenberg_matrix(4, 0.7, -0.3, periodic))

    def test_chain_too_short(self):
        with pytest.raises(DomainError):
            heisenberg_hamiltonian(1, 1.0, 0.0)

    def test_convention_table_covers_four_cases(self):
        rows = heisenberg_convention_table(4, 1.0, 0.2)
        assert {(r["coupling_sign"], r["periodic"]) for r in rows} == {(1, False), (1, True), (-1, False), (-1, True)}
        for r in rows:
            h = oracles.heisenberg_matrix(4, r["coupling_sign"], 0.2, r["periodic"])
            assert r["ground_energy"] == pytest.approx(np.linalg.eigvalsh(h)[0], abs=1e-10)


class TestHea:
    def test_param_count(self):
        assert hea_param_count(4, 2) == 8

    def test_zero_angles_stay_in_zero_state(self):
        rho = run_noisy_circuit(hea_circuit(3, 3, np.zeros(9)), 0.0)
        assert np.allclose(rho.data, DensityMatrix.zero_state(3).data)

    def test_hand_traced_state(self):
        rho = run_noisy_circuit(hea_circuit(2, 2, np.array([math.pi, 0, 0, 0])), 0.0)
        z_sum = PauliHamiltonian(((1.0, "ZI"), (1.0, "IZ")), 2)
        assert np.allclose(rho.data, basis_state(2, 0b11).data, atol=1e-15)
        assert expectation(rho, z_sum) == pytest.approx(-2)

    @pytest.mark.parametrize("seed", range(4))
    def test_random_angles_match_statevector(self, seed):
        rng = np.random.default_rng(seed)
        circ = hea_circuit(4, 3, rng.uniform(-math.pi, math.pi, 12))
        psi = oracles.statevector(circ)
        rho = run_noisy_circuit(circ, 0.0)
        assert np.max(np.abs(rho.data - np.outer(psi, psi.conj()))) <= 1e-10

    def test_wrong_length(self):
        with pytest.raises(DomainError):
            hea_circuit(3, 2, np.zeros(5))


class TestVqaProblem:
    def test_qaoa_zero_angles(self):
        prob = VqaProblem.qaoa_maxcut(TRIANGLE)
        assert prob.objective(np.zeros(2), 0.0) == pytest.approx(-1.5)
        assert approximation_ratio(prob, np.zeros(2), 0.0) == pytest.approx(0.75)

    def test_fully_damped(self, rng):
        g = random_regular_graph(6, 3, rng)
        prob = with_maxcut_cached(VqaProblem.qaoa_maxcut(g), "toy")
        assert prob.problem_id() == "toy" and prob.meta["maxcut"] == brute_force_maxcut(g)
        theta = rng.uniform(prob.theta_bounds[:, 0], prob.theta_bounds[:, 1])
        assert prob.objective(theta, 1.0) == pytest.approx(0.0, abs=1e-14)
        assert approximation_ratio(prob, theta, 1.0) == pytest.approx(0.0, abs=1e-14)

    def test_vqe_fully_damped_is_zero_state_energy(self):
        prob = VqaProblem.hea_vqe(3, 1.0, 0.2, layers=2, base_params=np.zeros(6))
        zero = DensityMatrix.zero_state(3)
        assert prob.objective(np.array([0.3, -1.0, 2.0]), 1.0) == pytest.approx(expectation(zero, prob.cost))

    def test_vqe_mask_frees_last_layer(self):
        base = np.arange(8, dtype=float) / 10
        prob = VqaProblem.hea_vqe(4, 1.0, 0.2, layers=2, base_params=base)
        assert prob.theta_dim == 4
        full = prob.full_params(np.array([9.0, 8.0, 7.0, 6.0]))
        assert np.allclose(full, [0, 0.1, 0.2, 0.3, 9, 8, 7, 6])
        assert np.allclose(prob.meta["theta0"], base[4:])

    def test_vqe_noiseless_optimum_close_to_ground(self):
        prob = VqaProblem.hea_vqe(4, 1.0, 0.2, layers=2, restarts=10, seed=0)
        exact = exact_ground_energy(prob.cost)
        got = prob.objective(prob.meta["theta0"], 0.0)
        # the variational principle always holds; the 2% closeness is an acceptance criterion
        assert got >= exact - 1e-9

    def test_domain_checks(self):
        prob = VqaProblem.qaoa_maxcut(EDGE)
        with pytest.raises(DomainError):
            prob.objective(np.array([4.0, 0.1]), 0.0)
        with pytest.raises(DomainError):
            prob.objective(np.array([1.0, 0.1]), 1.5)
        with pytest.raises(DomainError):
            prob.full_params(np.zeros(3))
        with pytest.raises(DomainError):
            approximation_ratio(VqaProblem.hea_vqe(2, 1.0, 0.0, layers=1, base_params=np.zeros(2)), np.zeros(2), 0.0)
        with pytest.raises(DomainError):
            approximation_ratio(VqaProblem.qaoa_maxcut(Graph(2, ())), np.zeros(2), 0.0)
        with pytest.raises(DomainError):
            VqaProblem("qaoa_maxcut", 2, maxcut_hamiltonian(EDGE), np.array([[1.0, 0.0]]))

    def test_objective_is_never_better_than_ground(self, rng):
        g = random_regular_graph(6, 3, rng)
        prob = VqaProblem.qaoa_maxcut(g)
        floor = -brute_force_maxcut(g)
        for xi in (0.0, 0.03, 0.08):
            theta = rng.uniform(prob.theta_bounds[:, 0], prob.theta_bounds[:, 1])
            assert prob.objective(theta, xi) >= floor - 1e-12
