import itertools
import json

import numpy as np
import pytest

from gatedqdot.chains import (
    build_graph,
    certify,
    certify_nonresonant_chain,
    check_connected,
    coupling_path,
    spanning_chain,
)
from gatedqdot.coupling import CouplingMatrix
from gatedqdot.spectral import ModeIndex


def toy_matrix(n_nodes, edges, diagonal=()):
    """CouplingMatrix over placeholder modes with unit entries on given pairs."""
    modes = tuple(ModeIndex(i + 1, 1) for i in range(n_nodes))
    entries = {(min(a, b), max(a, b)): 1.0 for a, b in edges}
    for d in diagonal:
        entries[(d, d)] = 1.0
    return CouplingMatrix(modes=modes, entries=entries, zero_tol=0.0)


def closure_connected(n_nodes, edges):
    """Brute-force transitive closure of the adjacency matrix."""
    adj = np.eye(n_nodes, dtype=bool)
    for a, b in edges:
        adj[a, b] = adj[b, a] = True
    for _ in range(n_nodes):
        adj = adj | (adj @ adj)
    return bool(adj.all())


class TestGraph:
    def test_even_gate_edges_are_odd_sums(self, matrix_n2_100, spec100):
        g = build_graph(matrix_n2_100, 20)
        for a, b in g.edges:
            assert (spec100.modes[a].j1 + spec100.modes[b].j1) % 2 == 1
        for i in range(20):
            for j in range(i + 1, 20):
                if (spec100.modes[i].j1 + spec100.modes[j].j1) % 2 == 1:
                    assert (i, j) in g.edges

    def test_empty_matrix_edgeless(self):
        g = build_graph(toy_matrix(4, []), 4)
        assert g.edges == frozenset()

    def test_single_node(self):
        g = build_graph(toy_matrix(3, [(0, 1)]), 1)
        assert g.node_count == 1 and not g.edges

    def test_diagonal_not_an_edge(self):
        g = build_graph(toy_matrix(3, [(0, 1)], diagonal=[2]), 3)
        assert (2, 2) not in g.edges

    def test_node_count_guard(self):
        with pytest.raises(ValueError):
            build_graph(toy_matrix(3, []), 4)


class TestConnectivity:
    def test_even_gate_connected(self, matrix_n2_100):
        connected, comps = check_connected(build_graph(matrix_n2_100, 20))
        assert connected and len(comps) == 1

    def test_odd_gate_two_parity_components(self, matrix_n1_100, spec100):
        connected, comps = check_connected(build_graph(matrix_n1_100, 20))
        assert not connected and len(comps) == 2
        parities = [{spec100.modes[i].j1 % 2 for i in comp} for comp in comps]
        assert parities == [{1}, {0}]

    def test_edgeless_three_components(self):
        _, comps = check_connected(build_graph(toy_matrix(3, []), 3))
        assert comps == [[0], [1], [2]]

    def test_components_ordered_by_least_member(self):
        g = build_graph(toy_matrix(5, [(1, 3), (0, 4)]), 5)
        _, comps = check_connected(g)
        assert comps == [[0, 4], [1, 3], [2]]

    def test_small_instance_oracle_exhaustive_4(self):
        nodes = 4
        all_pairs = list(itertools.combinations(range(nodes), 2))
        for bits in range(2 ** len(all_pairs)):
            edges = [p for i, p in enumerate(all_pairs) if bits >> i & 1]
            got, _ = check_connected(build_graph(toy_matrix(nodes, edges), nodes))
            assert got == closure_connected(nodes, edges)

    def test_small_instance_oracle_random_corpus(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            n = int(rng.integers(5, 9))
            pairs = list(itertools.combinations(range(n), 2))
            mask = rng.random(len(pairs)) < rng.random()
            edges = [p for p, m in zip(pairs, mask) if m]
            got, comps = check_connected(build_graph(toy_matrix(n, edges), n))
            assert got == closure_connected(n, edges)
            assert sorted(i for c in comps for i in c) == list(range(n))

    def test_adding_edges_never_disconnects(self):
        rng = np.random.default_rng(5)
        base = [(0, 1), (2, 3)]
        extra = [(1, 2), (3, 4), (0, 4)]
        counts = []
        for k in range(len(extra) + 1):
            g = build_graph(toy_matrix(5, base + extra[:k]), 5)
            counts.append(len(check_connected(g)[1]))
        assert all(b <= a for a, b in zip(counts[:-1], counts[1:]))


class TestPaths:
    def test_two_hop_path(self, matrix_n2_100):
        g = build_graph(matrix_n2_100, 30)
        path = coupling_path(g, (1, 1), (3, 1))
        assert [tuple(g.modes[p]) for p in path] == [(1, 1), (2, 1), (3, 1)]

    def test_direct_edge_absent_for_even_sum(self, matrix_n2_100):
        g = build_graph(matrix_n2_100, 30)
        assert (g.resolve((1, 1)), g.resolve((3, 1))) not in g.edges

    def test_trivial_path(self, matrix_n2_100):
        g = build_graph(matrix_n2_100, 10)
        assert coupling_path(g, 4, 4) == [4]

    def test_absence_across_components(self, matrix_n1_100):
        g = build_graph(matrix_n1_100, 20)
        assert coupling_path(g, (1, 1), (2, 1)) is None

    def test_unknown_node_raises(self, matrix_n2_100):
        g = build_graph(matrix_n2_100, 10)
        with pytest.raises(ValueError):
            coupling_path(g, (40, 40), 0)
        with pytest.raises(ValueError):
            coupling_path(g, 0, 99)

    def test_witness_paths_valid(self, matrix_n2_30, spec30):
        cert = certify(matrix_n2_30, spec30.eigenvalues, 30, 1e-9)
        assert cert.connected
        g = build_graph(matrix_n2_30, 30)
        assert len(cert.witness_paths) == 29
        for (_, _), path in cert.witness_paths.items():
            positions = [g.resolve(m) for m in path]
            assert len(positions) <= 30
            for a, b in zip(positions[:-1], positions[1:]):
                assert (min(a, b), max(a, b)) in g.edges


class TestResonanceCertificate:
    def test_unshifted_collision_found(self, matrix_n2_100, spec100):
        edges = [(a, b) for a, b in matrix_n2_100.entries if a != b]
        tol = 1e-9 * (spec100.eigenvalues[-1] - spec100.eigenvalues[0])
        violations = certify_nonresonant_chain(spec100.eigenvalues, matrix_n2_100, edges, tol)
        labeled = {
            frozenset(
                (
                    (tuple(spec100.modes[s[0]]), tuple(spec100.modes[s[1]])),
                    (tuple(spec100.modes[t[0]]), tuple(spec100.modes[t[1]])),
                )
            )
            for s, t, _ in violations
        }
        target = frozenset((((8, 1), (7, 1)), ((4, 1), (1, 1))))
        assert target in labeled

    def test_self_comparison_excluded(self):
        m = toy_matrix(2, [(0, 1)])
        assert certify_nonresonant_chain([0.0, 15.0], m, [(0, 1)], 1e-9) == []

    def test_chain_edges_must_be_stored(self):
        m = toy_matrix(3, [(0, 1)])
        with pytest.raises(ValueError):
            certify_nonresonant_chain([0.0, 1.0, 2.0], m, [(0, 2)], 1e-9)

    def test_violation_reported_once(self):
        # two chain edges with identical gaps: one canonical violation
        m = toy_matrix(4, [(0, 1), (2, 3)])
        out = certify_nonresonant_chain([0.0, 1.0, 5.0, 6.0], m, [(0, 1), (2, 3)], 1e-9)
        assert len(out) == 1

    def test_shrinking_tol_never_adds(self, matrix_n2_100, spec100):
        edges = [(a, b) for a, b in matrix_n2_100.entries if a != b][:200]
        loose = certify_nonresonant_chain(spec100.eigenvalues, matrix_n2_100, edges, 1e-3)
        tight = certify_nonresonant_chain(spec100.eigenvalues, matrix_n2_100, edges, 1e-9)
        loose_keys = {(s, t) for s, t, _ in loose}
        assert all((s, t) in loose_keys for s, t, _ in tight)

    def test_diagonal_pairs_compared(self):
        # a stored diagonal entry is a coupled pair with gap zero; a chain
        # edge between near-degenerate levels collides with it
        m = toy_matrix(2, [(0, 1)], diagonal=[0])
        out = certify_nonresonant_chain([1.0, 1.0 + 1e-12], m, [(0, 1)], 1e-9)
        assert any(t == (0, 0) for _, t, _ in out)

    def test_shifted_tree_chain_clean_for_odd_gate(self, spec100, matrix_n1_100):
        # full pipeline: spanning-forest chain frequencies on the 0.2-shifted
        # spectrum collide with no coupled pair at tol 1e-6 (truncation 40)
        from gatedqdot.coupling import assemble_coupling_matrix
        from gatedqdot.poisson import solve_full_gate_mode
        from gatedqdot.spectral import enumerate_modes, shifted_spectrum

        spec = enumerate_modes(1.0, 40)
        matrix = assemble_coupling_matrix(solve_full_gate_mode(1, 1.0), spec, 40)
        graph = build_graph(matrix, 40)
        tree = spanning_chain(graph)
        shifted = shifted_spectrum(spec, matrix, 0.2, 40)
        assert certify_nonresonant_chain(shifted.eigenvalues, matrix, tree, 1e-6) == []

    def test_spanning_chain_is_tree(self, matrix_n2_30):
        g = build_graph(matrix_n2_30, 30)
        edges = spanning_chain(g)
        assert len(edges) == 29
        assert all(e in g.edges for e in edges)

    def test_certificate_json(self, matrix_n2_30, spec30, tmp_path):
        cert = certify(matrix_n2_30, spec30.eigenvalues, 30, 1e-9)
        path = tmp_path / "chain.json"
        cert.to_json(path)
        doc = json.loads(path.read_text())
        assert doc["connected"] is True
        assert doc["truncation"] == 30
        assert doc["tolerances"]["resonance"] == 1e-9
        assert len(doc["witness_paths"]) == 29
