import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnsl_qubo.encoder import (
    EncodingError,
    QuboMatrix,
    VariableIndexMap,
    build_qubo,
    compute_deltas,
    compute_penalties,
    compute_scores,
    compute_weights,
    count_occurrences,
    count_table,
    default_alpha,
    enumerate_parent_sets,
    fill_qubo,
    local_score,
)
from bnsl_qubo.network import Dataset, ancestral_sample
from bnsl_qubo.solvers import energies, energy

from oracles import exp_dataset, hamiltonian, hamiltonian_terms, layout, marginal_likelihood, network, qubo


def small_datasets(max_n=4, max_rows=12):
    @st.composite
    def build(draw):
        n = draw(st.integers(3, max_n))
        r = tuple(draw(st.integers(2, 3)) for _ in range(n))
        N = draw(st.integers(0, max_rows))
        rows = [[draw(st.integers(0, r[i] - 1)) for i in range(n)] for _ in range(N)]
        return Dataset(tuple(f"v{i}" for i in range(n)), r, np.array(rows, dtype=np.int64).reshape(N, n))

    return build()


class TestIndexMap:
    @pytest.mark.parametrize("n", range(3, 16))
    def test_dimension(self, n):
        assert VariableIndexMap(n).total == n * (n - 1) + 2 * n + n * (n - 1) // 2

    @pytest.mark.parametrize("n", [3, 4, 5, 9])
    def test_matches_plain_enumeration(self, n):
        imap = VariableIndexMap(n)
        d, y, r = layout(n)
        assert all(imap.d(i, j) == k for (i, j), k in d.items())
        assert all(imap.y(i, l) == k for (i, l), k in y.items())
        assert all(imap.r(i, j) == k for (i, j), k in r.items())

    def test_roles_cover_every_index(self):
        imap = VariableIndexMap(4)
        roles = imap.roles()
        assert len(roles) == imap.total == len(set(roles))
        assert [role for role, _, _ in roles] == ["d"] * 12 + ["y"] * 8 + ["r"] * 6

    def test_invalid_indices(self):
        imap = VariableIndexMap(3)
        with pytest.raises(IndexError):
            imap.d(1, 1)
        with pytest.raises(IndexError):
            imap.r(2, 1)


class TestParentSets:
    def test_three_variables(self):
        assert enumerate_parent_sets(3, 0) == [(), (1,), (2,), (1, 2)]

    @pytest.mark.parametrize("n, count", [(5, 11), (9, 37)])
    def test_counts(self, n, count):
        for i in range(n):
            sets = enumerate_parent_sets(n, i)
            assert len(sets) == count == 1 + (n - 1) + math.comb(n - 1, 2)
            assert all(i not in s and list(s) == sorted(s) for s in sets)

    def test_too_few_variables(self):
        with pytest.raises(EncodingError):
            enumerate_parent_sets(2, 0)


class TestAlpha:
    def test_default_rule(self):
        assert default_alpha(2, 1) == 0.5
        assert default_alpha(2, 4) == 0.125

    def test_alternative_rules(self):
        assert default_alpha(3, 7, "one") == 1.0
        assert default_alpha(2, 4, "inv_ri") == 0.5
        assert default_alpha(2, 4, "n_over_riqi", N=800) == 100.0

    def test_unknown_rule(self):
        with pytest.raises(EncodingError, match="unknown alpha rule"):
            default_alpha(2, 2, "bdeu")


class TestCounts:
    def test_empty_dataset(self):
        data = Dataset(("a", "b", "c"), (2, 2, 2), np.zeros((0, 3), dtype=np.int64))
        assert not count_table(data, 0, (1, 2)).any()

    def test_identical_rows(self):
        data = Dataset(("a", "b"), (2, 2), np.array([[0, 1]] * 3))
        assert count_occurrences(data, 0, (), 0, 0) == 3
        assert count_occurrences(data, 0, (), 0, 1) == 0
        assert count_occurrences(data, 0, (1,), 1, 0) == 3

    def test_parent_state_convention(self):
        rows = np.array([[0, 1, 0], [1, 1, 0], [0, 0, 1], [1, 1, 1]])
        data = Dataset(("a", "b", "c"), (2, 2, 2), rows)
        # parents (1, 2): joint state = b + 2 c
        assert count_table(data, 0, (1, 2)).tolist() == [[0, 0], [1, 1], [1, 0], [0, 1]]

    @settings(max_examples=50, deadline=None)
    @given(small_datasets())
    def test_partition_identity(self, data):
        for i in range(data.n):
            for pi in enumerate_parent_sets(data.n, i):
                table = count_table(data, i, pi)
                assert table.sum() == data.N
                if pi:
                    idx = np.zeros(data.N, dtype=int)
                    radix = 1
                    for p in pi:
                        idx += data.rows[:, p] * radix
                        radix *= data.num_states[p]
                    assert table.sum(axis=1).tolist() == np.bincount(idx, minlength=table.shape[0]).tolist()


class TestLocalScore:
    def test_empty_dataset_scores_zero(self):
        data = Dataset(("a", "b", "c"), (2, 3, 2), np.zeros((0, 3), dtype=np.int64))
        table = compute_scores(data)
        assert all(v == 0.0 for s in table.scores for v in s.values())

    def test_hand_value(self):
        data = Dataset(("a", "b", "c"), (2, 2, 2), np.array([[0, 0, 0], [1, 0, 0]]))
        assert local_score(0, (), data) == pytest.approx(3 * math.log(2), abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(small_datasets(max_rows=8), st.sampled_from(["inv_riqi", "inv_ri", "one"]))
    def test_matches_gamma_product(self, data, rule):
        for i in range(data.n):
            for pi in enumerate_parent_sets(data.n, i):
                q = math.prod(data.num_states[p] for p in pi)
                alpha = default_alpha(data.num_states[i], q, rule, data.N)
                expected = -mpmath.log(marginal_likelihood(data, i, pi, alpha))
                assert local_score(i, pi, data, rule) == pytest.approx(float(expected), rel=1e-9, abs=1e-9)

    def test_structure_score_is_eq9_product(self):
        data = ancestral_sample(network("mhp"), 6, seed=4)
        table = compute_scores(data)
        adj = network("mhp").adjacency
        product = mpmath.mpf(1)
        for i in range(3):
            pi = tuple(int(p) for p in np.flatnonzero(adj[:, i]))
            q = math.prod(data.num_states[p] for p in pi)
            product *= marginal_likelihood(data, i, pi, default_alpha(3, q))
        assert math.exp(-table.structure_score(adj)) == pytest.approx(float(product), rel=1e-9)


class TestWeightsAndPenalties:
    def test_constant_scores(self):
        scores = [{pi: 7.5 for pi in enumerate_parent_sets(4, i)} for i in range(4)]
        for w in compute_weights(scores):
            assert w[()] == 7.5
            assert all(v == 0.0 for pi, v in w.items() if pi)

    def test_inclusion_exclusion(self):
        s = {(): 5.0, (1,): 3.0, (2,): 4.0, (1, 2): 1.0}
        w = compute_weights([s])[0]
        assert w[(1,)] == -2.0
        assert w[(1, 2)] == -1.0

    def test_missing_entry(self):
        with pytest.raises(EncodingError, match="missing"):
            compute_weights([{(): 1.0, (1, 2): 0.0}])

    @staticmethod
    def weights(n, singles=0.0, pairs=0.0):
        return [{pi: (0.0 if not pi else singles if len(pi) == 1 else pairs) for pi in enumerate_parent_sets(n, i)}
                for i in range(n)]

    def test_nonnegative_weights_give_zero_deltas(self):
        assert not compute_deltas(self.weights(4, 1.0, 2.0)).any()

    def test_single_weight_delta(self):
        w = self.weights(4)
        w[2][(0,)] = -2.0
        delta = compute_deltas(w)
        assert delta[0, 2] == 2.0
        assert np.count_nonzero(delta) == 1

    def test_pair_weight_delta(self):
        w = self.weights(4)
        w[2][(0,)] = -2.0
        w[2][(0, 3)] = -3.0
        delta = compute_deltas(w)
        assert delta[0, 2] == 5.0
        assert delta[3, 2] == 3.0

    def test_penalties_zero_delta(self):
        delta_max, dt, dc = compute_penalties(np.zeros((5, 5)), 5)
        assert delta_max.tolist() == [1.0] * 5
        assert (dt, dc) == (1.0, 4.0)

    def test_penalties_max_entry(self):
        delta = np.zeros((9, 9))
        delta[3, 7] = 10.0
        delta_max, dt, dc = compute_penalties(delta, 9)
        assert (dt, dc) == (11.0, 78.0)
        assert delta_max[7] == 11.0 and delta_max[0] == 1.0

    def test_multiplier_scales_uniformly(self):
        delta = np.zeros((4, 4))
        delta[0, 1] = 3.0
        base = compute_penalties(delta, 4)
        scaled = compute_penalties(delta, 4, multiplier=2.5)
        assert np.allclose(scaled[0], 2.5 * base[0])
        assert scaled[1:] == pytest.approx((2.5 * base[1], 2.5 * base[2]))
        with pytest.raises(EncodingError):
            compute_penalties(delta, 4, multiplier=0.5)

    @pytest.mark.parametrize("name", ["mhp", "lc4", "lc"])
    def test_penalty_invariants(self, name):
        Q = qubo(name)
        assert np.all(Q.delta_max > 0) and Q.delta_trans > 0
        assert Q.delta_consist > (Q.n - 2) * Q.delta_trans


class TestBuildQubo:
    @pytest.mark.parametrize("name, dim", [("mhp", 15), ("lc4", 26), ("lc", 40)])
    def test_dimension(self, name, dim):
        assert qubo(name).dim == dim

    def test_upper_triangular(self):
        M = qubo("lc").matrix
        assert not np.tril(M, -1).any()

    @pytest.mark.parametrize("name", ["mhp", "lc"])
    def test_matches_direct_hamiltonian(self, name, rng):
        Q = qubo(name)
        X = rng.integers(0, 2, size=(2000, Q.dim))
        full = hamiltonian(X, Q)
        assert np.allclose(energies(Q, X) + Q.offset, full, rtol=1e-9, atol=1e-6)
        empty = sum(w[()] for w in Q.score_table.weights)
        assert np.allclose(energies(Q, X) + 4 * Q.delta_max.sum(), full - empty, rtol=1e-9, atol=1e-6)

    @settings(max_examples=25, deadline=None)
    @given(small_datasets(max_n=5, max_rows=20), st.integers(0, 2**32 - 1))
    def test_matches_direct_hamiltonian_random(self, data, seed):
        Q = build_qubo(data)
        X = np.random.default_rng(seed).integers(0, 2, size=(64, Q.dim))
        assert np.allclose(energies(Q, X) + Q.offset, hamiltonian(X, Q), rtol=1e-9, atol=1e-6)

    def test_fill_cells(self):
        imap = VariableIndexMap(3)
        weights = [{pi: 0.0 for pi in enumerate_parent_sets(3, i)} for i in range(3)]
        weights[2][(0,)] = -4.0
        weights[2][(0, 1)] = 1.5
        Q = fill_qubo(imap, weights, np.zeros(3), 0.0, 0.0)
        assert Q[imap.d(0, 2), imap.d(0, 2)] == -4.0
        assert Q[imap.d(0, 2), imap.d(1, 2)] == 1.5
        assert np.count_nonzero(Q) == 2

    def test_cycle_cells(self):
        imap = VariableIndexMap(3)
        weights = [{pi: 0.0 for pi in enumerate_parent_sets(3, i)} for i in range(3)]
        Q = fill_qubo(imap, weights, np.zeros(3), 2.0, 5.0)
        r01, r02, r12 = imap.r(0, 1), imap.r(0, 2), imap.r(1, 2)
        assert Q[r02, r02] == 2.0 and Q[r01, r12] == 2.0
        assert Q[r01, r02] == -2.0 and Q[r02, r12] == -2.0
        assert Q[imap.d(1, 0), r01] == 5.0 and Q[imap.d(0, 1), imap.d(0, 1)] == 5.0
        assert Q[imap.d(0, 1), r01] == -5.0

    def test_deterministic_export(self, tmp_path):
        a, b = tmp_path / "a.qubo", tmp_path / "b.qubo"
        build_qubo(exp_dataset("lc")).save(a)
        build_qubo(exp_dataset("lc")).save(b)
        assert a.read_bytes() == b.read_bytes()

    def test_export_round_trip(self, tmp_path):
        Q = qubo("lc4")
        path = tmp_path / "lc4.qubo"
        sidecar = Q.save(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "dim 26 n 4 m 2"
        assert lines[-1].startswith("delta_consist ")
        loaded = QuboMatrix.load(path)
        assert np.array_equal(loaded.matrix, Q.matrix)
        assert np.array_equal(loaded.delta_max, Q.delta_max)
        assert (loaded.delta_trans, loaded.delta_consist) == (Q.delta_trans, Q.delta_consist)
        roles = __import__("json").loads(sidecar.read_text())["roles"]
        assert roles[0] == {"index": 0, "role": "d", "i": 0, "j": 1}
        assert roles[-1] == {"index": 25, "role": "r", "i": 2, "j": 3}

    def test_load_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.qubo"
        path.write_text("dim 15 n 3 m 3\n")
        with pytest.raises(EncodingError):
            QuboMatrix.load(path)

    def test_rejects_small_and_m3(self):
        with pytest.raises(EncodingError):
            build_qubo(exp_dataset("lc").project([0, 1]))
        with pytest.raises(EncodingError, match="m = 2"):
            build_qubo(exp_dataset("lc"), m=3)

    def test_threads_do_not_change_result(self):
        data = exp_dataset("lc")
        assert np.array_equal(build_qubo(data).matrix, build_qubo(data, threads=4).matrix)

    def test_score_table_size(self):
        Q = qubo("lc")
        assert all(len(s) == 1 + 4 + 6 for s in Q.score_table.scores)

    def test_expected_structure_has_no_constraint_energy(self):
        from bnsl_qubo.evaluation import encode_expected
        from bnsl_qubo.solvers import Structure

        Q = qubo("lc")
        x = encode_expected(Structure(network("lc").adjacency), Q)
        t = hamiltonian_terms(x, Q.score_table.weights, Q.delta_max, Q.delta_trans, Q.delta_consist)
        assert t["max"][0] == t["trans"][0] == t["consist"][0] == 0.0
        assert energy(Q, x) + Q.offset == pytest.approx(t["score"][0])
        assert t["score"][0] == pytest.approx(Q.score_table.structure_score(network("lc").adjacency))
