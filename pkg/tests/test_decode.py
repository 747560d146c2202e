import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DEFECTIVE_MODELS, INHIBITOR_MODELS, make_spec
from ggti.decode import (
    DECODERS,
    PerfectPair,
    algorithm1_decode,
    bit_test_decoder,
    brute_force_decode,
    comp_decode,
    enumerate_truths,
    get_decoder,
    isolated_items,
    majority_vote,
    make_single_isolation_pair,
    register_decoder,
)
from ggti.errors import DecoderContractError, ScaleError, ValidationError
from ggti.matrix import MeasurementMatrix, bernoulli_matrix, bit_test_matrix, isolation_matrix, repeat_blocks
from ggti.model import AlwaysNegative, GroundTruth, ModelSpec, PerRunRole, sample_ground_truth
from ggti.oracle import run_tests


class TestBitTestDecoder:
    M = bit_test_matrix(8)

    def test_single_item(self):
        assert bit_test_decoder([1, 0, 1, 1], self.M) == {5}

    def test_empty_block(self):
        assert bit_test_decoder([0, 0, 0, 0], self.M) == frozenset()

    def test_two_items_give_their_or(self):
        truth = GroundTruth.from_sets(8, D=[0, 1])
        y = run_tests(self.M, truth, ModelSpec(d=2))
        assert y.tolist() == [1, 0, 0, 1]
        assert bit_test_decoder(y, self.M) == {1}

    def test_out_of_range_index_fails(self):
        assert bit_test_decoder([1, 0, 1, 1], bit_test_matrix(5)) is None

    def test_length_checked(self):
        with pytest.raises(ValidationError, match="block misalignment"):
            bit_test_decoder([1, 1], self.M)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 300), st.data())
    def test_sparsity(self, n, data):
        M = bit_test_matrix(n)
        block = data.draw(st.lists(st.integers(0, 1), min_size=M.t, max_size=M.t))
        out = bit_test_decoder(block, M)
        assert out is None or len(out) <= 1

    @pytest.mark.parametrize("n", [2, 3, 8, 9, 100])
    def test_every_item_recovered_alone(self, n):
        M = bit_test_matrix(n)
        for j in range(n):
            assert bit_test_decoder(M.column(j), M) == {j}

    def test_registry(self):
        assert get_decoder("bit-test") is bit_test_decoder
        with pytest.raises(ValidationError):
            get_decoder("nope")
        with pytest.raises(ValueError):
            register_decoder("bit-test")(bit_test_decoder)


class TestAlgorithm1:
    def test_all_zero(self):
        pair = make_single_isolation_pair(8, 1, 0)
        sets = algorithm1_decode(np.zeros(pair.g_blocks * pair.k, dtype=np.uint8), pair)
        assert sets.S1 == sets.S2 == sets.S3 == frozenset()

    def test_small_end_to_end(self):
        pair = make_single_isolation_pair(8, 1, 0)
        truth = GroundTruth.from_sets(8, D=[5])
        spec = ModelSpec(d=1)
        y = run_tests(pair.measurement_matrix(), truth, spec)
        sets = algorithm1_decode(y, pair)
        assert 5 in sets.S1
        # the noiseless CGT answer is unique here, which the oracle confirms
        assert sets.S1 == {5}
        T = pair.measurement_matrix()
        assert brute_force_decode(y, T, spec) == {truth}

    def test_misalignment(self):
        pair = make_single_isolation_pair(8, 1, 0)
        with pytest.raises(ValidationError, match="block misalignment"):
            algorithm1_decode(np.zeros(pair.g_blocks * pair.k + 1), pair)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 64), st.integers(1, 4), st.integers(0, 10_000), st.data())
    def test_bound_on_any_input(self, n, m0, seed, data):
        pair = make_single_isolation_pair(n, m0, seed, g_blocks=data.draw(st.integers(1, 12)))
        y = data.draw(st.lists(st.integers(0, 1), min_size=pair.g_blocks * pair.k, max_size=pair.g_blocks * pair.k))
        sets = algorithm1_decode(y, pair)
        for s in (sets.S1, sets.S2, sets.S3):
            assert len(s) <= pair.g_blocks * pair.m0

    @pytest.mark.parametrize("seed", range(40))
    def test_superset_when_isolated(self, seed):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(8, 80)), int(rng.integers(1, 5))
        spec = ModelSpec(d=d)
        truth = sample_ground_truth(n, spec, seed)
        pair = make_single_isolation_pair(n, d, seed + 1000)
        sets = algorithm1_decode(run_tests(pair.measurement_matrix(), truth, spec), pair)
        if isolated_items(pair.G, truth) >= truth.D:
            assert truth.D <= sets.S1
        assert len(sets.S1 - truth.D) <= pair.g_blocks * pair.m0 - len(truth.D)

    def test_contract_violation(self):
        def greedy(block, M):
            return frozenset(range(M.n))

        pair = PerfectPair(isolation_matrix(6, 1, 2, 0), bit_test_matrix(6), 1, defective_decoder=greedy)
        with pytest.raises(DecoderContractError):
            algorithm1_decode(np.ones(2 * pair.k, dtype=np.uint8), pair)

    def test_fail_contributes_nothing(self):
        pair = PerfectPair(
            isolation_matrix(6, 1, 3, 0), bit_test_matrix(6), 1, defective_decoder=lambda block, M: None
        )
        assert algorithm1_decode(np.ones(3 * pair.k, dtype=np.uint8), pair).S1 == frozenset()

    def test_three_families_land_in_their_own_sets(self):
        pair = PerfectPair(
            isolation_matrix(6, 1, 2, 0),
            bit_test_matrix(6),
            1,
            defective_decoder=lambda b, M: frozenset({0}),
            inhibitor_decoder=lambda b, M: frozenset({1}),
            hybrid_decoder=lambda b, M: frozenset({2}),
        )
        sets = algorithm1_decode(np.zeros(2 * pair.k, dtype=np.uint8), pair)
        assert (sets.S1, sets.S2, sets.S3) == ({0}, {1}, {2})
        assert sets.as_lines() == "0\n1\n2\n"

    def test_block_order_irrelevant(self):
        pair = make_single_isolation_pair(40, 3, 5)
        truth = sample_ground_truth(40, ModelSpec(d=3), 5)
        y = run_tests(pair.measurement_matrix(), truth, ModelSpec(d=3))
        perm = np.random.default_rng(1).permutation(pair.g_blocks)
        G2 = MeasurementMatrix.from_dense(pair.G.dense[perm])
        pair2 = PerfectPair(G2, pair.M, pair.m0, bit_test_decoder)
        y2 = y.reshape(pair.g_blocks, pair.k)[perm].reshape(-1)
        assert algorithm1_decode(y, pair) == algorithm1_decode(y2, pair2)


class TestBlockIdentity:
    @pytest.mark.parametrize("dm", DEFECTIVE_MODELS)
    @pytest.mark.parametrize("im", INHIBITOR_MODELS)
    def test_blockwise_equals_tensor(self, dm, im):
        spec = make_spec(dm, im, d=2, h=2, b=1)
        rng = np.random.default_rng(11)
        for trial in range(5):
            n = 12
            truth = sample_ground_truth(n, spec, trial)
            G = bernoulli_matrix(3, n, 0.5, trial)
            M = bernoulli_matrix(4, n, 0.5, trial + 50)
            pair = PerfectPair(G, M, 2)
            whole = run_tests(pair.measurement_matrix(), truth, spec)
            parts = [
                run_tests(M, truth.restrict(G.dense[i]), spec, first_test_id=i * M.t) for i in range(G.t)
            ]
            assert np.array_equal(whole, np.concatenate(parts))
            assert rng is not None


class TestComp:
    def test_identity(self):
        assert comp_decode([0, 1, 0, 0], MeasurementMatrix.identity(4)) == {1}

    def test_single_positive_row(self):
        assert comp_decode([1], MeasurementMatrix.from_dense(np.ones((1, 5)))) == set(range(5))

    def test_mismatch(self):
        with pytest.raises(ValidationError):
            comp_decode([1, 0], MeasurementMatrix.identity(3))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 5))
    def test_superset_of_defectives(self, seed, d):
        spec = ModelSpec(d=d)
        truth = sample_ground_truth(30, spec, seed)
        T = bernoulli_matrix(25, 30, 0.2, seed)
        assert truth.D <= comp_decode(run_tests(T, truth, spec), T)

    def test_identity_is_exact(self):
        for D in itertools.combinations(range(6), 2):
            truth = GroundTruth.from_sets(6, D=D)
            T = MeasurementMatrix.identity(6)
            assert comp_decode(run_tests(T, truth, ModelSpec(d=2)), T) == set(D)


class TestBruteForce:
    def test_identity_unique(self):
        found = brute_force_decode([0, 1, 0, 0], MeasurementMatrix.identity(4), ModelSpec(d=1))
        assert found == {GroundTruth.from_sets(4, D=[1])}

    def test_inconsistent(self):
        assert brute_force_decode([1, 1, 1, 0], MeasurementMatrix.identity(4), ModelSpec(d=1)) == frozenset()

    def test_noise_budget_admits_neighbours(self):
        found = brute_force_decode([1, 1, 0, 0], MeasurementMatrix.identity(4), ModelSpec(d=1), z=1)
        assert {t.D for t in found} == {frozenset({0}), frozenset({1})}

    def test_guard(self):
        with pytest.raises(ScaleError, match="oracle scale exceeded"):
            brute_force_decode(np.zeros(3), MeasurementMatrix.from_dense(np.ones((3, 15))), ModelSpec())
        with pytest.raises(ScaleError):
            spec = make_spec(DEFECTIVE_MODELS[0], INHIBITOR_MODELS[1], d=3, h=2, b=0)
            brute_force_decode(np.zeros(3), MeasurementMatrix.from_dense(np.ones((3, 6))), spec)

    def test_enumeration_count(self):
        # sum over |D| <= 2, |H| <= 1 of C(5,|D|) C(5-|D|,|H|)
        spec = make_spec(DEFECTIVE_MODELS[0], INHIBITOR_MODELS[1], d=2, h=1, b=0)
        expected = sum(
            len(list(itertools.combinations(range(5), a))) * len(list(itertools.combinations(range(5 - a), c)))
            for a in range(3)
            for c in range(2)
        )
        assert sum(1 for _ in enumerate_truths(5, spec)) == expected

    @pytest.mark.parametrize("seed", range(12))
    def test_generating_truth_is_consistent(self, seed):
        dm = DEFECTIVE_MODELS[seed % 4]
        im = INHIBITOR_MODELS[(seed // 4) % 4]
        d = 2 if dm is DEFECTIVE_MODELS[3] else 1
        spec = make_spec(dm, im, d=d, h=1, b=1, gap=AlwaysNegative(), hybrid=PerRunRole())
        truth = sample_ground_truth(8, spec, seed)
        T = bernoulli_matrix(6, 8, 0.4, seed)
        assert truth in brute_force_decode(run_tests(T, truth, spec), T, spec)

    @pytest.mark.parametrize("seed", range(60))
    def test_oracle_containment(self, seed):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(4, 11)), int(rng.integers(1, 3))
        spec = ModelSpec(d=d)
        truth = sample_ground_truth(n, spec, seed)
        pair = make_single_isolation_pair(n, d, seed)
        T = pair.measurement_matrix()
        y = run_tests(T, truth, spec)
        consistent = brute_force_decode(y, T, spec)
        common = frozenset.intersection(*(t.D for t in consistent))
        if isolated_items(pair.G, truth) >= truth.D:
            assert common <= algorithm1_decode(y, pair).S1

    def test_containment_needs_isolation(self):
        # D = {3, 5} is pinned down by the tests, but no row of G isolates
        # item 3, so the decoder never names it.
        rng = np.random.default_rng(9)
        n, d = int(rng.integers(4, 11)), int(rng.integers(1, 3))
        spec = ModelSpec(d=d)
        truth = sample_ground_truth(n, spec, 9)
        pair = make_single_isolation_pair(n, d, 9, g_blocks=int(rng.integers(1, 6)))
        y = run_tests(pair.measurement_matrix(), truth, spec)
        consistent = brute_force_decode(y, pair.measurement_matrix(), spec)
        assert consistent == {truth} and truth.D == {3, 5}
        assert not isolated_items(pair.G, truth) >= truth.D
        assert 3 not in algorithm1_decode(y, pair).S1


class TestMajorityVote:
    def test_example(self):
        y = [1, 0, 1, 1, 0, 0, 1, 0, 1]
        assert majority_vote(y, 3, 3).tolist() == [1, 0, 1]

    def test_even_rejected(self):
        with pytest.raises(ValidationError):
            majority_vote([0, 0], 1, 2)

    def test_misaligned(self):
        with pytest.raises(ValidationError):
            majority_vote([0, 0, 0, 0], 3, 1)

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 2), st.integers(0, 10_000))
    def test_corrects_z_flips_per_block(self, z, seed):
        rng = np.random.default_rng(seed)
        T = bernoulli_matrix(7, 20, 0.3, seed)
        truth = sample_ground_truth(20, ModelSpec(d=2), seed)
        clean = run_tests(T, truth, ModelSpec(d=2))
        reps = 2 * z + 1
        y = run_tests(repeat_blocks(T, T.t, reps), truth, ModelSpec(d=2))
        flips = rng.choice(len(y), size=z, replace=False)
        y[flips] ^= 1
        assert np.array_equal(majority_vote(y, T.t, reps), clean)


def test_builtin_decoders_registered():
    assert "bit-test" in DECODERS
