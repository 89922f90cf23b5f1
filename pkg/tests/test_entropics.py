import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from oneshot_qit.entropics import (
    EntropicValue,
    d_hypo,
    d_hypo_blocks,
    d_hypo_sdp,
    d_max,
    d_max_smooth,
    i_hypo,
    i_max,
    i_max_smooth,
)
from oneshot_qit.qmat import DensityMatrix, DomainError, LabelError, apply_channel, partial_trace, tensor
from oneshot_qit.states import (
    bell_state,
    classically_correlated,
    random_channel,
    random_im_state,
    random_state,
)

from oracles import dh_vertex_enum, dmax_smooth_diag

EPS = [0.05, 0.1, 0.25, 0.5]
seeds = st.integers(0, 2**31)


def dm(p, label="A"):
    return DensityMatrix(np.diag(np.asarray(p, float)), [(label, len(p))])


@pytest.fixture
def pair(rng):
    return random_state([("A", 3)], seed=rng), random_state([("A", 3)], seed=rng)


class TestDHypo:
    @pytest.mark.parametrize("eps", [0.0, 0.1, 0.5, 0.9])
    def test_equal_states(self, pair, eps):
        val, t = d_hypo(pair[0], pair[0], eps)
        assert val.value == pytest.approx(math.log2(1 / (1 - eps)), abs=1e-9)

    def test_equal_states_half_is_one_bit(self, pair):
        assert d_hypo(pair[0], pair[0], 0.5)[0].value == pytest.approx(1.0, abs=1e-12)

    def test_diagonal_example(self):
        val, _ = d_hypo(dm([0.5, 0.5]), dm([0.9, 0.1]), 0.5)
        assert val.value == pytest.approx(math.log2(10), abs=1e-8)

    def test_support_projector(self):
        assert d_hypo(dm([1, 0]), dm([0.5, 0.5]), 0.0)[0].value == pytest.approx(1.0, abs=1e-12)

    def test_eps_out_of_range(self, pair):
        for eps in (-0.1, 1.0):
            with pytest.raises(ValueError):
                d_hypo(pair[0], pair[1], eps)

    def test_tester_form(self, pair):
        eps = 0.2
        val, t = d_hypo(pair[0], pair[1], eps)
        w = np.linalg.eigvalsh(t.pi)
        assert w.min() >= -1e-9 and w.max() <= 1 + 1e-9
        assert t.acceptance >= 1 - eps - 1e-8
        assert t.acceptance == pytest.approx(1 - eps, abs=1e-8)
        assert 0 <= t.boundary_weight <= 1
        assert val.lower <= val.value <= val.upper
        assert t.operator.labels == ("A",)

    def test_bracket_tight(self, pair):
        val, _ = d_hypo(pair[0], pair[1], 0.1)
        assert val.width <= 1e-8

    @given(seeds, st.integers(2, 4), st.sampled_from(EPS))
    @settings(max_examples=40, deadline=None)
    def test_matches_sdp(self, seed, n, eps):
        g = np.random.default_rng(seed)
        r, s = random_state([("A", n)], seed=g), random_state([("A", n)], seed=g)
        assert abs(d_hypo(r, s, eps)[0].value - d_hypo_sdp(r, s, eps).value) <= 1e-6

    @given(seeds, st.integers(2, 4), st.sampled_from(EPS))
    @settings(max_examples=30, deadline=None)
    def test_commuting_lp(self, seed, n, eps):
        g = np.random.default_rng(seed)
        p, q = g.dirichlet(np.ones(n)), g.dirichlet(np.ones(n))
        want = -math.log2(dh_vertex_enum(p, q, eps))
        assert abs(d_hypo(dm(p), dm(q), eps)[0].value - want) <= 1e-8

    @given(seeds, st.floats(0, 0.9), st.floats(0, 0.9))
    @settings(max_examples=30, deadline=None)
    def test_monotone_in_eps(self, seed, e1, e2):
        e1, e2 = sorted((e1, e2))
        g = np.random.default_rng(seed)
        r, s = random_state([("A", 3)], seed=g), random_state([("A", 3)], seed=g)
        assert d_hypo(r, s, e1)[0].value <= d_hypo(r, s, e2)[0].value + 1e-8

    @given(seeds, st.sampled_from(EPS))
    @settings(max_examples=30, deadline=None)
    def test_nonnegative(self, seed, eps):
        g = np.random.default_rng(seed)
        r, s = random_state([("A", 3)], seed=g), random_state([("A", 3)], seed=g)
        assert d_hypo(r, s, eps)[0].value >= -1e-12

    @given(seeds, st.sampled_from(EPS))
    @settings(max_examples=25, deadline=None)
    def test_data_processing(self, seed, eps):
        g = np.random.default_rng(seed)
        d = int(g.integers(2, 5))
        r, s = random_state([("A", d)], seed=g), random_state([("A", d)], seed=g)
        ch = random_channel([("A", d)], [("B", int(g.integers(2, 5)))], n_kraus=d, seed=g)
        before = d_hypo(r, s, eps)[0].value
        after = d_hypo(apply_channel(ch, r), apply_channel(ch, s), eps)[0].value
        assert after <= before + 1e-6

    def test_blocks_equal_dense(self, rng):
        ra = random_state([("A", 2)], seed=rng).data * 0.4
        rb = random_state([("A", 3)], seed=rng).data * 0.6
        sa = random_state([("A", 2)], seed=rng).data * 0.7
        sb = random_state([("A", 3)], seed=rng).data * 0.3
        dense_r = np.block([[ra, np.zeros((2, 3))], [np.zeros((3, 2)), rb]])
        dense_s = np.block([[sa, np.zeros((2, 3))], [np.zeros((3, 2)), sb]])
        blocks, t = d_hypo_blocks([ra, rb], [sa, sb], 0.1)
        assert blocks.value == pytest.approx(d_hypo(dense_r, dense_s, 0.1)[0].value, abs=1e-9)
        assert len(t.blocks) == 2

    @given(seeds, st.sampled_from([0.04, 0.1, 0.25]), st.sampled_from([2, 3]))
    @settings(max_examples=15, deadline=None)
    def test_side_channel_bound(self, seed, eps, K):
        g = np.random.default_rng(seed)
        r, s = random_state([("A", 2)], seed=g).data, random_state([("A", 2)], seed=g).data
        corr = np.zeros((K * K, K * K))
        for x in range(K):
            corr[x * K + x, x * K + x] = 1 / K
        lhs = d_hypo(np.kron(r, corr), np.kron(s, np.eye(K * K) / K**2), eps)[0].value
        se = math.sqrt(eps)
        rhs = d_hypo(r, s, se)[0].value + math.log2(K) - math.log2(1 - se)
        assert lhs <= rhs + 1e-6


class TestIHypo:
    def test_product_state(self, rng):
        rho = tensor(random_state([("A", 2)], seed=rng), random_state([("B", 3)], seed=rng))
        val, _ = i_hypo(rho, (["A"], ["B"]), 0.2)
        assert val.value == pytest.approx(math.log2(1 / 0.8), abs=1e-9)

    def test_bell_eps_zero(self):
        bell = bell_state("A", "B").dm()
        val, _ = i_hypo(bell, ("A", "B"), 0.0)
        assert val.value == pytest.approx(d_hypo(bell.data, np.eye(4) / 4, 0.0)[0].value, abs=1e-9)
        # in the Bell basis the pair is (1,0,0,0) against uniform
        assert val.value == pytest.approx(-math.log2(dh_vertex_enum([1, 0, 0, 0], [0.25] * 4, 0.0)), abs=1e-9)

    def test_classically_correlated(self):
        cc = classically_correlated(("A", "B"))
        val, _ = i_hypo(cc, ("A", "B"), 0.25)
        want = -math.log2(dh_vertex_enum([0.5, 0, 0, 0.5], [0.25] * 4, 0.25))
        assert val.value == pytest.approx(want, abs=1e-9)

    def test_bad_cut(self):
        rho = random_state([("A", 2), ("B", 2), ("C", 2)], seed=0)
        with pytest.raises(LabelError):
            i_hypo(rho, ("A", "B"), 0.1)
        with pytest.raises(LabelError):
            i_hypo(rho, (["A", "B"], ["B", "C"]), 0.1)


class TestDMax:
    def test_self(self, pair):
        assert d_max(pair[0], pair[0]).value == pytest.approx(0.0, abs=1e-9)

    def test_bell(self):
        assert d_max(bell_state().dm().data, np.eye(4) / 4).value == pytest.approx(2.0, abs=1e-9)

    def test_disjoint(self):
        v = d_max(dm([1, 0]), dm([0, 1]))
        assert math.isinf(v.value) and v.value > 0

    def test_eigenvalue_oracle(self, pair):
        r, s = pair[0].data, pair[1].data
        w, v = np.linalg.eigh(s)
        isq = v @ np.diag(w**-0.5) @ v.conj().T
        assert d_max(r, s).value == pytest.approx(math.log2(np.linalg.eigvalsh(isq @ r @ isq).max()), abs=1e-9)

    def test_dominance(self, pair):
        lam = d_max(*pair).value
        gap = 2**lam * pair[1].data - pair[0].data
        assert np.linalg.eigvalsh(gap).min() >= -1e-9

    def test_rank_deficient_sigma(self):
        assert d_max(dm([0.5, 0.5, 0]), dm([0.25, 0.25, 0.5])).value == pytest.approx(1.0, abs=1e-12)


class TestIMax:
    def test_product(self, rng):
        rho = tensor(random_state([("A", 2)], seed=rng), random_state([("B", 2)], seed=rng))
        assert i_max(rho, ("A", "B")).value == pytest.approx(0.0, abs=1e-9)

    def test_bell(self):
        assert i_max(bell_state().dm(), ("A", "B")).value == pytest.approx(2.0, abs=1e-9)

    def test_im_state_cut(self):
        im = random_im_state(seed=3)
        assert i_max(partial_trace(im.rho, ["Af", "Bf"]), ("Af", "Bf")).value == pytest.approx(0.0, abs=1e-8)


class TestDMaxSmooth:
    def test_eps_zero(self, pair):
        assert d_max_smooth(*pair, 0.0).value == pytest.approx(d_max(*pair).value, abs=1e-12)

    @pytest.mark.parametrize("eps", [0.1, 0.3])
    def test_self_sits_on_floor(self, pair, eps):
        # a rescaled copy of rho is feasible, so the value is log2(1-eps) < 0
        v = d_max_smooth(pair[0], pair[0], eps)
        assert v.value == pytest.approx(math.log2(1 - eps), abs=1e-12)

    def test_commuting_oracle(self):
        p, q = np.array([0.6, 0.3, 0.1]), np.array([0.2, 0.3, 0.5])
        want = dmax_smooth_diag(p, q, 0.1)
        v = d_max_smooth(dm(p), dm(q), 0.1)
        assert v.lower - 1e-9 <= want <= v.upper + 1e-9
        assert v.width <= 0.01 + 1e-12

    def test_bracket(self, pair):
        v = d_max_smooth(*pair, 0.1)
        assert v.lower <= v.value <= v.upper
        assert v.width <= 0.01 + 1e-12
        assert v.upper <= d_max(*pair).value + 1e-12

    def test_purified_ball(self, pair):
        v = d_max_smooth(*pair, 0.1, ball="purified")
        assert v.lower <= v.value <= v.upper <= d_max(*pair).value + 1e-12

    def test_support_violation(self):
        with pytest.raises(DomainError):
            d_max_smooth(dm([1, 0]), dm([0, 1]), 0.1)

    @given(seeds)
    @settings(max_examples=8, deadline=None)
    def test_nonincreasing_in_eps(self, seed):
        g = np.random.default_rng(seed)
        r, s = random_state([("A", 2)], seed=g), random_state([("A", 2)], seed=g)
        vals = [d_max_smooth(r, s, e) for e in (0.0, 0.05, 0.2)]
        for a, b in zip(vals, vals[1:]):
            assert b.lower <= a.upper + 1e-9


class TestIMaxSmooth:
    def test_product(self, rng):
        rho = tensor(random_state([("A", 2)], seed=rng), random_state([("B", 2)], seed=rng))
        assert i_max_smooth(rho, ("A", "B"), 0.1).value <= 1e-9

    def test_bell_eps_zero(self):
        assert i_max_smooth(bell_state().dm(), ("A", "B"), 0.0).value == pytest.approx(2.0, abs=1e-9)

    def test_bell_smoothed(self):
        v = i_max_smooth(bell_state().dm(), ("A", "B"), 0.2)
        assert v.value <= 2.0
        assert v.certified and v.width <= 0.01 + 1e-12

    def test_smoothed_marginals_variant(self):
        v = i_max_smooth(bell_state().dm(), ("A", "B"), 0.2, marginals="smoothed")
        assert 0.0 <= v.value <= 2.0
        assert not v.certified

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            i_max_smooth(bell_state().dm(), ("A", "B"), 0.2, marginals="other")


def test_entropic_value_dict():
    v = EntropicValue(1.0, 0.5, 1.5, eps=0.1)
    assert v.width == 1.0
    assert v.to_dict()["upper"] == 1.5
    assert float(v) == 1.0
