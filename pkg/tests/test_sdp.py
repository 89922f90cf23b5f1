import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from oneshot_qit.sdp import (
    LinearConstraint,
    SdpProblem,
    formulate_dh,
    formulate_dmax_feasibility,
    solve,
)
from oneshot_qit.states import random_state

from oracles import dh_linprog, dh_vertex_enum, dmax_smooth_diag


def _sv(p):
    return np.diag(np.asarray(p, dtype=float))


class TestSolve:
    def test_smallest_eigenvalue(self):
        p = SdpProblem([2], {0: np.diag([1.0, 2.0])}, [LinearConstraint({0: np.eye(2)}, 1.0, "=")])
        sol = solve(p)
        assert sol.status == "optimal"
        assert sol.value == pytest.approx(1.0, abs=1e-8)
        assert_allclose(sol.X[0], np.diag([1.0, 0.0]), atol=1e-6)

    def test_random_min_eigenvalue(self, rng):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        c = (a + a.conj().T) / 2
        sol = solve(SdpProblem([4], {0: c}, [LinearConstraint({0: np.eye(4)}, 1.0, "=")]))
        assert sol.value == pytest.approx(np.linalg.eigvalsh(c).min(), abs=1e-7)

    def test_max_sense(self):
        p = SdpProblem([2], {0: np.diag([1.0, 2.0])}, [LinearConstraint({0: np.eye(2)}, 1.0, "=")], sense="max")
        assert solve(p).value == pytest.approx(2.0, abs=1e-8)

    def test_infeasible_by_construction(self):
        p = SdpProblem([1], {}, [], infeasible_by_construction=True)
        assert solve(p).status == "infeasible"

    def test_bad_relation(self):
        with pytest.raises(ValueError):
            LinearConstraint({0: np.eye(2)}, 1.0, "<")

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            SdpProblem([2], {0: np.array([[0, 1], [0, 0]])}, [])

    def test_max_iter_status(self):
        p = SdpProblem([2], {0: np.diag([1.0, 2.0])}, [LinearConstraint({0: np.eye(2)}, 1.0, "=")])
        assert solve(p, max_iter=1).status == "max-iter"


class TestFormulateDh:
    def test_equal_states(self, rng):
        r = random_state([("A", 3)], seed=rng).data
        assert solve(formulate_dh(r, r, 0.3)).value == pytest.approx(0.7, abs=1e-7)

    def test_diagonal_example(self):
        assert solve(formulate_dh(_sv([0.5, 0.5]), _sv([0.9, 0.1]), 0.5)).value == pytest.approx(0.1, abs=1e-8)

    def test_support_projector(self):
        assert solve(formulate_dh(_sv([1, 0]), np.eye(2) / 2, 0.0)).value == pytest.approx(0.5, abs=1e-7)

    def test_full_rank_eps_zero(self, rng):
        r = random_state([("A", 3)], seed=rng).data
        assert solve(formulate_dh(r, r, 0.0)).value == pytest.approx(1.0, abs=1e-7)

    def test_eps_range(self):
        with pytest.raises(ValueError):
            formulate_dh(np.eye(2) / 2, np.eye(2) / 2, 1.0)

    @given(st.integers(0, 2**31), st.integers(2, 4), st.sampled_from([0.0, 0.05, 0.1, 0.25, 0.5]))
    @settings(max_examples=30, deadline=None)
    def test_diagonal_lp_oracle(self, seed, n, eps):
        g = np.random.default_rng(seed)
        p, q = g.dirichlet(np.ones(n)), g.dirichlet(np.ones(n))
        want = dh_vertex_enum(p, q, eps)
        assert want == pytest.approx(dh_linprog(p, q, eps), abs=1e-10)
        assert solve(formulate_dh(_sv(p), _sv(q), eps)).value == pytest.approx(want, abs=1e-8)

    @given(st.integers(0, 2**31))
    @settings(max_examples=20, deadline=None)
    def test_weak_duality(self, seed):
        g = np.random.default_rng(seed)
        r = random_state([("A", 3)], seed=g).data
        s = random_state([("A", 3)], seed=g).data
        sol = solve(formulate_dh(r, s, 0.1))
        assert sol.dual <= sol.primal + 1e-9
        assert sol.gap <= 1e-8


class TestFormulateDmax:
    def test_eps_zero_threshold(self, rng):
        r = random_state([("A", 2)], seed=rng).data
        s = random_state([("A", 2)], seed=rng).data
        w, v = np.linalg.eigh(s)
        isq = v @ np.diag(w**-0.5) @ v.conj().T
        lam0 = math.log2(np.linalg.eigvalsh(isq @ r @ isq).max())
        above = solve(formulate_dmax_feasibility(r, s, lam0 + 0.05, 0.0))
        below = solve(formulate_dmax_feasibility(r, s, lam0 - 0.05, 0.0))
        assert above.value <= 1e-6
        assert below.dual > 1e-4

    def test_large_lambda_zero(self, rng):
        r = random_state([("A", 3)], seed=rng).data
        s = random_state([("A", 3)], seed=rng).data
        lam = math.log2(3) + math.log2(1 / np.linalg.eigvalsh(s).min())
        assert solve(formulate_dmax_feasibility(r, s, lam)).value == pytest.approx(0.0, abs=1e-7)

    def test_support_violation(self):
        p = formulate_dmax_feasibility(_sv([1, 0]), _sv([0, 1]), 5.0)
        assert p.infeasible_by_construction
        assert solve(p).status == "infeasible"

    @pytest.mark.parametrize("lam", [-0.5, 0.0, 0.3, 0.8])
    def test_diagonal_lp(self, lam):
        p, q = np.array([0.6, 0.3, 0.1]), np.array([0.2, 0.3, 0.5])
        want = np.clip(p - 2**lam * q, 0, None).sum()
        assert solve(formulate_dmax_feasibility(_sv(p), _sv(q), lam)).value == pytest.approx(want, abs=1e-7)

    def test_diagonal_matches_smooth_oracle(self):
        p, q = np.array([0.6, 0.3, 0.1]), np.array([0.2, 0.3, 0.5])
        lam = dmax_smooth_diag(p, q, 0.1)
        assert solve(formulate_dmax_feasibility(_sv(p), _sv(q), lam)).value == pytest.approx(0.1, abs=1e-7)

    def test_monotone_in_lambda(self, rng):
        r = random_state([("A", 3)], seed=rng).data
        s = random_state([("A", 3)], seed=rng).data
        vals = [solve(formulate_dmax_feasibility(r, s, lam)).value for lam in np.linspace(-1, 3, 9)]
        assert all(b <= a + 1e-7 for a, b in zip(vals, vals[1:]))

    def test_purified_ball_feasible_at_large_lambda(self, rng):
        r = random_state([("A", 2)], seed=rng).data
        s = random_state([("A", 2)], seed=rng).data
        sol = solve(formulate_dmax_feasibility(r, s, 6.0, 0.1, ball="purified"))
        assert sol.value == pytest.approx(1.0, abs=1e-6)

    def test_unknown_ball(self):
        with pytest.raises(ValueError):
            formulate_dmax_feasibility(np.eye(2) / 2, np.eye(2) / 2, 0.0, ball="diamond")
