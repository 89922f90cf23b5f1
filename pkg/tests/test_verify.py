import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oneshot_qit.protocols import ProtocolConfig, ajw_simulate, blocked_protocol_simulate
from oneshot_qit.qmat import DensityMatrix, PreconditionError, partial_trace, tensor
from oneshot_qit.states import (
    ImState,
    bell_state,
    classically_correlated,
    ghz_state,
    identity_channel,
    random_im_state,
    random_state,
)
from oneshot_qit.verify import (
    VerificationReport,
    check_converse,
    check_lemma_suite,
    check_prop1,
    check_thm1,
    check_thm2,
    closeness_row,
    converse_bound,
    gentle_measurement_row,
    run_check,
    sweep_prop1,
    sweep_thm1,
    sweep_thm2,
)

seeds = st.integers(0, 2**31)


def lg(eps):
    return math.log2(1 / (1 - eps))


@pytest.fixture
def product3(rng):
    return tensor(tensor(random_state([("Af", 2)], seed=rng), random_state([("Bf", 2)], seed=rng)),
                  random_state([("C", 2)], seed=rng))


class TestProp1:
    def test_product_collapse(self, product3):
        eps = 0.1
        row = check_prop1(ImState(product3), eps)
        assert row["I_H_AB_C"] == pytest.approx(lg(eps), abs=1e-9)
        assert row["I_H_A_C"] == pytest.approx(lg(eps**2), abs=1e-9)
        assert row["I_H_B_AC"] == pytest.approx(lg(eps**2), abs=1e-9)
        assert row["slack"] == pytest.approx(lg(eps) - 2 * lg(eps**2) + 4 * math.log2(10), abs=1e-9)
        assert row["verdict"] == "pass"

    @given(seeds)
    @settings(max_examples=15, deadline=None)
    def test_random_im(self, seed):
        assert check_prop1(random_im_state(seed=seed), 0.1)["slack"] >= 0

    def test_pure_global(self):
        im = random_im_state(2, 2, 4, seed=8, dim_junk=1)
        assert check_prop1(im, 0.1)["slack"] >= 0

    def test_sweep(self):
        rep = sweep_prop1(trials=6, seed=1)
        assert rep.violations == 0 and len(rep.rows) == 6


class TestThm1:
    def test_im_state_matches_prop1(self):
        im = random_im_state(seed=4)
        p = check_prop1(im, 0.1, eps1=1e-4, eps2=1e-4, log_term=-3.0)
        t = check_thm1(im.rho, 0.1, eps1=1e-4, eps2=1e-4, log_term=-3.0)
        assert t["I_max_A_B"] == pytest.approx(0.0, abs=1e-8)
        assert t["rhs"] == pytest.approx(p["rhs"], abs=1e-8)
        assert t["lhs"] == pytest.approx(p["lhs"], abs=1e-12)

    def test_classical_trivial_c(self):
        rho = tensor(classically_correlated(("Af", "Bf")), DensityMatrix(np.ones((1, 1)), [("C", 1)]))
        row = check_thm1(rho, 0.1)
        assert row["lhs"] == pytest.approx(lg(0.1), abs=1e-9)
        assert row["I_max_A_B"] == pytest.approx(1.0, abs=1e-9)
        assert row["slack"] >= 0

    def test_default_corrections(self):
        row = check_thm1(random_state([("Af", 2), ("Bf", 2), ("C", 2)], seed=3), 0.1)
        e1 = 1e-4
        want = -4 * math.log2(1 / e1) - 1 + math.log2(1 - math.sqrt(28) * e1**0.25)
        assert row["log_term"] == pytest.approx(want, abs=1e-12)

    def test_vacuous_large_eps(self):
        row = check_thm1(random_state([("Af", 2), ("Bf", 2), ("C", 2)], seed=3), 0.5)
        assert row["log_term"] == -math.inf and row["verdict"] == "vacuous"

    def test_support_skip(self):
        # a pure entangled (Af, Bf) block is fine, so build a support failure by hand
        rab = np.zeros((4, 4))
        rab[0, 0] = 1.0
        rho = DensityMatrix(np.kron(rab, np.eye(2) / 2), [("Af", 2), ("Bf", 2), ("C", 2)])
        assert check_thm1(rho, 0.1)["verdict"] != "violation"

    def test_sweep(self):
        assert sweep_thm1(trials=10, seed=2).violations == 0


class TestThm2:
    def test_product(self, rng):
        rho = tensor(tensor(random_state([("A", 2)], seed=rng), random_state([("B", 2)], seed=rng)),
                     random_state([("C", 2)], seed=rng))
        row = check_thm2(rho, 0.0)
        assert row["I_max_C_A"] == pytest.approx(0.0, abs=1e-9)
        assert row["I_H_A_B"] == pytest.approx(0.0, abs=1e-9)
        assert row["verdict"] == "pass"

    def test_ghz_exact_is_tight(self):
        # I_max(C:AB) = 2 equals I_max(C:A) + I_max(CA:B) - I_H(A:B) = 1 + 2 - 1
        row = check_thm2(ghz_state(("A", "B", "C")), 0.0)
        assert row["verdict"] == "pass"
        assert row["slack"] == pytest.approx(0.0, abs=1e-9)

    def test_ghz_smoothed(self):
        row = check_thm2(ghz_state(("A", "B", "C")), 0.2)
        assert row["verdict"] == "pass" and row["slack"] > 0

    def test_exact_sweep(self):
        assert sweep_thm2(trials=20, seed=7, eps=0.0).violations == 0

    def test_smoothed_never_violates(self):
        rep = sweep_thm2(trials=2, seed=7, eps=0.2)
        assert rep.violations == 0
        assert all(r["verdict"] in ("pass", "inconclusive") for r in rep.rows)

    def test_wide_bracket_inconclusive(self):
        row = check_thm2(random_state([("A", 2), ("B", 2), ("C", 2)], seed=1), 0.2, width_max=0.0)
        assert row["verdict"] in ("inconclusive", "violation") and row["verdict"] != "pass"


class TestConverse:
    def test_ajw_feasible(self):
        o = ajw_simulate(identity_channel(2, "A", "B"), bell_state("EA", "EB"), ProtocolConfig(M=2, eps=0.5))
        row = check_converse(o)
        assert row["verdict"] == "pass"
        assert row["eps"] == pytest.approx(o.avg_error)

    def test_single_message(self):
        o = ajw_simulate(identity_channel(2, "A", "B"), bell_state("EA", "EB"), ProtocolConfig(M=1, eps=0.5))
        row = check_converse(o, eps=0.1)
        assert row["lhs"] == 0 and row["rhs"] >= 0

    def test_eps_below_error(self):
        o = ajw_simulate(identity_channel(2, "A", "B"), bell_state("EA", "EB"), ProtocolConfig(M=4, eps=0.3))
        with pytest.raises(PreconditionError):
            check_converse(o, eps=o.avg_error / 2)

    def test_blocked_d_final(self):
        rho = random_state([("Af", 2), ("Bf", 2), ("C", 2)], seed=5)
        o = blocked_protocol_simulate(rho, ProtocolConfig(M=2, N=2, eps=0.3))
        row = check_converse(o)
        assert row["D_FINAL"] >= math.log2(4)
        assert row["verdict"] == "pass"

    def test_bound_bell_identity(self):
        # I_H^eps of a two-qubit maximally entangled state at eps = 0: two bits
        val = converse_bound(identity_channel(2, "A", "B"), DensityMatrix(np.eye(2) / 2, [("A", 2)]), 0.0)
        assert val.value == pytest.approx(2.0, abs=1e-9)


class TestLemmas:
    def test_gentle_deterministic_povm(self, rng):
        rho = random_state([("X", 3)], seed=rng).data
        row = gentle_measurement_row(rho, [np.eye(3)])
        assert row["lhs"] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("M", [2, 4])
    @pytest.mark.parametrize("eps", [0.05, 0.2])
    def test_closeness(self, M, eps, rng):
        assert closeness_row(M, eps, rng)["slack"] >= -1e-6

    def test_suite(self):
        rep = check_lemma_suite(seed=7, trials=20)
        assert rep.violations == 0
        assert {r["battery"] for r in rep.rows} == {"gentle", "closeness", "side_channel", "data_processing"}


class TestReport:
    def test_deterministic_json(self):
        a = run_check("lemmas", 10, 3).to_json()
        b = run_check("lemmas", 10, 3).to_json()
        assert a == b

    def test_seed_changes_output(self):
        assert run_check("prop1", 3, 1).to_json() != run_check("prop1", 3, 2).to_json()

    def test_csv_columns(self):
        rep = run_check("prop1", 3, 1)
        rows = list(csv.DictReader(io.StringIO(rep.to_csv())))
        assert len(rows) == 3
        assert list(rows[0])[:5] == ["trial", "verdict", "lhs", "rhs", "slack"]

    def test_round_and_nonfinite(self):
        rep = VerificationReport("x", {}, rows=[{"trial": 0, "lhs": 1 / 3, "rhs": math.inf, "verdict": "vacuous"}])
        d = json.loads(rep.to_json())
        assert d["rows"][0]["lhs"] == round(1 / 3, 12)
        assert d["rows"][0]["rhs"] == "inf"
        assert d["summary"]["vacuous"] == 1

    def test_unknown_check(self):
        with pytest.raises(ValueError):
            run_check("thm9", 1, 0)
