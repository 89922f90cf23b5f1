import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from oneshot_qit.qmat import (
    DensityMatrix,
    DomainError,
    PreconditionError,
    PureState,
    apply_channel,
    fidelity,
    maximally_entangled,
    partial_trace,
    purify,
    tensor,
    trace_norm,
)
from oneshot_qit.states import (
    ImState,
    amplitude_damping_channel,
    classically_correlated,
    dephasing_channel,
    general_channel,
    ghz_state,
    im_extended_channel,
    make_im_state,
    random_channel,
    random_im_state,
    random_isometry,
    random_state,
    rejection_purification,
    trial_rng,
)

seeds = st.integers(0, 2**31)


def _marginal_purifications(rho, af="Af", bf="Bf"):
    phi1 = purify(partial_trace(rho, [af]), "A")
    phi2 = purify(partial_trace(rho, [bf]), "B")
    return phi1, phi2


def _residual(ch, src, target):
    out = apply_channel(ch, src).permute(list(target.labels))
    return trace_norm(out.data - target.data)


class TestRandomEnsembles:
    def test_rank_one_is_pure(self):
        r = random_state([("A", 4)], rank=1, seed=5)
        assert np.trace(r.data @ r.data).real == pytest.approx(1.0, abs=1e-9)

    def test_full_rank(self):
        assert np.linalg.eigvalsh(random_state([("A", 4)], seed=5).data).min() > 0

    def test_deterministic(self):
        assert_allclose(random_state([("A", 3)], seed=9).data, random_state([("A", 3)], seed=9).data)

    def test_rank_range(self):
        with pytest.raises(ValueError):
            random_state([("A", 2)], rank=3)

    def test_isometry(self):
        v = random_isometry(5, 3, seed=1)
        assert_allclose(v.conj().T @ v, np.eye(3), atol=1e-12)

    def test_trial_rng_independent_of_order(self):
        a = trial_rng(7, 3).random(4)
        trial_rng(7, 1).random(10)
        assert_allclose(a, trial_rng(7, 3).random(4))
        assert not np.allclose(a, trial_rng(7, 4).random(4))


class TestFixedStates:
    def test_classically_correlated(self):
        cc = classically_correlated(("X", "Y"))
        assert_allclose(np.diag(cc.data).real, [0.5, 0, 0, 0.5])

    def test_ghz_purity(self):
        g = ghz_state()
        assert np.trace(g.data @ g.data).real == pytest.approx(1.0)
        assert_allclose(partial_trace(g, ["A"]).data, np.eye(2) / 2, atol=1e-12)


class TestDephasing:
    def test_plus(self):
        plus = DensityMatrix(np.full((2, 2), 0.5), [("XA", 2)])
        assert_allclose(apply_channel(dephasing_channel(2), plus).data, np.eye(2) / 2)

    def test_diagonal_unchanged(self):
        d = DensityMatrix(np.diag([0.2, 0.3, 0.5]), [("XA", 3)])
        assert_allclose(apply_channel(dephasing_channel(3), d).data, d.data)

    @pytest.mark.parametrize("K", [2, 3, 4])
    def test_maximally_entangled(self, K):
        phi = maximally_entangled("R", "XA", K)
        out = apply_channel(dephasing_channel(K), phi).permute(["R", "XB"])
        want = np.zeros((K * K, K * K))
        for x in range(K):
            want[x * K + x, x * K + x] = 1 / K
        assert_allclose(out.data, want, atol=1e-14)


class TestImStates:
    def test_dim_c_one_is_product(self, rng):
        ra, rb = random_state([("Af", 2)], seed=rng), random_state([("Bf", 3)], seed=rng)
        im = make_im_state(ra, rb, seed=rng, dim_c=1)
        assert_allclose(partial_trace(im.rho, ["Af", "Bf"]).data, tensor(ra, rb).data, atol=1e-12)

    def test_pure_global(self, rng):
        ra, rb = random_state([("Af", 2)], seed=rng), random_state([("Bf", 2)], seed=rng)
        im = make_im_state(ra, rb, seed=rng, dim_c=4, dim_junk=1)
        assert np.trace(im.rho.data @ im.rho.data).real == pytest.approx(1.0, abs=1e-9)

    @given(seeds)
    @settings(max_examples=20, deadline=None)
    def test_marginals_factorize(self, seed):
        im = random_im_state(2, 3, dim_c=2, seed=seed)
        rab = partial_trace(im.rho, ["Af", "Bf"])
        assert trace_norm(rab.data - tensor(im.rho_af, im.rho_bf).data) <= 1e-9

    def test_rejects_correlated(self):
        rho = tensor(classically_correlated(), DensityMatrix(np.eye(2) / 2, [("C", 2)]))
        with pytest.raises(PreconditionError):
            ImState(rho)


class TestImExtendedChannel:
    @given(seeds)
    @settings(max_examples=20, deadline=None)
    def test_reconstruction(self, seed):
        im = random_im_state(seed=seed)
        phi1, phi2 = _marginal_purifications(im.rho)
        ch = im_extended_channel(im, phi1, phi2)
        assert _residual(ch, tensor(phi1, phi2), im.rho) <= 1e-8

    def test_product_case(self, rng):
        ra, rb, rc = (random_state([(l, 2)], seed=rng) for l in ("Af", "Bf", "C"))
        rho = tensor(tensor(ra, rb), rc)
        im = ImState(rho)
        phi1, phi2 = _marginal_purifications(rho)
        out = apply_channel(im_extended_channel(im, phi1, phi2), tensor(phi1, phi2))
        assert trace_norm(partial_trace(out, ["C"]).data - rc.data) <= 1e-8
        assert trace_norm(out.permute(["Af", "Bf", "C"]).data - rho.data) <= 1e-8

    def test_pure_global_isometric(self, rng):
        ra, rb = random_state([("Af", 2)], seed=rng), random_state([("Bf", 2)], seed=rng)
        im = make_im_state(ra, rb, seed=rng, dim_c=4, dim_junk=1)
        phi1, phi2 = _marginal_purifications(im.rho)
        ch = im_extended_channel(im, phi1, phi2)
        assert len(ch.kraus) == 1

    def test_mismatch(self, rng):
        im = random_im_state(seed=1)
        phi1 = purify(random_state([("Af", 2)], seed=rng), "A")
        phi2 = purify(im.rho_bf, "B")
        with pytest.raises(PreconditionError):
            im_extended_channel(im, phi1, phi2)

    @given(seeds)
    @settings(max_examples=10, deadline=None)
    def test_kraus_complete(self, seed):
        im = random_im_state(seed=seed)
        ch = im_extended_channel(im, *_marginal_purifications(im.rho))
        s = sum(k.conj().T @ k for k in ch.kraus)
        assert np.max(np.abs(s - np.eye(s.shape[0]))) <= 1e-9


class TestGeneralChannel:
    @given(seeds)
    @settings(max_examples=20, deadline=None)
    def test_reconstruction(self, seed):
        rho = random_state([("Af", 2), ("Bf", 2), ("C", 2)], seed=seed)
        phi = purify(partial_trace(rho, ["Af", "Bf"]), [("A", 2), ("B", 2)])
        ch = general_channel(rho, phi)
        assert _residual(ch, phi, rho) <= 1e-8

    def test_pure_isometric(self, rng):
        rho = random_state([("Af", 2), ("Bf", 2), ("C", 4)], rank=1, seed=rng)
        phi = purify(partial_trace(rho, ["Af", "Bf"]), [("A", 2), ("B", 2)])
        assert len(general_channel(rho, phi).kraus) == 1

    def test_matches_im_path(self):
        im = random_im_state(seed=11)
        phi1, phi2 = _marginal_purifications(im.rho)
        src = tensor(phi1, phi2)
        a = apply_channel(im_extended_channel(im, phi1, phi2), src).permute(["Af", "Bf", "C"])
        b = apply_channel(general_channel(im.rho, src), src).permute(["Af", "Bf", "C"])
        assert trace_norm(a.data - b.data) <= 1e-8

    def test_mismatch(self, rng):
        rho = random_state([("Af", 2), ("Bf", 2), ("C", 2)], seed=rng)
        phi = purify(random_state([("Af", 2), ("Bf", 2)], seed=rng), [("A", 2), ("B", 2)])
        with pytest.raises(PreconditionError):
            general_channel(rho, phi)


class TestRejectionPurification:
    def _build(self, rab):
        return rejection_purification(rab, *_marginal_purifications(rab))

    def test_product(self, rng):
        rab = tensor(random_state([("Af", 2)], seed=rng), random_state([("Bf", 2)], seed=rng))
        rp = self._build(rab)
        assert rp.imax == pytest.approx(0.0, abs=1e-9)
        assert rp.p0 == 1.0 and rp.tau is None
        assert rp.q_probability(0) == pytest.approx(1.0)

    def test_classically_correlated(self):
        rp = self._build(classically_correlated())
        assert rp.imax == pytest.approx(1.0, abs=1e-9)
        assert rp.p0 == pytest.approx(0.5, abs=1e-9)

    @given(seeds)
    @settings(max_examples=15, deadline=None)
    def test_branch_and_marginals(self, seed):
        rab = random_state([("Af", 2), ("Bf", 2)], seed=seed)
        rp = self._build(rab)
        assert rp.q_probability(0) == pytest.approx(rp.p0, abs=1e-9)
        zero = partial_trace(rp.branch(0), ["Af", "Bf"]).permute(["Af", "Bf"])
        assert fidelity(zero, rab) >= 1 - 1e-9
        full = partial_trace(rp.phi, ["Af", "Bf"]).permute(["Af", "Bf"])
        assert trace_norm(full.data - rp.sigma.data) <= 1e-9
        assert np.linalg.eigvalsh(rp.tau.data).min() >= -1e-9

    def test_uhlmann_map(self, rng):
        rab = random_state([("Af", 2), ("Bf", 2)], seed=rng)
        phi1, phi2 = _marginal_purifications(rab)
        rp = rejection_purification(rab, phi1, phi2)
        src = tensor(phi1, phi2)
        ch_vec = rp.W.data @ src.permute(["Af", "Bf"] + [l for l in src.labels if l not in ("Af", "Bf")]).vector.reshape(4, -1).T
        out = PureState((ch_vec.T).reshape(-1), [("Af", 2), ("Bf", 2)] + list(rp.W.out_space.registers), check=False)
        target = rp.phi.permute(list(out.labels))
        assert abs(np.vdot(target.vector, out.vector)) ** 2 >= 1 - 1e-9

    def test_bell(self):
        rab = maximally_entangled("Af", "Bf", 2).dm()
        rp = self._build(rab)
        assert rp.imax == pytest.approx(2.0, abs=1e-9)
        assert rp.q_probability(0) == pytest.approx(0.25, abs=1e-9)


def test_amplitude_damping_limits():
    one = DensityMatrix(np.diag([0.0, 1.0]), [("A", 2)])
    assert_allclose(apply_channel(amplitude_damping_channel(1.0), one).data, np.diag([1.0, 0.0]), atol=1e-14)
    assert_allclose(apply_channel(amplitude_damping_channel(0.0), one).data, one.data, atol=1e-14)


def test_random_channel_trace_preserving(rng):
    ch = random_channel([("A", 2)], [("B", 2)], n_kraus=3, seed=rng)
    assert_allclose(sum(k.conj().T @ k for k in ch.kraus), np.eye(2), atol=1e-12)
