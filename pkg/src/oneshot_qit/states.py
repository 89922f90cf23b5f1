"""Random ensembles, IM-states and the channels built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .entropics import i_max
from .qmat import (
    ChannelError,
    DensityMatrix,
    DomainError,
    KrausChannel,
    Operator,
    PreconditionError,
    PureState,
    RegisterSpace,
    _space,
    partial_trace,
    purify,
    tensor,
    trace_norm,
    uhlmann_isometry,
)


def as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Generator for one trial, independent of how trials are scheduled."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


# --------------------------------------------------------------------------- #
# Random ensembles                                                            #
# --------------------------------------------------------------------------- #


def _ginibre(rng, rows, cols):
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / math.sqrt(2)


def random_state(space, rank: int | None = None, seed=None) -> DensityMatrix:
    """Ginibre-induced random density matrix ``G G^dag / Tr`` with ``G`` of shape d x rank."""
    sp = _space(space)
    d = sp.total_dim
    rank = d if rank is None else int(rank)
    if not 1 <= rank <= d:
        raise ValueError(f"rank must lie in [1, {d}], got {rank}")
    g = _ginibre(as_rng(seed), d, rank)
    rho = g @ g.conj().T
    return DensityMatrix(rho / np.trace(rho).real, sp, check=False)


def random_pure_state(space, seed=None) -> PureState:
    sp = _space(space)
    v = _ginibre(as_rng(seed), sp.total_dim, 1)[:, 0]
    return PureState(v / np.linalg.norm(v), sp, check=False)


def random_isometry(d_out: int, d_in: int, seed=None) -> np.ndarray:
    """Haar-random isometry (d_out x d_in) from the QR decomposition with phase fix."""
    if d_in > d_out:
        raise ValueError("an isometry needs d_in <= d_out")
    q, r = np.linalg.qr(_ginibre(as_rng(seed), d_out, d_in))
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_unitary(d: int, seed=None) -> np.ndarray:
    return random_isometry(d, d, seed)


def random_channel(in_space, out_space, n_kraus: int = 2, seed=None) -> KrausChannel:
    """Random channel from a Haar isometry into output (x) environment."""
    isp, osp = _space(in_space), _space(out_space)
    V = random_isometry(osp.total_dim * n_kraus, isp.total_dim, seed)
    return channel_from_isometry(V, isp, osp, n_kraus)


def channel_from_isometry(V: np.ndarray, in_space, out_space, env_dim: int) -> KrausChannel:
    """Kraus operators ``K_e = (I (x) <e|) V`` for ``V: in -> out (x) env``."""
    isp, osp = _space(in_space), _space(out_space)
    V = np.asarray(getattr(V, "data", V))
    t = V.reshape(osp.total_dim, env_dim, isp.total_dim)
    ks = [t[:, e, :] for e in range(env_dim)]
    return KrausChannel(ks, isp, osp)


def depolarizing_channel(p: float, d: int = 2, in_label: str = "A", out_label: str = "B") -> KrausChannel:
    """``rho -> p I/d + (1 - p) rho`` via the generalized Pauli (Weyl) basis."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    omega = np.exp(2j * np.pi / d)
    X = np.roll(np.eye(d), 1, axis=0)
    Z = np.diag(omega ** np.arange(d))
    ks = []
    for a in range(d):
        for b in range(d):
            w = (1 - p + p / d**2) if (a, b) == (0, 0) else p / d**2
            ks.append(math.sqrt(w) * np.linalg.matrix_power(X, a) @ np.linalg.matrix_power(Z, b))
    return KrausChannel(ks, [(in_label, d)], [(out_label, d)])


def identity_channel(d: int = 2, in_label: str = "A", out_label: str = "B") -> KrausChannel:
    return KrausChannel([np.eye(d)], [(in_label, d)], [(out_label, d)])


def dephasing_channel(K: int, in_label: str = "XA", out_label: str = "XB") -> KrausChannel:
    """Completely dephasing channel with Kraus set ``{|x><x|}``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    ks = []
    for x in range(K):
        k = np.zeros((K, K))
        k[x, x] = 1
        ks.append(k)
    return KrausChannel(ks, [(in_label, K)], [(out_label, K)])


def amplitude_damping_channel(g: float, in_label: str = "A", out_label: str = "B") -> KrausChannel:
    k0 = np.array([[1, 0], [0, math.sqrt(1 - g)]])
    k1 = np.array([[0, math.sqrt(g)], [0, 0]])
    return KrausChannel([k0, k1], [(in_label, 2)], [(out_label, 2)])


def bell_state(a: str = "A", b: str = "B") -> PureState:
    v = np.zeros(4, dtype=complex)
    v[0] = v[3] = 1 / math.sqrt(2)
    return PureState(v, RegisterSpace.of((a, 2), (b, 2)))


def classically_correlated(labels: Sequence[str] = ("Af", "Bf"), d: int = 2, probs=None) -> DensityMatrix:
    """``sum_x p_x |x..x><x..x|`` on the given registers (uniform by default)."""
    p = np.full(d, 1 / d) if probs is None else np.asarray(probs, dtype=float)
    n = len(labels)
    sp = RegisterSpace(tuple((l, d) for l in labels))
    rho = np.zeros((sp.total_dim, sp.total_dim))
    for x in range(d):
        i = int(np.ravel_multi_index((x,) * n, (d,) * n))
        rho[i, i] = p[x]
    return DensityMatrix(rho, sp)


def ghz_state(labels: Sequence[str] = ("A", "B", "C"), d: int = 2) -> DensityMatrix:
    n = len(labels)
    sp = RegisterSpace(tuple((l, d) for l in labels))
    v = np.zeros(sp.total_dim, dtype=complex)
    for x in range(d):
        v[int(np.ravel_multi_index((x,) * n, (d,) * n))] = 1 / math.sqrt(d)
    return PureState(v, sp).dm()


# --------------------------------------------------------------------------- #
# IM-states and the channels of the two reconstruction lemmas                 #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class ImState:
    """Tripartite state whose (Af, Bf) marginal is a product."""

    rho: DensityMatrix
    af: str = "Af"
    bf: str = "Bf"
    c: str = "C"

    def __post_init__(self):
        r = self.rho
        rab = partial_trace(r, [self.af, self.bf])
        prod = tensor(partial_trace(r, [self.af]), partial_trace(r, [self.bf])).permute(list(rab.labels))
        res = trace_norm(rab.data - prod.data)
        if res > 1e-9:
            raise PreconditionError(f"(Af, Bf) marginal is not a product (residual {res:.2e})")

    @property
    def rho_af(self) -> DensityMatrix:
        return partial_trace(self.rho, [self.af])

    @property
    def rho_bf(self) -> DensityMatrix:
        return partial_trace(self.rho, [self.bf])


def make_im_state(rhoA: DensityMatrix, rhoB: DensityMatrix, seed=None, dim_c: int = 2,
                  dim_junk: int | None = None, c_label: str = "C") -> ImState:
    """Random tripartite extension of ``rhoA (x) rhoB``.

    ``rhoA (x) rhoB`` is purified into a reference ``R``; a Haar isometry maps
    ``R`` into ``C (x) J`` and ``J`` is traced out. ``dim_junk`` defaults to the
    smallest size that makes the isometry exist; ``dim_c = 1`` returns the
    product itself.
    """
    af, bf = rhoA.labels[0], rhoB.labels[0]
    prod = tensor(rhoA, rhoB)
    dR = prod.space.total_dim
    if dim_c == 1:
        rho = tensor(prod, DensityMatrix(np.ones((1, 1)), [(c_label, 1)], check=False))
        return ImState(rho, af, bf, c_label)
    dJ = math.ceil(dR / dim_c) if dim_junk is None else int(dim_junk)
    if dim_c * dJ < dR:
        raise ValueError(f"C (x) junk (dim {dim_c * dJ}) cannot host the reference (dim {dR})")
    psi = purify(prod, [("_R", dR)])
    V = random_isometry(dim_c * dJ, dR, seed)
    ch = channel_from_isometry(V, [("_R", dR)], [(c_label, dim_c)], dJ)
    rho = ch(psi)
    return ImState(rho, rhoA.labels[0], rhoB.labels[0], c_label)


def random_im_state(d_af: int = 2, d_bf: int = 2, dim_c: int = 2, seed=None, rank_a=None, rank_b=None,
                    dim_junk: int | None = None) -> ImState:
    rng = as_rng(seed)
    ra = random_state([("Af", d_af)], rank_a, rng)
    rb = random_state([("Bf", d_bf)], rank_b, rng)
    return make_im_state(ra, rb, rng, dim_c=dim_c, dim_junk=dim_junk)


def _uhlmann_channel(target: DensityMatrix, shared: list[str], source: PureState, out_labels: list[str],
                     env_label: str) -> KrausChannel:
    """Channel ``source-only registers -> out_labels`` mapping ``source`` onto ``target``."""
    src_only = [l for l in source.labels if l not in shared]
    d_in = source.space.sub(src_only).total_dim
    d_out = target.space.sub(out_labels).total_dim
    rank = int(np.sum(np.linalg.eigvalsh(target.data) > 1e-12))
    d_env = max(rank, math.ceil(d_in / d_out), 1)
    psi = purify(target, [(env_label, d_env)])
    psi = psi.permute(shared + out_labels + [env_label])
    V = uhlmann_isometry(psi, source)
    ks = V.data.reshape(d_out, d_env, d_in)
    return KrausChannel([ks[:, e, :] for e in range(d_env)], source.space.sub(src_only), target.space.sub(out_labels))


def im_extended_channel(im: ImState, phi1: PureState, phi2: PureState) -> KrausChannel:
    """Channel ``(A, B) -> C`` with ``(I (x) N)(phi1 (x) phi2) = rho^{Af Bf C}``.

    ``phi1`` purifies ``rho^{Af}`` on ``(Af, A)`` and ``phi2`` purifies
    ``rho^{Bf}`` on ``(Bf, B)``. Built from the Uhlmann isometry into
    ``C (x) R`` for a purification of the IM-state, with ``R`` traced out.
    """
    for phi, m, lab in ((phi1, im.rho_af, im.af), (phi2, im.rho_bf, im.bf)):
        if lab not in phi.labels:
            raise PreconditionError(f"purification lacks register {lab!r}")
        res = trace_norm(partial_trace(phi, [lab]).data - m.data)
        if res > 1e-8:
            raise PreconditionError(f"purification of {lab} is off by {res:.2e}")
    src = tensor(phi1, phi2)
    return _uhlmann_channel(im.rho, [im.af, im.bf], src, [im.c], "_R")


def general_channel(rho_AfBfC: DensityMatrix, phi: PureState, af: str = "Af", bf: str = "Bf",
                    c: str = "C") -> KrausChannel:
    """Channel ``(A, B) -> C`` with ``(I (x) N)(phi) = rho^{Af Bf C}``.

    ``phi`` purifies ``rho^{Af Bf}`` on ``Af, Bf`` plus sender registers.
    """
    rab = partial_trace(rho_AfBfC, [af, bf])
    res = trace_norm(partial_trace(phi, [af, bf]).permute(list(rab.labels)).data - rab.data)
    if res > 1e-8:
        raise PreconditionError(f"phi does not purify rho^(Af Bf) (residual {res:.2e})")
    return _uhlmann_channel(rho_AfBfC, [af, bf], phi, [c], "_E")


@dataclass(frozen=True)
class RejectionPurification:
    """Flagged purification of ``rho^{Af} (x) rho^{Bf}`` used for rejection sampling.

    ``phi`` lives on ``(Af, A, Bf, B, Q)``. Its ``Q = 0`` branch (weight ``p0``)
    purifies ``rho^{Af Bf}``; ``W`` maps ``phi1 (x) phi2`` onto ``phi``.
    """

    phi: PureState
    imax: float
    p0: float
    tau: DensityMatrix | None
    W: Operator
    rho: DensityMatrix
    sigma: DensityMatrix
    q_label: str = "Q"

    def branch(self, q: int) -> PureState:
        """Normalized ``Q = q`` branch on the remaining registers."""
        sp = self.phi.space
        t = self.phi.permute([l for l in sp.labels if l != self.q_label] + [self.q_label])
        v = t.vector.reshape(-1, 2)[:, q]
        nrm = np.linalg.norm(v)
        if nrm == 0:
            raise PreconditionError(f"branch Q={q} has zero weight")
        return PureState(v / nrm, sp.without([self.q_label]), check=False)

    def q_probability(self, q: int = 0) -> float:
        t = self.phi.permute([l for l in self.phi.labels if l != self.q_label] + [self.q_label])
        return float(np.linalg.norm(t.vector.reshape(-1, 2)[:, q]) ** 2)


def rejection_purification(rho_AfBf: DensityMatrix, phi1: PureState, phi2: PureState,
                           q_label: str = "Q") -> RejectionPurification:
    """Build ``sqrt(p0)|phi>|0> + sqrt(1-p0)|tau>|1>`` with ``p0 = 2^{-I_max(Af:Bf)}``.

    ``phi1`` on ``(Af, A)`` and ``phi2`` on ``(Bf, B)`` purify the marginals.
    """
    af, bf = rho_AfBf.labels
    a = [l for l in phi1.labels if l != af]
    b = [l for l in phi2.labels if l != bf]
    ra = partial_trace(rho_AfBf, [af])
    rb = partial_trace(rho_AfBf, [bf])
    for phi, m, lab in ((phi1, ra, af), (phi2, rb, bf)):
        res = trace_norm(partial_trace(phi, [lab]).data - m.data)
        if res > 1e-8:
            raise PreconditionError(f"purification of {lab} is off by {res:.2e}")
    sigma = tensor(ra, rb).permute([af, bf])
    im = i_max(rho_AfBf, ([af], [bf])).value
    if math.isinf(im):
        raise DomainError("supp(rho^{Af Bf}) is not inside supp(rho^Af (x) rho^Bf)")
    ref = phi1.space.sub(a) + phi2.space.sub(b)
    order = [af] + a + [bf] + b
    phi_rho = purify(rho_AfBf, list(ref.registers)).permute(order)
    if im < 1e-9:
        p0, tau = 1.0, None
        vec = np.kron(phi_rho.vector, np.array([1.0, 0.0]))
    else:
        p0 = 2.0 ** (-im)
        tdata = (sigma.data - p0 * rho_AfBf.data) / (1 - p0)
        tau = DensityMatrix(tdata, sigma.space, check=False)
        phi_tau = purify(tau, list(ref.registers)).permute(order)
        vec = math.sqrt(p0) * np.kron(phi_rho.vector, [1.0, 0.0]) + math.sqrt(1 - p0) * np.kron(
            phi_tau.vector, [0.0, 1.0]
        )
    phi = PureState(vec / np.linalg.norm(vec), phi_rho.space + RegisterSpace.of((q_label, 2)), check=False)
    # source registers renamed so the Uhlmann map sees A, B as sender-only systems
    ren = {l: l + "_in" for l in a + b}
    src = tensor(phi1, phi2).relabel(ren)
    V = uhlmann_isometry(phi, src)
    W = Operator(V.data, V.out_space, V.in_space.relabel({v: k for k, v in ren.items()}))
    return RejectionPurification(phi=phi, imax=float(im), p0=float(p0), tau=tau, W=W, rho=rho_AfBf,
                                 sigma=sigma, q_label=q_label)


__all__ = [
    "ChannelError",
    "ImState",
    "RejectionPurification",
    "amplitude_damping_channel",
    "as_rng",
    "bell_state",
    "channel_from_isometry",
    "classically_correlated",
    "dephasing_channel",
    "depolarizing_channel",
    "general_channel",
    "ghz_state",
    "identity_channel",
    "im_extended_channel",
    "make_im_state",
    "random_channel",
    "random_im_state",
    "random_isometry",
    "random_pure_state",
    "random_state",
    "random_unitary",
    "rejection_purification",
    "trial_rng",
]
