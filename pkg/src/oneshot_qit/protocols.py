"""Exact and sampled simulation of entanglement-assisted coding protocols.

All decoders are pretty-good measurements built from the optimal
Neyman-Pearson tester of the relevant mutual-information quantity. The
completion effect ``I - sum_m Omega_m`` is an explicit garbage outcome that is
always counted as an error.

Exact mode evaluates ``Tr[Omega Theta]`` on the receiver's density matrix. The
Monte Carlo mode builds the swap-encoded global pure state instead, follows the
channel through Kraus trajectories and samples outcomes by the Born rule, so it
shares only the decoder with the exact route.
"""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from .entropics import i_hypo
from .qmat import (
    DensityMatrix,
    KrausChannel,
    LabelError,
    Operator,
    PreconditionError,
    PureState,
    RegisterSpace,
    apply_channel,
    basis_state,
    embed,
    hermitize,
    partial_trace,
    psd_func,
    purify,
    tensor,
    tensor_all,
    trace_norm,
)
from .states import as_rng, general_channel, rejection_purification

MEM_ENV = "ONESHOT_QIT_MEM_BUDGET"
DEFAULT_MEM_BUDGET = 2**31
POVM_TOL = 1e-9


class ResourceBudgetError(RuntimeError):
    """An exact simulation would exceed the configured memory budget."""

    def __init__(self, dim: int, need: int, budget: int, what: str = ""):
        self.dim = dim
        self.need = need
        self.budget = budget
        super().__init__(
            f"{what or 'simulation'} needs a {dim}-dimensional space "
            f"(~{need} bytes) but the budget is {budget} bytes ({MEM_ENV})"
        )


def memory_budget() -> int:
    raw = os.environ.get(MEM_ENV)
    if raw is None or raw == "":
        return DEFAULT_MEM_BUDGET
    try:
        return int(float(raw))
    except ValueError:
        raise ValueError(f"{MEM_ENV} must be a byte count, got {raw!r}") from None


def check_budget(dim: int, what: str = "", copies: int = 8) -> None:
    """Raise :class:`ResourceBudgetError` if ``copies`` dense dim x dim matrices do not fit."""
    need = 16 * copies * dim * dim
    budget = memory_budget()
    if need > budget:
        raise ResourceBudgetError(dim, need, budget, what)


def fits_budget(dim: int, copies: int = 8) -> bool:
    return 16 * copies * dim * dim <= memory_budget()


# --------------------------------------------------------------------------- #
# Configuration and results                                                   #
# --------------------------------------------------------------------------- #


def _is_pow2(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


@dataclass
class ProtocolConfig:
    """Message counts, error parameter and run mode.

    ``eps_stage1``/``eps_stage2`` override the tester error for the two
    decoding stages (default ``eps``); ``block_size`` overrides
    ``ceil(2^Imax / delta)`` in the blocked protocol.
    """

    M: int = 2
    N: int = 1
    eps: float = 0.1
    delta: float = 0.5
    mode: str = "exact"
    trials: int = 100_000
    seed: int = 0
    eps_stage1: float | None = None
    eps_stage2: float | None = None
    block_size: int | None = None

    def __post_init__(self):
        if not (_is_pow2(int(self.M)) and _is_pow2(int(self.N))):
            raise ValueError(f"M and N must be powers of 2, got M={self.M}, N={self.N}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.mode not in ("exact", "monte_carlo"):
            raise ValueError(f"mode must be 'exact' or 'monte_carlo', got {self.mode!r}")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        for e in (self.eps_stage1, self.eps_stage2):
            if e is not None and not 0 < e < 1:
                raise ValueError("stage eps must lie in (0, 1)")
        if self.block_size is not None and self.block_size < 1:
            raise ValueError("block_size must be positive")

    @property
    def R1(self) -> float:
        return math.log2(self.M)

    @property
    def R2(self) -> float:
        return math.log2(self.N)

    @property
    def eps1(self) -> float:
        return self.eps if self.eps_stage1 is None else self.eps_stage1

    @property
    def eps2(self) -> float:
        return self.eps if self.eps_stage2 is None else self.eps_stage2

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ProtocolOutcome:
    """Result of one protocol simulation.

    ``decoded[k, j]`` is the probability (or empirical frequency in Monte Carlo
    mode) of outcome ``j`` given message ``k``; the last column(s) are garbage
    outcomes. ``per_message_error[k] = 1 - decoded[k, k']`` for the correct
    column ``k'``.
    """

    protocol: str
    config: ProtocolConfig
    per_message_error: np.ndarray
    decoded: np.ndarray
    outcome_labels: list
    abort_prob: float = 0.0
    conditioned_on_success: bool = False
    rate_feasible: bool = False
    rate_terms: dict = field(default_factory=dict)
    bound_asserted: bool = False
    bound_value: float | None = None
    bound_holds: bool | None = None
    extras: dict = field(default_factory=dict)
    avg_input: DensityMatrix | None = None
    channel: KrausChannel | None = None

    @property
    def avg_error(self) -> float:
        return float(np.mean(self.per_message_error))

    @property
    def max_error(self) -> float:
        return float(np.max(self.per_message_error))

    @property
    def trace_norm_error(self) -> float:
        """``||D o N o E(psi) - psi||_1`` for the uniformly distributed message."""
        return 2.0 * self.avg_error

    @property
    def n_messages(self) -> int:
        return int(self.config.M * (self.config.N if self.protocol != "ajw" else 1))

    def to_json(self) -> dict:
        def clean(v):
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()
                        if not k.startswith("_") and not isinstance(x, (Operator, KrausChannel, PgmDecoder))}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            return v

        return clean(
            {
                "protocol": self.protocol,
                "config": self.config.to_dict(),
                "per_message_error": self.per_message_error,
                "avg_error": self.avg_error,
                "trace_norm_error": self.trace_norm_error,
                "abort_prob": self.abort_prob,
                "conditioned_on_success": self.conditioned_on_success,
                "rate_feasible": self.rate_feasible,
                "rate_terms": self.rate_terms,
                "bound_asserted": self.bound_asserted,
                "bound_value": self.bound_value,
                "bound_holds": self.bound_holds,
                "outcome_labels": [str(o) for o in self.outcome_labels],
                "decoded": self.decoded,
                "extras": self.extras,
            }
        )


# --------------------------------------------------------------------------- #
# Pretty-good measurement                                                     #
# --------------------------------------------------------------------------- #


@dataclass
class PgmDecoder:
    """Effects ``Omega_m`` plus the completion ``I - sum_m Omega_m``."""

    effects: list[np.ndarray]
    completion: np.ndarray
    base: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def all_effects(self) -> list[np.ndarray]:
        return list(self.effects) + [self.completion]

    def povm_error(self) -> float:
        """Max deviation from ``sum = I`` and most negative effect eigenvalue."""
        tot = sum(self.all_effects)
        dev = float(np.max(np.abs(tot - np.eye(tot.shape[0]))))
        neg = min(float(np.linalg.eigvalsh(hermitize(e)).min()) for e in self.all_effects)
        return max(dev, -neg, 0.0)


def pgm_build(lambdas: Sequence, cutoff: float = 1e-12) -> PgmDecoder:
    """``Omega_m = S^{-1/2} Lambda_m S^{-1/2}`` with ``S = sum_i Lambda_i`` (pseudo-inverse)."""
    lams = [hermitize(np.asarray(getattr(l, "data", l), dtype=complex)) for l in lambdas]
    if not lams:
        raise ValueError("need at least one tester")
    for k, l in enumerate(lams):
        w = np.linalg.eigvalsh(l)
        if w.min() < -POVM_TOL or w.max() > 1 + POVM_TOL:
            raise PreconditionError(f"tester {k} has eigenvalues outside [0, 1]: [{w.min():.3e}, {w.max():.3e}]")
    S = sum(lams)
    sis = psd_func(S, "inv_sqrt_pseudo", cutoff)
    effects = [hermitize(sis @ l @ sis) for l in lams]
    completion = hermitize(np.eye(S.shape[0]) - sum(effects))
    return PgmDecoder(effects, completion, lams)


def _trivial_decoder(dim: int) -> PgmDecoder:
    """A single message needs no measurement: one effect equal to the identity."""
    return PgmDecoder([np.eye(dim, dtype=complex)], np.zeros((dim, dim), dtype=complex), [])


def _tr(a, b) -> float:
    return float(np.einsum("ij,ji->", a, b).real)


def _sqrtm(e):
    # round-off eigenvalues would otherwise turn into sqrt-sized noise
    def root(w):
        floor = 1e-13 * max(1.0, float(np.abs(w).max()))
        return np.sqrt(np.where(w > floor, w, 0.0))

    return psd_func(hermitize(e), root)


# --------------------------------------------------------------------------- #
# Shared helpers                                                              #
# --------------------------------------------------------------------------- #


def _sender_receiver(phi: PureState, inputs: Sequence[str]) -> tuple[str, str]:
    send = [l for l in phi.labels if l in inputs]
    recv = [l for l in phi.labels if l not in inputs]
    if len(send) != 1 or len(recv) != 1:
        raise LabelError(f"resource {phi.labels} must hold exactly one channel input among {list(inputs)}")
    return send[0], recv[0]


def _embed_tester(pi: np.ndarray, tester_space: RegisterSpace, mapping: dict, space: RegisterSpace) -> np.ndarray:
    op = Operator(pi, tester_space.relabel(mapping))
    return embed(op, space).data


def _state_on(pieces: Sequence[DensityMatrix], space: RegisterSpace) -> np.ndarray:
    return tensor_all(pieces).permute(list(space.labels)).data


def _rate_ok(R: float, ih: float, eps: float) -> tuple[bool, float]:
    cap = ih - 2 * math.log2(1 / eps)
    return bool(R <= cap + 1e-12), cap


def _two_stage_table(states, dec1: PgmDecoder, dec2: list[PgmDecoder] | None):
    """Outcome table for a sqrt-instrument first stage followed by a second PGM.

    ``states[k]`` is the receiver state for message k. Outcome columns are
    ``(m1, m2)`` pairs flattened row-major with garbage last in each axis.
    """
    n1 = len(dec1.effects) + 1
    n2 = 1 if dec2 is None else len(dec2[0].effects) + 1
    roots = [_sqrtm(e) for e in dec1.effects]
    table = np.zeros((len(states), n1 * n2))
    for k, rho in enumerate(states):
        for j, (e, r) in enumerate(zip(dec1.effects, roots)):
            if dec2 is None:
                table[k, j] = _tr(e, rho)
                continue
            post = r @ rho @ r
            for l, f in enumerate(dec2[j].all_effects):
                table[k, j * n2 + l] = _tr(f, post)
        # first-stage garbage: second stage is not run
        table[k, (n1 - 1) * n2] = _tr(dec1.completion, rho)
    return np.clip(table, 0.0, 1.0)


# --------------------------------------------------------------------------- #
# Monte Carlo route                                                           #
# --------------------------------------------------------------------------- #


def _trajectories(vec: PureState, channel: KrausChannel, receiver: RegisterSpace):
    """Unnormalized receiver states ``rho_k`` of each Kraus branch of the global pure state."""
    ins = list(channel.in_labels)
    outs = list(channel.out_labels)
    others = [l for l in receiver.labels if l not in outs]
    rest = [l for l in vec.labels if l not in ins and l not in others]
    sp = vec.space
    t = vec.permute(rest + others + ins).vector
    dr = sp.sub(rest).total_dim
    do = sp.sub(others).total_dim
    din = sp.sub(ins).total_dim
    t = t.reshape(dr * do, din)
    out_space = sp.sub(rest) + sp.sub(others) + channel.out_space
    branches = []
    for K in channel.kraus:
        w = (t @ K.T).reshape(-1)
        psi = PureState(w, out_space, check=False).permute(rest + list(receiver.labels))
        mat = psi.vector.reshape(dr, receiver.total_dim)
        branches.append(mat.T @ mat.conj())
    return branches


def _mc_sample(branches, dec1: PgmDecoder, dec2: list[PgmDecoder] | None, shots: int, rng):
    """Nested multinomial sampling: Kraus branch, then stage-1 outcome, then stage-2 outcome."""
    n1 = len(dec1.effects) + 1
    n2 = 1 if dec2 is None else len(dec2[0].effects) + 1
    roots = [_sqrtm(e) for e in dec1.effects]
    pk = np.array([max(np.trace(b).real, 0.0) for b in branches])
    counts = np.zeros(n1 * n2, dtype=np.int64)
    route = np.zeros(n1 * n2)
    ck = rng.multinomial(shots, pk / pk.sum())
    for b, w, c in zip(branches, pk, ck):
        if w <= 0:
            continue
        rho = b / w
        p1 = np.clip([_tr(e, rho) for e in dec1.all_effects], 0, None)
        c1 = rng.multinomial(c, p1 / p1.sum())
        for j in range(n1):
            if dec2 is None or j == n1 - 1:
                counts[j * n2] += c1[j]
                route[j * n2] += w * p1[j]
                continue
            post = roots[j] @ rho @ roots[j]
            q = np.trace(post).real
            if q <= 0:
                counts[j * n2] += c1[j]
                continue
            p2 = np.clip([_tr(f, post / q) for f in dec2[j].all_effects], 0, None)
            c2 = rng.multinomial(c1[j], p2 / p2.sum())
            counts[j * n2 : (j + 1) * n2] += c2
            route[j * n2 : (j + 1) * n2] += w * p1[j] * p2
    return counts, route


def _swap(vec: PureState, a: str, b: str) -> PureState:
    """Exchange the contents of two registers of equal dimension."""
    if vec.space.dim(a) != vec.space.dim(b):
        raise LabelError("swapped registers must have equal dimension")
    order = list(vec.labels)
    return vec.relabel({a: b, b: a}).permute(order)


def _junk(label: str, d: int) -> PureState:
    return basis_state([(label, d)], 0)


def _mc_stats(outcome_counts: np.ndarray, correct_cols: Sequence[int], shots: int, exact_success: np.ndarray):
    emp = np.array([outcome_counts[k, c] / shots for k, c in enumerate(correct_cols)])
    sd = np.sqrt(np.clip(exact_success * (1 - exact_success), 0, None) / shots)
    z = np.where(sd > 0, np.abs(emp - exact_success) / np.where(sd > 0, sd, 1), np.where(emp == exact_success, 0.0, np.inf))
    return emp, sd, z


# --------------------------------------------------------------------------- #
# Single sender                                                               #
# --------------------------------------------------------------------------- #


def ajw_encoded_state(phi: PureState, channel: KrausChannel, m: int, M: int) -> PureState:
    """Global pure state after the swap encoder for message ``m`` (0-based).

    Registers: channel input (junk ``|0>`` before the swap) then
    ``EA_i, EB_i`` for every copy.
    """
    ea, eb = phi.labels
    a = channel.in_labels[0]
    d = phi.space.dim(ea)
    copies = [phi.relabel({ea: f"{ea}_{i}", eb: f"{eb}_{i}"}) for i in range(M)]
    vec = tensor_all([_junk(a, d)] + copies)
    return _swap(vec, a, f"{ea}_{m}")


def avg_encoder_input(states: Sequence, input_labels: Sequence[str]) -> DensityMatrix:
    """Channel-input marginal averaged uniformly over the encoded global states."""
    acc = None
    for s in states:
        r = partial_trace(s, list(input_labels)).permute(list(input_labels))
        acc = r.data if acc is None else acc + r.data
    return DensityMatrix(acc / len(states), r.space, check=False)


def ajw_simulate(channel: KrausChannel, phi: PureState, config: ProtocolConfig) -> ProtocolOutcome:
    """Single-sender entanglement-assisted transmission of ``config.M`` messages.

    ``phi`` lives on ``(E_A, E_B)``; ``E_A`` has the dimension of the channel
    input and is the register swapped into the channel. Bob decodes with the
    PGM built from the optimal tester for ``I_H^eps(E_B : B)`` on
    ``N(phi^{A E_B})``.
    """
    if len(channel.in_labels) != 1:
        raise LabelError("single-sender protocol needs a one-register channel input")
    ea, eb = phi.labels
    a = channel.in_labels[0]
    if phi.space.dim(ea) != channel.in_space.dim(a):
        raise LabelError("E_A must match the channel input dimension")
    M = config.M
    out = apply_channel(channel, phi.relabel({ea: a}))  # (eb, outs)
    outs = list(channel.out_labels)
    ih, tester = i_hypo(out, ([eb], outs), config.eps1)
    feasible, cap = _rate_ok(config.R1, ih.value, config.eps)

    receiver = channel.out_space + RegisterSpace(tuple((f"{eb}_{i}", phi.space.dim(eb)) for i in range(M)))
    check_budget(receiver.total_dim, "single-sender decoder")
    if M == 1:
        dec = _trivial_decoder(receiver.total_dim)
    else:
        lams = [_embed_tester(tester.pi, out.space, {eb: f"{eb}_{m}"}, receiver) for m in range(M)]
        dec = pgm_build(lams)
    phi_eb = partial_trace(phi, [eb])
    thetas = []
    for m in range(M):
        pieces = [out.relabel({eb: f"{eb}_{m}"})]
        pieces += [phi_eb.relabel({eb: f"{eb}_{i}"}) for i in range(M) if i != m]
        thetas.append(_state_on(pieces, receiver))
    table = _two_stage_table(thetas, dec, None)
    success = np.array([table[m, m] for m in range(M)])
    errors = 1.0 - success

    enc_dim = phi.space.dim(ea) * phi.space.total_dim**M
    encoded = [ajw_encoded_state(phi, channel, m, M) for m in range(M)] if enc_dim <= 2**16 else None
    avg_in = avg_encoder_input(encoded, [a]) if encoded else partial_trace(phi, [ea]).relabel({ea: a})

    bound = 16 * config.eps
    o = ProtocolOutcome(
        protocol="ajw",
        config=config,
        per_message_error=errors,
        decoded=table,
        outcome_labels=list(range(M)) + ["garbage"],
        rate_feasible=feasible,
        rate_terms={"I_H": ih.value, "rate": config.R1, "rate_cap": cap, "tester_eps": config.eps1},
        bound_asserted=feasible,
        bound_value=bound,
        bound_holds=bool(errors.max() <= bound + 1e-12) if feasible else None,
        extras={"povm_error": dec.povm_error(), "tester_acceptance": tester.acceptance},
        avg_input=avg_in,
        channel=channel,
    )
    if config.mode == "monte_carlo":
        _ajw_monte_carlo(o, channel, phi, receiver, dec, config)
    return o


def _ajw_monte_carlo(o: ProtocolOutcome, channel, phi, receiver, dec, config):
    M = config.M
    rng = as_rng(config.seed)
    counts = np.zeros((M, M + 1), dtype=np.int64)
    route = np.zeros((M, M + 1))
    for m in range(M):
        vec = ajw_encoded_state(phi, channel, m, M)
        check_budget(vec.space.total_dim, "Monte Carlo global state", copies=1)
        br = _trajectories(vec, channel, receiver)
        c, r = _mc_sample(br, dec, None, config.trials, rng)
        counts[m], route[m] = c, r
    exact = 1 - o.per_message_error
    emp, sd, z = _mc_stats(counts, list(range(M)), config.trials, exact)
    o.extras["monte_carlo"] = {
        "shots": config.trials,
        "empirical_success": emp,
        "sigma": sd,
        "z": z,
        "max_z": float(np.max(z)),
        "route_success": np.array([route[m, m] for m in range(M)]),
        "counts": counts,
    }
    o.extras["exact_per_message_error"] = o.per_message_error.copy()
    o.per_message_error = 1 - emp
    o.decoded = counts / config.trials


# --------------------------------------------------------------------------- #
# Two senders                                                                 #
# --------------------------------------------------------------------------- #


def _noise0(channel: KrausChannel, a: str, b: str, phi2_b: DensityMatrix) -> KrausChannel:
    """``N0(s) = N(s (x) phi2^B)`` as an explicit channel ``A -> C``."""
    w, v = np.linalg.eigh(phi2_b.data)
    da, db = channel.in_space.dim(a), channel.in_space.dim(b)
    a_first = channel.in_labels.index(a) == 0
    ks = []
    for lam, vec in zip(w, v.T):
        if lam <= 1e-15:
            continue
        col = vec.reshape(-1, 1)
        T = np.kron(np.eye(da), col) if a_first else np.kron(col, np.eye(da))
        ks += [math.sqrt(lam) * K @ T for K in channel.kraus]
    return KrausChannel(ks, channel.in_space.sub([a]), channel.out_space)


def _noise1(channel: KrausChannel, a: str, b: str, phi1: PureState, ec: str) -> KrausChannel:
    """``N1(s) = N(phi1^{A E_C} (x) s)`` as an explicit channel ``B -> (E_C, C)``."""
    da, db = channel.in_space.dim(a), channel.in_space.dim(b)
    dc = channel.out_space.total_dim
    f = phi1.permute([ec, a]).vector.reshape(-1, da)
    ks = []
    for K in channel.kraus:
        if channel.in_labels.index(a) == 0:
            t = K.reshape(dc, da, db)
            op = np.einsum("ea,cab->ecb", f, t)
        else:
            t = K.reshape(dc, db, da)
            op = np.einsum("ea,cba->ecb", f, t)
        ks.append(op.reshape(-1, db))
    return KrausChannel(ks, channel.in_space.sub([b]), phi1.space.sub([ec]) + channel.out_space)


def _two_sender_decoders(pi1, sp1, pi2, sp2, ec, fc, receiver, M, N):
    if M == 1:
        dec1 = _trivial_decoder(receiver.total_dim)
    else:
        dec1 = pgm_build([_embed_tester(pi1, sp1, {ec: f"{ec}_{m}"}, receiver) for m in range(M)])
    dec2 = []
    for mh in range(M):
        if N == 1:
            dec2.append(_trivial_decoder(receiver.total_dim))
        else:
            dec2.append(
                pgm_build([_embed_tester(pi2, sp2, {ec: f"{ec}_{mh}", fc: f"{fc}_{n}"}, receiver) for n in range(N)])
            )
    return dec1, dec2


def _stage1_distance(states_ext, ext_space, dec1: PgmDecoder, receiver: RegisterSpace, m: int) -> float:
    """``||Theta_1_hat - Theta_ideal||_1`` for true message ``m``.

    Measurement outcomes other than ``m`` contribute their weight; outcome ``m``
    contributes ``||sqrt(Omega_m) rho sqrt(Omega_m) - rho||_1`` on ``ext_space``.
    """
    rho = states_ext
    root = _sqrtm(dec1.effects[m])
    if ext_space != receiver:
        root = embed(Operator(root, receiver), ext_space).data
    wrong = 1.0 - _tr(dec1.effects[m], partial_trace(DensityMatrix(rho, ext_space, check=False),
                                                      list(receiver.labels)).permute(list(receiver.labels)).data)
    return float(wrong + trace_norm(root @ rho @ root - rho))


def _two_sender_core(protocol, channel, config, joint_state_fn, ext_pieces_fn, pi1, sp1, pi2, sp2, ec, fc,
                     rate_terms, feasible, avg_in, mc_vec_fn):
    M, N = config.M, config.N
    receiver = (
        channel.out_space
        + RegisterSpace(tuple((f"{ec}_{i}", sp1.dim(ec)) for i in range(M)))
        + RegisterSpace(tuple((f"{fc}_{j}", sp2.dim(fc)) for j in range(N)))
    )
    check_budget(receiver.total_dim, f"{protocol} decoder")
    dec1, dec2 = _two_sender_decoders(pi1, sp1, pi2, sp2, ec, fc, receiver, M, N)
    states = []
    for m in range(M):
        for n in range(N):
            states.append(_state_on(joint_state_fn(m, n), receiver))
    table = _two_stage_table(states, dec1, dec2)
    n2 = N + 1
    correct = [m * n2 + n for m in range(M) for n in range(N)]
    success = np.array([table[k, c] for k, c in enumerate(correct)])
    stage1_success = np.array([_tr(dec1.effects[m], states[m * N + n]) for m in range(M) for n in range(N)])

    # stage-1 post-measurement distance, on the extended space when it fits
    ext_pieces = ext_pieces_fn(0, 0)
    ext_dims = [p.space.total_dim for p in ext_pieces]
    ext_dim = int(np.prod(ext_dims))
    extended = fits_budget(ext_dim, copies=6)
    dists = []
    for m in range(M):
        for n in range(N):
            if extended:
                pieces = ext_pieces_fn(m, n)
                t = tensor_all(pieces)
                extra = [l for l in t.labels if l not in receiver.labels]
                sp = receiver + t.space.sub(extra)
                dists.append(_stage1_distance(t.permute(list(sp.labels)).data, sp, dec1, receiver, m))
            else:
                dists.append(_stage1_distance(states[m * N + n], receiver, dec1, receiver, m))
    errors = 1.0 - success
    eps = config.eps
    s1_bound, joint_bound = 12 * math.sqrt(eps), 28 * math.sqrt(eps)
    o = ProtocolOutcome(
        protocol=protocol,
        config=config,
        per_message_error=errors,
        decoded=table,
        outcome_labels=[(i, j) for i in list(range(M)) + ["garbage"] for j in list(range(N)) + ["garbage"]],
        rate_feasible=feasible,
        rate_terms=rate_terms,
        bound_asserted=feasible,
        bound_value=joint_bound,
        bound_holds=bool(errors.max() <= joint_bound + 1e-12) if feasible else None,
        extras={
            "stage1_error": 1.0 - stage1_success,
            "stage1_error_bound": 16 * eps,
            "stage1_distance": np.array(dists),
            "stage1_distance_bound": s1_bound,
            "stage1_distance_space": "extended" if extended else "receiver-only",
            "stage1_bound_holds": bool(max(dists) <= s1_bound + 1e-12) if feasible else None,
            "povm_error": max([dec1.povm_error()] + [d.povm_error() for d in dec2]),
        },
        avg_input=avg_in,
        channel=channel,
    )
    o.extras["_decoders"] = (dec1, dec2, receiver)
    if config.mode == "monte_carlo":
        rng = as_rng(config.seed)
        counts = np.zeros_like(table, dtype=np.int64)
        route = np.zeros_like(table)
        for m in range(M):
            for n in range(N):
                vec = mc_vec_fn(m, n)
                check_budget(vec.space.total_dim, "Monte Carlo global state", copies=1)
                br = _trajectories(vec, channel, receiver)
                c, r = _mc_sample(br, dec1, dec2, config.trials, rng)
                counts[m * N + n], route[m * N + n] = c, r
        emp, sd, z = _mc_stats(counts, correct, config.trials, success)
        o.extras["monte_carlo"] = {
            "shots": config.trials,
            "empirical_success": emp,
            "sigma": sd,
            "z": z,
            "max_z": float(np.max(z)),
            "route_success": np.array([route[k, c] for k, c in enumerate(correct)]),
            "counts": counts,
        }
        o.extras["exact_per_message_error"] = errors.copy()
        o.per_message_error = 1 - emp
        o.decoded = counts / config.trials
    return o


def successive_simulate(channel: KrausChannel, phi1: PureState, phi2: PureState,
                        config: ProtocolConfig) -> ProtocolOutcome:
    """Two-sender transmission decoded by successive cancellation.

    ``phi1`` lives on ``(E_C, A)`` and ``phi2`` on ``(F_C, B)`` where ``A`` and
    ``B`` are the channel inputs. Stage one measures a sqrt-instrument of the
    PGM for the tester of ``I_H^eps(E_C : C)`` under ``N0(s) = N(s (x) phi2^B)``;
    stage two uses, for each first-stage outcome, the PGM for the tester of
    ``I_H^eps(F_C : C E_C)`` under ``N1(s) = N(phi1^{A E_C} (x) s)``.
    """
    ins = list(channel.in_labels)
    if len(ins) != 2:
        raise LabelError("two-sender protocol needs a two-register channel input")
    a, ec = _sender_receiver(phi1, ins)
    b, fc = _sender_receiver(phi2, ins)
    M, N = config.M, config.N
    n0 = _noise0(channel, a, b, partial_trace(phi2, [b]))
    n1 = _noise1(channel, a, b, phi1, ec)
    outs = list(channel.out_labels)
    s1 = apply_channel(n0, phi1)  # (ec, outs)
    s2 = apply_channel(n1, phi2)  # (fc, ec, outs)
    ih1, t1 = i_hypo(s1, ([ec], outs), config.eps1)
    ih2, t2 = i_hypo(s2, ([fc], [ec] + outs), config.eps2)
    ok1, cap1 = _rate_ok(config.R1, ih1.value, config.eps)
    ok2, cap2 = _rate_ok(config.R2, ih2.value, config.eps)
    rate_terms = {"I_H_1": ih1.value, "I_H_2": ih2.value, "R1": config.R1, "R2": config.R2,
                  "rate_cap_1": cap1, "rate_cap_2": cap2}

    phi1_ec = partial_trace(phi1, [ec])
    phi2_fc = partial_trace(phi2, [fc])

    def joint(m, n):
        core = apply_channel(channel, tensor(phi1.relabel({ec: f"{ec}_{m}"}), phi2.relabel({fc: f"{fc}_{n}"})))
        return ([core] + [phi1_ec.relabel({ec: f"{ec}_{i}"}) for i in range(M) if i != m]
                + [phi2_fc.relabel({fc: f"{fc}_{j}"}) for j in range(N) if j != n])

    def ext(m, n):
        core = apply_channel(channel, tensor(phi1.relabel({ec: f"{ec}_{m}"}), phi2.relabel({fc: f"{fc}_{n}"})))
        return ([core] + [phi1.relabel({ec: f"{ec}_{i}", a: f"EA_{i}"}).dm() for i in range(M) if i != m]
                + [phi2.relabel({fc: f"{fc}_{j}", b: f"FB_{j}"}).dm() for j in range(N) if j != n])

    def encoded(m, n):
        da, db = phi1.space.dim(a), phi2.space.dim(b)
        vec = tensor_all(
            [_junk(a, da), _junk(b, db)]
            + [phi1.relabel({ec: f"{ec}_{i}", a: f"EA_{i}"}) for i in range(M)]
            + [phi2.relabel({fc: f"{fc}_{j}", b: f"FB_{j}"}) for j in range(N)]
        )
        return _swap(_swap(vec, a, f"EA_{m}"), b, f"FB_{n}")

    enc_dim = phi1.space.dim(a) * phi2.space.dim(b) * phi1.space.total_dim**M * phi2.space.total_dim**N
    if fits_budget(enc_dim, copies=1) and enc_dim <= 2**16:
        avg_in = avg_encoder_input([encoded(m, n) for m in range(M) for n in range(N)], [a, b])
    else:
        avg_in = tensor(partial_trace(phi1, [a]), partial_trace(phi2, [b])).permute([a, b])
    return _two_sender_core("successive", channel, config, joint, ext, t1.pi, s1.space, t2.pi, s2.space, ec, fc,
                            rate_terms, ok1 and ok2, avg_in, encoded)


def general_decoding_simulate(channel: KrausChannel, varphi: PureState, config: ProtocolConfig,
                              phi1: PureState | None = None, phi2: PureState | None = None) -> ProtocolOutcome:
    """Successive decoding with a correlated resource at the true index.

    ``varphi`` lives on ``(E_C, F_C, A, B)`` (the two non-input registers in that
    order). At index ``(m, n)`` the receiver holds ``N(varphi)`` while every
    other copy is ``phi1^{E_C}`` or ``phi2^{F_C}``, with ``phi1, phi2``
    purifications of the corresponding marginals of ``varphi`` (spectral
    purifications onto copies of ``A`` and ``B`` by default). Both testers are
    optimal for the mutual informations of ``N(varphi)``.
    """
    ins = list(channel.in_labels)
    if len(ins) != 2:
        raise LabelError("two-sender protocol needs a two-register channel input")
    a, b = ins
    if a not in varphi.labels or b not in varphi.labels:
        raise LabelError("resource must contain both channel inputs")
    rest = [l for l in varphi.labels if l not in ins]
    if len(rest) != 2:
        raise LabelError("resource must hold exactly two receiver registers")
    ec, fc = rest
    M, N = config.M, config.N
    if phi1 is None:
        phi1 = purify(partial_trace(varphi, [ec]), [(a, varphi.space.dim(a))])
    if phi2 is None:
        phi2 = purify(partial_trace(varphi, [fc]), [(b, varphi.space.dim(b))])
    if _sender_receiver(phi1, ins) != (a, ec) or _sender_receiver(phi2, ins) != (b, fc):
        raise LabelError("phi1/phi2 must live on (E_C, A) and (F_C, B)")
    for p, lab in ((phi1, ec), (phi2, fc)):
        res = trace_norm(partial_trace(p, [lab]).data - partial_trace(varphi, [lab]).data)
        if res > 1e-8:
            raise PreconditionError(f"resource copy does not match the {lab} marginal ({res:.2e})")
    outs = list(channel.out_labels)
    out = apply_channel(channel, varphi)  # (ec, fc, outs)
    s1 = partial_trace(out, [ec] + outs)
    s2 = partial_trace(out, [fc, ec] + outs).permute([fc, ec] + outs)
    ih1, t1 = i_hypo(s1, ([ec], outs), config.eps1)
    ih2, t2 = i_hypo(s2, ([fc], [ec] + outs), config.eps2)
    ok1, cap1 = _rate_ok(config.R1, ih1.value, config.eps)
    ok2, cap2 = _rate_ok(config.R2, ih2.value, config.eps)
    rate_terms = {"I_H_1": ih1.value, "I_H_2": ih2.value, "R1": config.R1, "R2": config.R2,
                  "rate_cap_1": cap1, "rate_cap_2": cap2}
    phi1_ec = partial_trace(phi1, [ec])
    phi2_fc = partial_trace(phi2, [fc])

    def joint(m, n):
        core = out.relabel({ec: f"{ec}_{m}", fc: f"{fc}_{n}"})
        return ([core] + [phi1_ec.relabel({ec: f"{ec}_{i}"}) for i in range(M) if i != m]
                + [phi2_fc.relabel({fc: f"{fc}_{j}"}) for j in range(N) if j != n])

    def ext(m, n):
        core = out.relabel({ec: f"{ec}_{m}", fc: f"{fc}_{n}"})
        return ([core] + [phi1.relabel({ec: f"{ec}_{i}", a: f"EA_{i}"}).dm() for i in range(M) if i != m]
                + [phi2.relabel({fc: f"{fc}_{j}", b: f"FB_{j}"}).dm() for j in range(N) if j != n])

    def vec_fn(m, n):
        return tensor_all(
            [varphi.relabel({ec: f"{ec}_{m}", fc: f"{fc}_{n}"})]
            + [phi1.relabel({ec: f"{ec}_{i}", a: f"EA_{i}"}) for i in range(M) if i != m]
            + [phi2.relabel({fc: f"{fc}_{j}", b: f"FB_{j}"}) for j in range(N) if j != n]
        )

    avg_in = partial_trace(varphi, [a, b]).permute([a, b])
    o = _two_sender_core("general", channel, config, joint, ext, t1.pi, s1.space, t2.pi, s2.space, ec, fc,
                         rate_terms, ok1 and ok2, avg_in, vec_fn)
    return o


# --------------------------------------------------------------------------- #
# Rejection sampling and the blocked protocol                                 #
# --------------------------------------------------------------------------- #


def rejection_success_probability(p0: float, n_copies: int) -> float:
    return 1.0 - (1.0 - p0) ** n_copies


def b_star_distribution(p0: float, n_copies: int) -> np.ndarray:
    """Exact ``Pr[b* = b]`` (unconditional) under a uniformly random measurement order.

    Copy ``b`` sits at position ``k`` with probability ``1/n`` and is the first
    success with probability ``(1 - p0)^k p0``.
    """
    per_pos = np.array([(1 - p0) ** k * p0 for k in range(n_copies)])
    return np.full(n_copies, per_pos.sum() / n_copies)


@dataclass
class RejectionResult:
    success: bool
    b_star: int
    q_outcomes: np.ndarray
    order: np.ndarray


def _q_prob(rp) -> float:
    return float(rp.q_probability(0)) if hasattr(rp, "q_probability") else float(rp)


def rejection_sample(rp, n_copies: int, seed=None) -> RejectionResult:
    """Measure the ``Q`` flags of ``n_copies`` copies in a uniformly random order.

    Stops at the first ``0``. ``rp`` is a :class:`RejectionPurification` (the
    outcome probability is read off its state) or a bare probability.
    ``q_outcomes[b]`` is the result on copy ``b`` or ``-1`` if unmeasured.
    """
    if n_copies < 1:
        raise ValueError("n_copies must be positive")
    p0 = _q_prob(rp)
    rng = as_rng(seed)
    order = rng.permutation(n_copies)
    q = np.full(n_copies, -1, dtype=int)
    for b in order:
        q[b] = 0 if rng.random() < p0 else 1
        if q[b] == 0:
            return RejectionResult(True, int(b), q, order)
    return RejectionResult(False, -1, q, order)


def rejection_sample_many(rp, n_copies: int, shots: int, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`rejection_sample`; returns ``(success, b_star)`` arrays (``-1`` on abort)."""
    p0 = _q_prob(rp)
    rng = as_rng(seed)
    order = rng.permuted(np.tile(np.arange(n_copies), (shots, 1)), axis=1)
    hits = rng.random((shots, n_copies)) < p0
    success = hits.any(axis=1)
    first = np.argmax(hits, axis=1)
    b_star = np.where(success, order[np.arange(shots), first], -1)
    return success, b_star


def d_final(rho_AfBfC: DensityMatrix, K: int, eps: float, af: str = "Af", bf: str = "Bf", c: str = "C"):
    """``D_H^eps`` of ``rho^{Af Bf C} (x) (1/K) sum_x |xx><xx|`` against
    ``rho^{Af Bf} (x) rho^C (x) pi (x) pi``, solved block by block."""
    from .entropics import d_hypo_blocks

    order = [af, bf, c]
    r = rho_AfBfC.permute(order).data
    s = tensor(partial_trace(rho_AfBfC, [af, bf]).permute([af, bf]), partial_trace(rho_AfBfC, [c])).data
    rb, sb = [], []
    for x in range(K):
        for y in range(K):
            rb.append(r / K if x == y else np.zeros_like(r))
            sb.append(s / K**2)
    return d_hypo_blocks(rb, sb, eps)


def blocked_protocol_simulate(rho_AfBfC: DensityMatrix, config: ProtocolConfig, af: str = "Af", bf: str = "Bf",
                              c: str = "C") -> ProtocolOutcome:
    """Rejection-sampled two-sender protocol with a classical side channel.

    The senders' copies of ``phi1 = purify(rho^Af)`` and ``phi2 = purify(rho^Bf)``
    are grouped into blocks of ``|B| = ceil(2^Imax / delta)``. The flag
    measurements succeed at ``b*`` with probability ``1 - (1 - p0)^|B|``; ``b*``
    travels over the dephasing channel and the receiver runs the general
    decoder on the ``b*`` slice, whose state at the true index is
    ``N(phi) = rho^{Af Bf C}`` with ``phi`` the ``Q = 0`` branch. Errors are
    conditioned on not aborting.
    """
    ra = partial_trace(rho_AfBfC, [af])
    rb = partial_trace(rho_AfBfC, [bf])
    phi1 = purify(ra, "A")
    phi2 = purify(rb, "B")
    rab = partial_trace(rho_AfBfC, [af, bf]).permute([af, bf])
    rp = rejection_purification(rab, phi1, phi2)
    p0 = rp.q_probability(0)
    K = config.block_size or max(1, math.ceil(2.0 ** rp.imax / config.delta - 1e-9))
    phi = rp.branch(0)  # (af, A, bf, B)
    channel = general_channel(rho_AfBfC.permute([af, bf, c]), phi, af, bf, c)
    varphi = phi.permute([af, bf, "A", "B"])
    sub = ProtocolConfig(M=config.M, N=config.N, eps=config.eps, delta=config.delta, mode="exact",
                         trials=config.trials, seed=config.seed, eps_stage1=config.eps_stage1,
                         eps_stage2=config.eps_stage2)
    gd = general_decoding_simulate(channel, varphi, sub, phi1=phi1, phi2=phi2)
    abort = (1 - p0) ** K
    abort_bound = math.exp(-1 / config.delta)
    dist = b_star_distribution(p0, K)
    phi_ab = partial_trace(phi, ["A", "B"]).permute(["A", "B"])
    x_state = DensityMatrix(np.diag(dist / dist.sum()), [("XA", K)], check=False)
    avg_in = tensor(phi_ab, x_state)
    extras = dict(gd.extras)
    extras.update(
        {
            "imax": rp.imax,
            "p0": p0,
            "block_size": K,
            "abort_bound": abort_bound,
            "abort_holds": bool(abort <= abort_bound + 1e-12),
            "b_star_distribution": dist,
            "success_probability": 1 - abort,
        }
    )
    o = ProtocolOutcome(
        protocol="blocked",
        config=config,
        per_message_error=gd.per_message_error,
        decoded=gd.decoded,
        outcome_labels=gd.outcome_labels,
        abort_prob=float(abort),
        conditioned_on_success=True,
        rate_feasible=gd.rate_feasible,
        rate_terms={"I_H_1": gd.rate_terms["I_H_1"], "I_H_2": gd.rate_terms["I_H_2"], "R1": config.R1,
                    "R2": config.R2, "rate_cap_1": gd.rate_terms["rate_cap_1"],
                    "rate_cap_2": gd.rate_terms["rate_cap_2"]},
        bound_asserted=gd.bound_asserted,
        bound_value=gd.bound_value,
        bound_holds=gd.bound_holds,
        extras=extras,
        avg_input=avg_in,
        channel=channel.tensor(_dephasing(K)),
    )
    o.extras["rho_AfBfC"] = rho_AfBfC
    if config.mode == "monte_carlo":
        success, b_star = rejection_sample_many(rp, K, config.trials, config.seed)
        rng = as_rng(np.random.SeedSequence(config.seed, spawn_key=(1,)))
        n_ok = int(success.sum())
        counts = np.zeros_like(gd.decoded, dtype=np.int64)
        for k in range(gd.decoded.shape[0]):
            p = np.clip(gd.decoded[k], 0, None)
            counts[k] = rng.multinomial(n_ok, p / p.sum()) if n_ok else 0
        o.extras["monte_carlo"] = {
            "shots": config.trials,
            "successes": n_ok,
            "abort_rate": 1 - n_ok / config.trials,
            "b_star_counts": np.bincount(b_star[success], minlength=K),
        }
        o.extras["exact_per_message_error"] = gd.per_message_error.copy()
        if n_ok:
            correct = [m * (config.N + 1) + n for m in range(config.M) for n in range(config.N)]
            o.per_message_error = np.array([1 - counts[k, cc] / n_ok for k, cc in enumerate(correct)])
            o.decoded = counts / n_ok
    return o


def _dephasing(K: int) -> KrausChannel:
    from .states import dephasing_channel

    return dephasing_channel(K)
