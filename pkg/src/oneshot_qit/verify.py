"""Executable checks of the chain rules, the converse and the supporting lemmas.

Every check returns a row with named terms, ``lhs``, ``rhs`` and an oriented
``slack`` (``slack >= -tol`` means the inequality holds). Sweeps draw one
independent generator per trial from ``SeedSequence(seed, spawn_key=(trial,))``
so results do not depend on evaluation order.

Verdicts:

``pass``          the inequality holds within ``tol``.
``violation``     it fails, certified (for smoothed terms: worst-case brackets).
``inconclusive``  smoothing brackets are too wide to decide; never a pass.
``vacuous``       the right-hand side is ``-inf`` (a correction term is undefined).
``skipped``       a precondition fails for this instance (noted).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .entropics import EntropicValue, d_hypo, i_hypo, i_max, i_max_smooth
from .protocols import (
    ProtocolConfig,
    ProtocolOutcome,
    ajw_simulate,
    blocked_protocol_simulate,
    d_final,
    general_decoding_simulate,
    successive_simulate,
)
from .qmat import (
    DensityMatrix,
    KrausChannel,
    PreconditionError,
    apply_channel,
    hermitize,
    partial_trace,
    psd_func,
    purify,
    tensor,
    trace_norm,
)
from .states import (
    bell_state,
    depolarizing_channel,
    amplitude_damping_channel,
    ghz_state,
    identity_channel,
    im_extended_channel,
    random_channel,
    random_im_state,
    random_state,
    trial_rng,
    ImState,
)

CHAIN_TOL = 1e-6
BRACKET_WIDTH_MAX = 0.05
ROUND = 12

VERDICTS = ("pass", "violation", "inconclusive", "vacuous", "skipped")


def _round(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return str(v)
        r = round(v, ROUND)
        return 0.0 if r == 0 else r
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, dict):
        return {k: _round(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_round(x) for x in v]
    return v


@dataclass
class VerificationReport:
    """Per-trial rows of one check plus the ensemble that produced them."""

    check: str
    ensemble: dict
    rows: list[dict] = field(default_factory=list)
    relation: str = ">="
    tol: float = CHAIN_TOL
    notes: list[str] = field(default_factory=list)

    def count(self, verdict: str) -> int:
        return sum(1 for r in self.rows if r.get("verdict") == verdict)

    @property
    def violations(self) -> int:
        return self.count("violation")

    @property
    def inconclusive(self) -> int:
        return self.count("inconclusive")

    @property
    def passes(self) -> int:
        return self.count("pass")

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def summary(self) -> dict:
        return {v: self.count(v) for v in VERDICTS} | {"trials": len(self.rows)}

    def extend(self, other: "VerificationReport") -> None:
        self.rows.extend(other.rows)
        self.notes.extend(other.notes)

    def to_dict(self) -> dict:
        return _round(
            {
                "check": self.check,
                "ensemble": self.ensemble,
                "relation": self.relation,
                "tol": self.tol,
                "summary": self.summary(),
                "violations": self.violations,
                "notes": self.notes,
                "rows": self.rows,
            }
        )

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)

    def columns(self) -> list[str]:
        head = ["trial", "verdict", "lhs", "rhs", "slack"]
        rest = sorted({k for r in self.rows for k in r} - set(head))
        return [h for h in head if any(h in r for r in self.rows)] + rest

    def to_csv(self) -> str:
        buf = io.StringIO()
        cols = self.columns()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({c: _csv_cell(_round(r.get(c, ""))) for c in cols})
        return buf.getvalue()


def _csv_cell(v):
    if isinstance(v, (list, dict)):
        return json.dumps(v, sort_keys=True)
    return v


def _verdict(slack: float, tol: float) -> str:
    if math.isnan(slack):
        return "inconclusive"
    if slack == math.inf:
        return "vacuous"
    return "pass" if slack >= -tol else "violation"


def _log2inv(e: float) -> float:
    return math.log2(1.0 / e)


# --------------------------------------------------------------------------- #
# Chain rule for states with independent marginals                            #
# --------------------------------------------------------------------------- #


def check_prop1(im: ImState, eps: float, eps1: float | None = None, eps2: float | None = None,
                log_term: float | None = None, lhs_eps: float | None = None, tol: float = CHAIN_TOL) -> dict:
    """``I_H^{eps_L}(Af Bf : C) >= I_H^{eps1}(Af : C) + I_H^{eps2}(Bf : Af C) + log_term``.

    Defaults: ``eps_L = eps``, ``eps1 = eps2 = eps^2`` and
    ``log_term = -2 * 2 log(1/eps)`` (one rate margin per sender).
    """
    eps1 = eps**2 if eps1 is None else eps1
    eps2 = eps**2 if eps2 is None else eps2
    lhs_eps = eps if lhs_eps is None else lhs_eps
    log_term = -2 * 2 * _log2inv(eps) if log_term is None else log_term
    af, bf, c = im.af, im.bf, im.c
    rho = im.rho
    lhs = i_hypo(rho, ([af, bf], [c]), lhs_eps)[0].value
    t1 = i_hypo(partial_trace(rho, [af, c]), ([af], [c]), eps1)[0].value
    t2 = i_hypo(rho, ([bf], [af, c]), eps2)[0].value
    rhs = t1 + t2 + log_term
    slack = lhs - rhs
    return {
        "lhs": lhs,
        "rhs": rhs,
        "slack": slack,
        "I_H_AB_C": lhs,
        "I_H_A_C": t1,
        "I_H_B_AC": t2,
        "log_term": log_term,
        "eps_lhs": lhs_eps,
        "eps1": eps1,
        "eps2": eps2,
        "verdict": _verdict(slack, tol),
    }


# --------------------------------------------------------------------------- #
# Chain rule for general tripartite states                                    #
# --------------------------------------------------------------------------- #


def check_thm1(rho: DensityMatrix, eps: float, eps1: float | None = None, eps2: float | None = None,
               delta: float = 0.5, log_term: float | None = None, labels: Sequence[str] = ("Af", "Bf", "C"),
               tol: float = CHAIN_TOL) -> dict:
    """``I_H^eps(Af Bf : C) >= I_H^{eps1}(Af:C) + I_H^{eps2}(Bf:Af C) - I_max(Af:Bf) + corrections``.

    Defaults: ``eps1 = eps2 = eps^4``; corrections are the two rate margins
    ``-2 log(1/eps1) - 2 log(1/eps2)``, the block-size overhead ``-log(1/delta)``
    and ``+log(1 - sqrt(28) eps1^{1/4})`` from the side-channel bound. The last
    term is ``-inf`` once ``sqrt(28) eps1^{1/4} >= 1``; the row is then vacuous.
    ``log_term`` replaces all corrections when given.
    """
    af, bf, c = labels
    eps1 = eps**4 if eps1 is None else eps1
    eps2 = eps**4 if eps2 is None else eps2
    rab = partial_trace(rho, [af, bf]).permute([af, bf])
    imax = i_max(rab, ([af], [bf])).value
    base = {"eps": eps, "eps1": eps1, "eps2": eps2, "delta": delta}
    if math.isinf(imax):
        return base | {"lhs": math.nan, "rhs": math.nan, "slack": math.nan, "verdict": "skipped",
                       "note": "supp(rho^AfBf) not inside supp(rho^Af x rho^Bf)"}
    lhs = i_hypo(rho, ([af, bf], [c]), eps)[0].value
    t1 = i_hypo(partial_trace(rho, [af, c]), ([af], [c]), eps1)[0].value
    t2 = i_hypo(rho, ([bf], [af, c]), eps2)[0].value
    if log_term is None:
        x = math.sqrt(28) * eps1**0.25
        side = math.log2(1 - x) if x < 1 else -math.inf
        log_term = -2 * _log2inv(eps1) - 2 * _log2inv(eps2) - _log2inv(delta) + side
    rhs = t1 + t2 - imax + log_term
    slack = lhs - rhs
    return base | {
        "lhs": lhs,
        "rhs": rhs,
        "slack": slack,
        "I_H_AB_C": lhs,
        "I_H_A_C": t1,
        "I_H_B_AC": t2,
        "I_max_A_B": imax,
        "log_term": log_term,
        "verdict": _verdict(slack, tol),
    }


# --------------------------------------------------------------------------- #
# Chain rule for smoothed max-information                                     #
# --------------------------------------------------------------------------- #


def _imax_term(rho, cut, e, resolution) -> EntropicValue:
    if e == 0:
        return i_max(rho, cut)
    return i_max_smooth(rho, cut, e, resolution=resolution)


def check_thm2(rho: DensityMatrix, eps: float, eps1: float | None = None, eps2: float | None = None,
               eps3: float | None = None, log_term: float | None = None, labels: Sequence[str] = ("A", "B", "C"),
               resolution: float = 0.01, width_max: float = BRACKET_WIDTH_MAX, tol: float = CHAIN_TOL) -> dict:
    """``I_max^eps(C : A B) <= I_max^{eps1}(C : A) + I_max^{eps2}(C A : B) - I_H^{eps3}(A : B) + log_term``.

    ``A, B`` are the two transmitted registers and ``C`` the reference. Defaults
    ``eps1 = eps2 = eps3 = eps^2`` and ``log_term = 2 log(1/eps)`` (``0`` when
    ``eps = 0``, where every term is exact). Smoothed terms enter through their
    certified brackets: a pass needs ``lhs.upper <= rhs.lower``, a violation
    needs ``lhs.lower > rhs.upper``; anything between, or a total bracket width
    above ``width_max``, is inconclusive.
    """
    a, b, c = labels
    e1 = eps**2 if eps1 is None else eps1
    e2 = eps**2 if eps2 is None else eps2
    e3 = eps**2 if eps3 is None else eps3
    if log_term is None:
        log_term = 0.0 if eps == 0 else 2 * _log2inv(eps)
    order = [c, a, b]
    r = rho.permute(order)
    try:
        lhs = _imax_term(r, ([c], [a, b]), eps, resolution)
        t1 = _imax_term(partial_trace(r, [c, a]), ([c], [a]), e1, resolution)
        t2 = _imax_term(r, ([c, a], [b]), e2, resolution)
    except Exception as exc:  # support violations of the unsmoothed terms
        return {"lhs": math.nan, "rhs": math.nan, "slack": math.nan, "verdict": "skipped", "note": str(exc)}
    ih = i_hypo(partial_trace(r, [a, b]), ([a], [b]), e3)[0]
    rhs_lo = t1.lower + t2.lower - ih.upper + log_term
    rhs_hi = t1.upper + t2.upper - ih.lower + log_term
    width = lhs.width + t1.width + t2.width + ih.width
    sound = rhs_lo - lhs.upper
    worst = rhs_hi - lhs.lower
    if any(math.isinf(v.upper) for v in (t1, t2)):
        verdict = "vacuous"
    elif sound >= -tol:
        verdict = "pass"
    elif worst < -tol:
        verdict = "violation"
    else:
        verdict = "inconclusive"
    if verdict == "pass" and width > width_max:
        verdict = "inconclusive"
    return {
        "lhs": lhs.value,
        "rhs": t1.value + t2.value - ih.value + log_term,
        "slack": sound,
        "lhs_lower": lhs.lower,
        "lhs_upper": lhs.upper,
        "I_max_C_A": t1.value,
        "I_max_C_A_bracket": [t1.lower, t1.upper],
        "I_max_CA_B": t2.value,
        "I_max_CA_B_bracket": [t2.lower, t2.upper],
        "I_H_A_B": ih.value,
        "log_term": log_term,
        "bracket_width": width,
        "eps": eps,
        "eps1": e1,
        "eps2": e2,
        "eps3": e3,
        "verdict": verdict,
    }


# --------------------------------------------------------------------------- #
# Converse                                                                    #
# --------------------------------------------------------------------------- #


def converse_bound(channel: KrausChannel, input_state: DensityMatrix, eps: float) -> EntropicValue:
    """``I_H^eps(B : B')`` on ``N(tau^{A B'})`` with ``tau`` purifying the average input."""
    ins = list(channel.in_labels)
    rho_a = input_state.permute(ins) if set(input_state.labels) == set(ins) else None
    if rho_a is None:
        raise PreconditionError(f"input state registers {input_state.labels} do not match channel inputs {ins}")
    refs = [(f"{l}'", rho_a.space.dim(l)) for l in ins]
    tau = purify(rho_a, refs)
    out = apply_channel(channel, tau)
    return i_hypo(out, ([r for r, _ in refs], list(channel.out_labels)), eps)[0]


def check_converse(outcome: ProtocolOutcome, channel: KrausChannel | None = None,
                   input_state: DensityMatrix | None = None, eps: float | None = None, tol: float = CHAIN_TOL) -> dict:
    """``log(#messages) <= I_H^eps(B : B')`` for the protocol's recorded error.

    ``eps`` defaults to the outcome's average error probability (conditioned
    on not aborting for protocols that can abort); passing a smaller ``eps``
    than the recorded error is a precondition failure. The channel and the
    encoder's average input default to those recorded on the outcome. For the
    blocked protocol the row also carries the block-diagonal side-channel bound
    ``D_FINAL``.
    """
    channel = channel or outcome.channel
    input_state = input_state or outcome.avg_input
    if channel is None or input_state is None:
        raise PreconditionError("outcome carries no channel/average input; pass them explicitly")
    err = outcome.avg_error
    if eps is None:
        eps = err
    elif err > eps + 1e-12:
        raise PreconditionError(f"protocol error {err:.6g} exceeds eps = {eps:.6g}")
    log_m = math.log2(outcome.n_messages)
    if eps >= 1:
        return {"lhs": log_m, "rhs": math.inf, "slack": math.inf, "verdict": "vacuous", "eps": eps}
    bound = converse_bound(channel, input_state, eps)
    slack = bound.value - log_m
    row = {
        "protocol": outcome.protocol,
        "M": outcome.config.M,
        "N": outcome.config.N if outcome.protocol != "ajw" else 1,
        "lhs": log_m,
        "rhs": bound.value,
        "slack": slack,
        "eps": eps,
        "abort_prob": outcome.abort_prob,
        "conditioned_on_success": outcome.conditioned_on_success,
        "verdict": _verdict(slack, tol),
    }
    if outcome.protocol == "blocked":
        rho = outcome.extras["rho_AfBfC"]
        K = int(outcome.extras["block_size"])
        df = d_final(rho, K, eps)[0].value
        row["D_FINAL"] = df
        row["D_FINAL_slack"] = df - log_m
        if df - log_m < -tol:
            row["verdict"] = "violation"
    return row


# --------------------------------------------------------------------------- #
# Lemma batteries                                                             #
# --------------------------------------------------------------------------- #


def _random_povm(d: int, n: int, rng) -> list[np.ndarray]:
    ch = random_channel([("X", d)], [("Y", d)], n_kraus=n, seed=rng)
    return [hermitize(k.conj().T @ k) for k in ch.kraus]


def gentle_measurement_row(rho: np.ndarray, povm: Sequence[np.ndarray]) -> dict:
    """``||rho (x) |i0><i0| - sum_i sqrt(L_i) rho sqrt(L_i) (x) |i><i| ||_1 <= 3 sqrt(eps)``."""
    probs = [float(np.trace(e @ rho).real) for e in povm]
    i0 = int(np.argmax(probs))
    eps = max(0.0, 1.0 - probs[i0])
    root = psd_func(povm[i0], "sqrt")
    lhs = sum(p for i, p in enumerate(probs) if i != i0) + trace_norm(root @ rho @ root - rho)
    rhs = 3 * math.sqrt(eps)
    return {"battery": "gentle", "lhs": lhs, "rhs": rhs, "slack": rhs - lhs, "eps": eps,
            "verdict": _verdict(rhs - lhs, 1e-9)}


def closeness_row(M: int, eps: float, rng, d_extra: int = 0) -> dict:
    """``D_H^eps(phi^{MM'} || phi^M (x) sigma) >= log M`` for a classical-quantum ``phi``
    with uniform ``M`` marginal and matching probability ``>= 1 - eps``."""
    dp = M + d_extra
    blocks = []
    for m in range(M):
        tau = random_state([("P", dp)], seed=rng).data
        e = np.zeros((dp, dp))
        e[m, m] = 1
        blocks.append((1 - eps) * e + eps * tau)
    phi = np.zeros((M * dp, M * dp), dtype=complex)
    for m, b in enumerate(blocks):
        phi[m * dp:(m + 1) * dp, m * dp:(m + 1) * dp] = b / M
    match = sum(blocks[m][m, m].real for m in range(M)) / M
    sigma = random_state([("P", dp)], seed=rng).data
    ref = np.kron(np.eye(M) / M, sigma)
    val = d_hypo(phi, ref, eps)[0].value
    slack = val - math.log2(M)
    return {"battery": "closeness", "M": M, "eps": eps, "match_prob": match, "lhs": val, "rhs": math.log2(M),
            "slack": slack, "verdict": _verdict(slack, CHAIN_TOL)}


def side_channel_row(rho: np.ndarray, sigma: np.ndarray, K: int, eps: float) -> dict:
    """``D_H^eps(rho (x) corr_K || sigma (x) pi (x) pi) <= D_H^{sqrt eps}(rho||sigma) + log K - log(1 - sqrt eps)``."""
    corr = np.zeros((K * K, K * K))
    for x in range(K):
        corr[x * K + x, x * K + x] = 1 / K
    lhs = d_hypo(np.kron(rho, corr), np.kron(sigma, np.eye(K * K) / K**2), eps)[0].value
    se = math.sqrt(eps)
    rhs = d_hypo(rho, sigma, se)[0].value + math.log2(K) - math.log2(1 - se)
    return {"battery": "side_channel", "K": K, "eps": eps, "lhs": lhs, "rhs": rhs, "slack": rhs - lhs,
            "verdict": _verdict(rhs - lhs, CHAIN_TOL)}


def data_processing_row(rho: DensityMatrix, sigma: DensityMatrix, channel: KrausChannel, eps: float) -> dict:
    """``D_H^eps(N(rho) || N(sigma)) <= D_H^eps(rho || sigma)``."""
    lhs = d_hypo(apply_channel(channel, rho), apply_channel(channel, sigma), eps)[0].value
    rhs = d_hypo(rho, sigma, eps)[0].value
    return {"battery": "data_processing", "eps": eps, "lhs": lhs, "rhs": rhs, "slack": rhs - lhs,
            "verdict": _verdict(rhs - lhs, CHAIN_TOL)}


def check_lemma_suite(seed: int = 0, trials: int = 100) -> VerificationReport:
    """Gentle measurement, closeness, side-channel and data-processing batteries."""
    rep = VerificationReport("lemmas", {"seed": seed, "trials": trials}, relation="rhs>=lhs")
    k = 0
    for t in range(trials):
        rng = trial_rng(seed, k)
        k += 1
        d = int(rng.integers(2, 5))
        n = int(rng.integers(2, 5))
        rho = random_state([("X", d)], seed=rng).data
        povm = _random_povm(d, n, rng)
        s = float(rng.uniform(0, 1)) if t % 2 else float(rng.uniform(0, 0.2))
        povm = [(1 - s) * np.eye(d) + s * povm[0]] + [s * e for e in povm[1:]]
        rep.rows.append({"trial": t} | gentle_measurement_row(rho, povm))
    t = 0
    for M in (2, 4):
        for eps in (0.05, 0.2):
            for extra in (0, 1):
                rng = trial_rng(seed, k)
                k += 1
                rep.rows.append({"trial": t} | closeness_row(M, eps, rng, extra))
                t += 1
    for t in range(max(1, trials // 5)):
        rng = trial_rng(seed, k)
        k += 1
        d = int(rng.integers(2, 4))
        K = (2, 4)[t % 2]
        eps = float(rng.uniform(0.01, 0.5))
        r = random_state([("X", d)], seed=rng).data
        sg = random_state([("X", d)], seed=rng).data
        rep.rows.append({"trial": t} | side_channel_row(r, sg, K, eps))
    for t in range(max(1, trials // 5)):
        rng = trial_rng(seed, k)
        k += 1
        d = int(rng.integers(2, 4))
        r = random_state([("X", d)], seed=rng)
        sg = random_state([("X", d)], seed=rng)
        ch = random_channel([("X", d)], [("Y", 2)], n_kraus=int(rng.integers(2, 4)), seed=rng)
        eps = float(rng.uniform(0.01, 0.6))
        rep.rows.append({"trial": t} | data_processing_row(r, sg, ch, eps))
    return rep


# --------------------------------------------------------------------------- #
# Sweeps                                                                      #
# --------------------------------------------------------------------------- #


def _sweep(name: str, trials: int, seed: int, ensemble: dict, fn: Callable, relation=">=") -> VerificationReport:
    rep = VerificationReport(name, ensemble | {"trials": trials, "seed": seed}, relation=relation)
    for t in range(trials):
        rep.rows.append({"trial": t} | fn(trial_rng(seed, t), t))
    return rep


def sweep_prop1(trials: int = 50, seed: int = 0, dims: Sequence[int] = (2, 2, 2), eps: float = 0.1,
                **kw) -> VerificationReport:
    """Random IM-states; odd trials use a pure global state when ``C`` is large enough."""
    da, db, dc = dims

    def one(rng, t):
        junk = 1 if (t % 2 and dc >= da * db) else None
        im = random_im_state(da, db, dc, seed=rng, dim_junk=junk)
        return check_prop1(im, eps, **kw)

    return _sweep("prop1", trials, seed, {"dims": list(dims), "eps": eps} | kw, one)


def sweep_thm1(trials: int = 100, seed: int = 0, dims: Sequence[int] = (2, 2, 2), eps: float = 0.1,
               **kw) -> VerificationReport:
    """Random full-rank tripartite states."""
    space = [("Af", dims[0]), ("Bf", dims[1]), ("C", dims[2])]
    return _sweep("thm1", trials, seed, {"dims": list(dims), "eps": eps, "delta": kw.get("delta", 0.5)} | kw,
                  lambda rng, t: check_thm1(random_state(space, seed=rng), eps, **kw))


def sweep_thm2(trials: int = 50, seed: int = 0, dims: Sequence[int] = (2, 2, 2), eps: float = 0.0,
               **kw) -> VerificationReport:
    """Random full-rank tripartite states on ``(A, B, C)``."""
    space = [("A", dims[0]), ("B", dims[1]), ("C", dims[2])]
    rep = _sweep("thm2", trials, seed, {"dims": list(dims), "eps": eps} | kw,
                 lambda rng, t: check_thm2(random_state(space, seed=rng), eps, **kw), relation="<=")
    if eps > 0:
        rep.notes.append("smoothed terms use certified brackets; inconclusive rows are not passes")
    return rep


def protocol_matrix(seed: int = 0, mode: str = "exact", trials: int = 100_000) -> list[ProtocolOutcome]:
    """The protocol configurations exercised by the converse check."""
    outs = []
    bell = bell_state("EA", "EB")
    for ch_name, ch in (("identity", identity_channel(2, "A", "B")),
                        ("depolarizing", depolarizing_channel(0.2, 2, "A", "B")),
                        ("damping", amplitude_damping_channel(0.3, "A", "B"))):
        for M in (1, 2, 4):
            for eps in (0.1, 0.5):
                o = ajw_simulate(ch, bell, ProtocolConfig(M=M, eps=eps, mode=mode, trials=trials, seed=seed))
                o.extras["channel_name"] = ch_name
                outs.append(o)
    for k, (M, N) in enumerate(((1, 1), (2, 1), (2, 2))):
        rng = trial_rng(seed, 100 + k)
        im = random_im_state(2, 2, 2, seed=rng)
        phi1 = purify(im.rho_af, "A")
        phi2 = purify(im.rho_bf, "B")
        ch = im_extended_channel(im, phi1, phi2)
        cfg = ProtocolConfig(M=M, N=N, eps=0.3, mode=mode, trials=trials, seed=seed)
        outs.append(successive_simulate(ch, phi1, phi2, cfg))
        varphi = tensor(phi1, phi2).permute(["Af", "Bf", "A", "B"])
        outs.append(general_decoding_simulate(ch, varphi, cfg, phi1, phi2))
    for k, (M, N) in enumerate(((1, 1), (2, 2))):
        rng = trial_rng(seed, 200 + k)
        rho = random_state([("Af", 2), ("Bf", 2), ("C", 2)], seed=rng)
        outs.append(blocked_protocol_simulate(rho, ProtocolConfig(M=M, N=N, eps=0.3, mode=mode, trials=trials,
                                                                  seed=seed)))
    outs.append(blocked_protocol_simulate(ghz_state(("Af", "Bf", "C")),
                                          ProtocolConfig(M=2, N=2, eps=0.3, delta=0.25, seed=seed)))
    return outs


def sweep_converse(seed: int = 0, mode: str = "exact", trials: int = 100_000) -> VerificationReport:
    rep = VerificationReport("converse", {"seed": seed, "mode": mode, "trials": trials})
    for t, o in enumerate(protocol_matrix(seed, mode, trials)):
        rep.rows.append({"trial": t} | check_converse(o))
    return rep


def run_check(check: str, trials: int, seed: int, dims: Sequence[int] = (2, 2, 2), eps: float | None = None,
              **kw) -> VerificationReport:
    """Dispatch used by the command line."""
    if check == "prop1":
        return sweep_prop1(trials, seed, dims, 0.1 if eps is None else eps, **kw)
    if check == "thm1":
        return sweep_thm1(trials, seed, dims, 0.1 if eps is None else eps, **kw)
    if check == "thm2":
        return sweep_thm2(trials, seed, dims, 0.0 if eps is None else eps, **kw)
    if check == "converse":
        return sweep_converse(seed)
    if check == "lemmas":
        return check_lemma_suite(seed, trials)
    raise ValueError(f"unknown check {check!r}")
