"""One-shot entropic quantities in bits.

Hypothesis-testing quantities are computed from explicit Neyman-Pearson
testers ``P_{>0}(mu rho - sigma) + gamma P_{=0}(mu rho - sigma)`` and come with a
Lagrange-dual certificate. Smoothed max-quantities bisect over ``lambda`` with
one SDP feasibility solve per probe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sdp
from .qmat import (
    DensityMatrix,
    DomainError,
    LabelError,
    Operator,
    eigh_desc,
    hermitize,
    partial_trace,
    psd_func,
    tensor,
)

LOG_EPS_SUPPORT = 1e-9


@dataclass(frozen=True)
class EntropicValue:
    """A value in bits with a certified bracket ``lower <= value <= upper``."""

    value: float
    lower: float
    upper: float
    eps: float = 0.0
    certified: bool = True
    note: str = ""

    @property
    def width(self) -> float:
        if math.isinf(self.upper) and math.isinf(self.lower):
            return 0.0
        return self.upper - self.lower

    def __float__(self) -> float:
        return float(self.value)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "lower": self.lower,
            "upper": self.upper,
            "eps": self.eps,
            "certified": self.certified,
            "note": self.note,
        }


@dataclass(frozen=True)
class Tester:
    """Test operator ``0 <= pi <= I`` with its acceptance and leakage.

    ``threshold`` is ``t = 1/mu`` in ``P_{>t}(rho - t sigma)``; ``mu`` and the
    dual bound on the leakage are kept for certification.
    """

    pi: np.ndarray
    acceptance: float
    leakage: float
    threshold: float
    boundary_weight: float
    eps: float
    mu: float = float("nan")
    dual_leakage: float = 0.0
    space: object = None
    blocks: tuple = field(default=(), repr=False)

    @property
    def operator(self) -> Operator:
        if self.space is None:
            raise LabelError("tester was built from unlabeled arrays")
        return Operator(self.pi, self.space)


def _arr(x) -> np.ndarray:
    return np.asarray(getattr(x, "data", x), dtype=complex)


def _log2(x: float) -> float:
    return math.log2(x) if x > 0 else -math.inf


def _check_eps(eps: float):
    if not (0 <= eps < 1):
        raise ValueError(f"eps must lie in [0, 1), got {eps}")


# --------------------------------------------------------------------------- #
# Hypothesis testing                                                          #
# --------------------------------------------------------------------------- #


class _NP:
    """Spectral data of ``mu rho - sigma`` over a direct sum of blocks."""

    def __init__(self, rhos: Sequence[np.ndarray], sigmas: Sequence[np.ndarray]):
        self.rhos = [hermitize(np.asarray(r, dtype=complex)) for r in rhos]
        self.sigmas = [hermitize(np.asarray(s, dtype=complex)) for s in sigmas]
        self.scale = max(1.0, max(np.abs(s).max() for s in self.sigmas))

    def spectra(self, mu):
        out = []
        for r, s in zip(self.rhos, self.sigmas):
            w, v = np.linalg.eigh(hermitize(mu * r - s))
            out.append((w, v))
        return out

    def accept_strict(self, mu) -> float:
        tot = 0.0
        for (w, v), r in zip(self.spectra(mu), self.rhos):
            vp = v[:, w > 0]
            tot += np.einsum("ij,ik,kj->", vp.conj(), r, vp).real
        return tot

    def dual(self, mu, eps) -> float:
        """``mu (1 - eps) - Tr[(mu rho - sigma)_+]``, a lower bound on the optimal leakage."""
        pos = sum(np.clip(w, 0, None).sum() for w, _ in self.spectra(mu))
        return mu * (1 - eps) - pos


def _np_tester(rhos, sigmas, eps: float):
    """Neyman-Pearson tester for a block-diagonal pair. Returns (blocks, data)."""
    npd = _NP(rhos, sigmas)
    target = 1.0 - eps
    if eps == 0:
        pis = [psd_func(r, "support") for r in npd.rhos]
        acc = sum(np.trace(p @ r).real for p, r in zip(pis, npd.rhos))
        leak = sum(np.trace(p @ s).real for p, s in zip(pis, npd.sigmas))
        return pis, dict(acceptance=acc, leakage=max(leak, 0.0), mu=math.inf, gamma=1.0, dual=max(leak, 0.0))

    # leakage zero if the kernel of sigma already carries enough weight of rho
    kers = []
    ker_acc = 0.0
    for r, s in zip(npd.rhos, npd.sigmas):
        w, v = np.linalg.eigh(s)
        vk = v[:, w <= 1e-12 * npd.scale]
        k = vk @ vk.conj().T
        kers.append(k)
        ker_acc += np.trace(k @ r).real
    if ker_acc >= target:
        c = target / ker_acc
        pis = [c * k for k in kers]
        return pis, dict(acceptance=target, leakage=0.0, mu=0.0, gamma=c, dual=0.0)

    # bracket the threshold in log(mu): acceptance(lo) < target <= acceptance(hi)
    lo, hi = 0.0, 0.0
    if npd.accept_strict(1.0) >= target:
        while npd.accept_strict(math.exp(lo)) >= target and lo > -700:
            hi = lo
            lo -= 4.0
    else:
        while npd.accept_strict(math.exp(hi)) < target and hi < 700:
            lo = hi
            hi += 4.0
    for _ in range(200):
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if npd.accept_strict(math.exp(mid)) >= target:
            hi = mid
        else:
            lo = mid
    mu = math.exp(hi)
    spec = npd.spectra(mu)
    tol = 1e-11 * (mu * max(1.0, max(np.abs(r).max() for r in npd.rhos)) + npd.scale)
    a1 = a0 = 0.0
    parts = []
    for (w, v), r in zip(spec, npd.rhos):
        vp = v[:, w > tol]
        vb = v[:, np.abs(w) <= tol]
        pp = vp @ vp.conj().T
        pb = vb @ vb.conj().T
        parts.append((pp, pb))
        a1 += np.trace(pp @ r).real
        a0 += np.trace(pb @ r).real
    if a1 >= target:
        c = target / a1
        pis = [c * pp for pp, _ in parts]
        gamma = 0.0
    else:
        gamma = min(1.0, (target - a1) / a0) if a0 > 0 else 0.0
        pis = [pp + gamma * pb for pp, pb in parts]
    acc = sum(np.trace(p @ r).real for p, r in zip(pis, npd.rhos))
    leak = sum(np.trace(p @ s).real for p, s in zip(pis, npd.sigmas))
    dual = max(npd.dual(mu, eps), npd.dual(math.exp(lo), eps))
    return pis, dict(acceptance=acc, leakage=leak, mu=mu, gamma=gamma, dual=dual)


def _dh_result(pis, info, eps, space, note="") -> tuple[EntropicValue, Tester]:
    leak = info["leakage"]
    dual = min(info["dual"], leak)
    value = -_log2(leak)
    upper = -_log2(dual) if dual > 0 else math.inf
    if leak <= 0:
        value = upper = math.inf
    ev = EntropicValue(value=value, lower=value, upper=upper, eps=eps, certified=True, note=note)
    mu = info["mu"]
    pi = pis[0] if len(pis) == 1 else None
    t = Tester(
        pi=pi if pi is not None else np.zeros((0, 0)),
        acceptance=float(info["acceptance"]),
        leakage=float(leak),
        threshold=(1.0 / mu) if mu not in (0.0, math.inf) else (math.inf if mu == 0.0 else 0.0),
        boundary_weight=float(info["gamma"]),
        eps=eps,
        mu=mu,
        dual_leakage=float(dual),
        space=space,
        blocks=tuple(pis) if len(pis) > 1 else (),
    )
    return ev, t


def d_hypo(rho, sigma, eps: float) -> tuple[EntropicValue, Tester]:
    """Hypothesis-testing relative entropy ``D_H^eps(rho || sigma)``.

    Args:
        rho: normalized state (the hypothesis to accept).
        sigma: normalized state (the alternative whose acceptance is minimized).
        eps: allowed rejection probability of ``rho``, in ``[0, 1)``.

    Returns:
        ``(value, tester)``; ``value.lower`` is ``-log2`` of the tester's
        leakage and ``value.upper`` comes from the Lagrange dual.
    """
    _check_eps(eps)
    r, s = _arr(rho), _arr(sigma)
    if r.shape != s.shape:
        raise ValueError("rho and sigma have different dimensions")
    pis, info = _np_tester([r], [s], eps)
    space = rho.space if isinstance(rho, Operator) else None
    return _dh_result(pis, info, eps, space)


def d_hypo_blocks(rho_blocks: Sequence[np.ndarray], sigma_blocks: Sequence[np.ndarray], eps: float):
    """``D_H^eps`` for block-diagonal (direct-sum) pairs given block by block."""
    _check_eps(eps)
    if len(rho_blocks) != len(sigma_blocks):
        raise ValueError("block lists differ in length")
    pis, info = _np_tester(rho_blocks, sigma_blocks, eps)
    return _dh_result(pis, info, eps, None, note=f"{len(pis)} blocks")


def d_hypo_sdp(rho, sigma, eps: float, gap_tol: float = 1e-10) -> EntropicValue:
    """``D_H^eps`` from the interior-point solver; bracket from the duality gap."""
    sol = sdp.solve(sdp.formulate_dh(_arr(rho), _arr(sigma), eps), gap_tol=gap_tol)
    lo_val, hi_val = min(sol.primal, sol.dual), max(sol.primal, sol.dual)
    value = -_log2(sol.value) if sol.value > 0 else math.inf
    return EntropicValue(
        value=value,
        lower=-_log2(hi_val),
        upper=-_log2(lo_val) if lo_val > 0 else math.inf,
        eps=eps,
        certified=sol.status == "optimal",
        note=f"sdp status={sol.status} iterations={sol.iterations}",
    )


def _cut_states(rho, cut):
    """Joint state and product-of-marginals reference for a bipartition."""
    a_labels, b_labels = (list(c) if not isinstance(c, str) else [c] for c in cut)
    labels = set(rho.space.labels)
    if set(a_labels) & set(b_labels) or set(a_labels) | set(b_labels) != labels:
        raise LabelError(f"cut {cut} does not partition registers {rho.space.labels}")
    ra = partial_trace(rho, a_labels)
    rb = partial_trace(rho, b_labels)
    prod = tensor(ra, rb)
    order = list(rho.space.labels)
    prod = prod.permute(order)
    return rho, prod


def i_hypo(rho: DensityMatrix, cut, eps: float) -> tuple[EntropicValue, Tester]:
    """``I_H^eps(A:B) = D_H^eps(rho^{AB} || rho^A (x) rho^B)`` for ``cut = (A, B)``."""
    joint, prod = _cut_states(rho, cut)
    return d_hypo(joint, prod, eps)


# --------------------------------------------------------------------------- #
# Max relative entropy                                                        #
# --------------------------------------------------------------------------- #


def _dmax_raw(r: np.ndarray, s: np.ndarray) -> float:
    w, v = eigh_desc(s)
    keep = w > 1e-12 * max(1.0, w.max())
    vs = v[:, keep]
    inside = np.trace(vs.conj().T @ r @ vs).real
    if np.trace(r).real - inside > LOG_EPS_SUPPORT:
        return math.inf
    core = (vs.conj().T @ r @ vs) / np.sqrt(w[keep])[:, None] / np.sqrt(w[keep])[None, :]
    lmax = np.linalg.eigvalsh(hermitize(core)).max()
    return _log2(lmax)


def d_max(rho, sigma) -> EntropicValue:
    """``log2 lambda_max(sigma^{-1/2} rho sigma^{-1/2})``; ``+inf`` off the support."""
    v = _dmax_raw(_arr(rho), _arr(sigma))
    note = "support violation" if math.isinf(v) and v > 0 else ""
    return EntropicValue(value=v, lower=v, upper=v, eps=0.0, note=note)


def i_max(rho: DensityMatrix, cut) -> EntropicValue:
    joint, prod = _cut_states(rho, cut)
    return d_max(joint, prod)


def _fidelity_sub(tau: np.ndarray, rho: np.ndarray) -> float:
    a = psd_func(tau, "sqrt")
    b = psd_func(rho, "sqrt")
    f = np.linalg.svd(a @ b, compute_uv=False).sum()
    return float(f + math.sqrt(max(0.0, (1 - np.trace(tau).real) * (1 - np.trace(rho).real))))


def _ball_distance(tau, rho, ball):
    if ball == "trace":
        return float(np.abs(np.linalg.eigvalsh(hermitize(tau - rho))).sum())
    f = _fidelity_sub(tau, rho)
    return math.sqrt(max(0.0, 1 - f * f))


def _certify_tau(tau, rho, sigma, eps, ball, d_ceiling):
    """Turn an approximate optimizer into an exactly feasible ball point.

    Returns the exact ``D_max(tau' || sigma)`` of the repaired point, or ``None``
    if the repair fails.
    """
    w, v = eigh_desc(tau)
    tau = (v * np.clip(w, 0, None)) @ v.conj().T
    tr = np.trace(tau).real
    if tr > 1:
        tau = tau / tr
    dist = _ball_distance(tau, rho, ball)
    if dist > eps:
        # convex mixing toward rho shrinks the distance; both balls are convex
        lo_t, hi_t = 0.0, 1.0
        for _ in range(60):
            t = 0.5 * (lo_t + hi_t)
            if _ball_distance((1 - t) * tau + t * rho, rho, ball) <= eps:
                hi_t = t
            else:
                lo_t = t
        tau = (1 - hi_t) * tau + hi_t * rho
        if _ball_distance(tau, rho, ball) > eps:
            return None, None
    return _dmax_raw(tau, sigma), tau


def d_max_smooth(
    rho,
    sigma,
    eps: float,
    ball: str = "trace",
    resolution: float = 0.01,
    max_solves: int = 20,
) -> EntropicValue:
    """Smoothed max-relative entropy over the ``eps``-ball of subnormalized states.

    Bisects ``lambda`` between the analytic floor (``log2(1-eps)`` for the trace
    ball, ``log2(1-eps^2)`` for the purified ball) and ``D_max(rho || sigma)``.
    The upper end of the bracket is the exact ``D_max`` of a repaired feasible
    point; the lower end is the largest probe certified infeasible by the
    solver's dual value.

    Args:
        ball: ``"trace"`` or ``"purified"``.
        resolution: stop once ``upper - lower`` is at most this many bits.
        max_solves: cap on SDP feasibility solves.
    """
    _check_eps(eps)
    r, s = hermitize(_arr(rho)), hermitize(_arr(sigma))
    exact = _dmax_raw(r, s)
    if math.isinf(exact):
        raise DomainError("supp(rho) is not contained in supp(sigma)")
    if eps == 0:
        return EntropicValue(exact, exact, exact, eps=0.0, note="eps=0")
    floor = _log2(1 - eps) if ball == "trace" else _log2(1 - eps * eps)
    lower, upper = floor, exact
    if upper <= lower:
        return EntropicValue(upper, upper, upper, eps=eps, note="floor attained")
    # rescaled rho sitting on the floor is feasible whenever it is in the ball
    ok, tau_best = _certify_tau((1 - eps) * r if ball == "trace" else (1 - eps * eps) * r, r, s, eps, ball, exact)
    if ok is not None and ok < upper:
        upper = ok
    solves = 0
    certified = True
    while upper - lower > resolution and solves < max_solves:
        lam = 0.5 * (lower + upper)
        prob = sdp.formulate_dmax_feasibility(r, s, lam, eps, ball=ball)
        sol = sdp.solve(prob)
        solves += 1
        if ball == "trace":
            feasible_num = sol.primal <= eps
            infeasible_cert = sol.dual > eps
        else:
            target = math.sqrt(1 - eps * eps)
            feasible_num = sol.primal >= target
            infeasible_cert = sol.dual < target
        if feasible_num:
            cand, _ = _certify_tau(sdp.dmax_tau(sol, r, s), r, s, eps, ball, exact)
            if cand is not None and cand < upper:
                upper = max(cand, lower)
                continue
            # repair failed: treat as uncertain and move the floor down the middle
            certified = False
            lower = lam
        else:
            if not infeasible_cert:
                certified = False
            lower = lam
    value = upper
    return EntropicValue(
        value=value,
        lower=lower,
        upper=upper,
        eps=eps,
        certified=certified,
        note=f"ball={ball} solves={solves}",
    )


def i_max_smooth(
    rho: DensityMatrix,
    cut,
    eps: float,
    marginals: str = "original",
    ball: str = "trace",
    resolution: float = 0.01,
    max_solves: int = 20,
    rounds: int = 3,
) -> EntropicValue:
    """Smoothed max-information.

    ``marginals="original"`` keeps the product of the marginals of ``rho`` as
    the reference and returns a certified bracket. ``marginals="smoothed"``
    re-derives the marginals from the smoothed state; that problem is not
    convex, so a few alternating rounds give an upper bound (exact ``I_max`` of
    a feasible point) over a trivial lower bound of 0.
    """
    joint, prod = _cut_states(rho, cut)
    if marginals == "original":
        return d_max_smooth(joint, prod, eps, ball=ball, resolution=resolution, max_solves=max_solves)
    if marginals != "smoothed":
        raise ValueError(f"unknown marginals option {marginals!r}")
    _check_eps(eps)
    a_labels = [cut[0]] if isinstance(cut[0], str) else list(cut[0])
    b_labels = [cut[1]] if isinstance(cut[1], str) else list(cut[1])
    r = joint.data
    best = i_max(joint, cut).value
    if eps == 0:
        return EntropicValue(best, best, best, eps=0.0)
    ref = prod
    for _ in range(rounds):
        ev = d_max_smooth(joint, ref, eps, ball=ball, resolution=resolution, max_solves=max_solves)
        lam = ev.upper
        sol = sdp.solve(sdp.formulate_dmax_feasibility(r, ref.data, lam + 1e-9, eps, ball=ball))
        _, tau = _certify_tau(sdp.dmax_tau(sol, r, ref.data), r, ref.data, eps, ball, lam)
        if tau is None:
            break
        t = DensityMatrix(tau, joint.space, check=False)
        val = _dmax_raw(tau, _cut_states(t, cut)[1].data)
        best = min(best, val)
        tr = np.trace(tau).real
        if tr <= 0:
            break
        ta = partial_trace(t, a_labels).data / tr
        tb = partial_trace(t, b_labels).data / tr
        sp_a = joint.space.sub([l for l in joint.space.labels if l in a_labels])
        sp_b = joint.space.sub([l for l in joint.space.labels if l in b_labels])
        ref = tensor(DensityMatrix(ta, sp_a, check=False), DensityMatrix(tb, sp_b, check=False)).permute(
            list(joint.space.labels)
        )
    return EntropicValue(best, 0.0, best, eps=eps, certified=False, note="smoothed marginals; heuristic")

