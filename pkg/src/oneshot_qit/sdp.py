"""Dense primal-dual interior-point solver for small complex Hermitian SDPs.

Problems are stated over a list of Hermitian blocks ``X_j``::

    minimize   sum_j <C_j, X_j>
    subject to sum_j <A_ij, X_j>  (=, <=, >=)  b_i,     X_j >= 0

with ``<A, X> = Re Tr(A X)``. Inequalities are turned into equalities with
1x1 slack blocks and a block flagged ``bounded`` gets an extra slack block
enforcing ``X_j <= I``. The dual of the standard form is::

    maximize   b . y
    subject to Z_j = C_j - sum_i y_i A_ij >= 0

and the solver follows the central path with Nesterov-Todd scaling and a
Mehrotra-type centering parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np
import scipy.linalg

from .qmat import hermitize, psd_func

__all__ = [
    "LinearConstraint",
    "SdpProblem",
    "SdpSolution",
    "solve",
    "formulate_dh",
    "formulate_dmax_feasibility",
    "hermitian_basis",
]


@dataclass
class LinearConstraint:
    """``sum_j <coeffs[j], X_j>  relation  rhs``."""

    coeffs: dict[int, np.ndarray]
    rhs: float
    relation: str = "="

    def __post_init__(self):
        if self.relation not in ("=", "<=", ">="):
            raise ValueError(f"unknown relation {self.relation!r}")


@dataclass
class SdpProblem:
    """Block SDP in the form solved by :func:`solve`.

    Args:
        block_dims: sizes of the Hermitian variable blocks.
        objective: cost matrix per block (missing blocks cost nothing).
        constraints: list of :class:`LinearConstraint`.
        bounded: per-block flag adding ``X_j <= I``.
        sense: ``"min"`` or ``"max"``; maximization is solved as minimization
            of the negated objective and reported with the original sign.
        infeasible_by_construction: set by formulators when the instance is
            known to be infeasible before solving.
    """

    block_dims: list[int]
    objective: dict[int, np.ndarray]
    constraints: list[LinearConstraint]
    bounded: list[bool] = field(default_factory=list)
    sense: str = "min"
    infeasible_by_construction: bool = False
    note: str = ""

    def __post_init__(self):
        if not self.bounded:
            self.bounded = [False] * len(self.block_dims)
        if len(self.bounded) != len(self.block_dims):
            raise ValueError("bounded flags must match the number of blocks")
        if self.sense not in ("min", "max"):
            raise ValueError(f"unknown sense {self.sense!r}")
        for j, c in self.objective.items():
            _check_herm(c, self.block_dims[j], "objective")
        for con in self.constraints:
            for j, a in con.coeffs.items():
                _check_herm(a, self.block_dims[j], "constraint")

    @property
    def n(self) -> int:
        return int(sum(self.block_dims))


@dataclass
class SdpSolution:
    X: list[np.ndarray]
    primal: float
    dual: float
    gap: float
    status: str
    iterations: int
    y: np.ndarray | None = None
    Z: list[np.ndarray] | None = None
    primal_infeasibility: float = 0.0
    dual_infeasibility: float = 0.0

    @property
    def value(self) -> float:
        return 0.5 * (self.primal + self.dual)


def _check_herm(a, n, what):
    a = np.asarray(a)
    if a.shape != (n, n):
        raise ValueError(f"{what} matrix has shape {a.shape}, expected {(n, n)}")
    if np.max(np.abs(a - a.conj().T), initial=0.0) > 1e-10:
        raise ValueError(f"{what} matrix is not Hermitian")


def hermitian_basis(n: int) -> list[np.ndarray]:
    """Orthonormal basis of n x n Hermitian matrices under ``Re Tr(A B)``."""
    basis = []
    s = 1 / np.sqrt(2)
    for k in range(n):
        e = np.zeros((n, n), dtype=complex)
        e[k, k] = 1
        basis.append(e)
    for k in range(n):
        for l in range(k + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[k, l] = e[l, k] = s
            basis.append(e)
            f = np.zeros((n, n), dtype=complex)
            f[k, l] = 1j * s
            f[l, k] = -1j * s
            basis.append(f)
    return basis


def matrix_equality(terms: dict[int, tuple[np.ndarray, np.ndarray]], rhs: np.ndarray) -> list[LinearConstraint]:
    """Constraints expressing ``sum_j c_j E_j^dag X_j E_j = rhs``.

    ``terms[j] = (E_j, c_j)`` where ``E_j`` embeds the space of ``rhs`` into
    block ``j`` (identity when the shapes agree). One constraint per element
    of the Hermitian basis.
    """
    m = rhs.shape[0]
    out = []
    for B in hermitian_basis(m):
        coeffs = {}
        for j, (E, c) in terms.items():
            coeffs[j] = c * (E @ B @ E.conj().T)
        out.append(LinearConstraint(coeffs, float(np.real(np.trace(B @ rhs))), "="))
    return out


# --------------------------------------------------------------------------- #
# Standard form                                                               #
# --------------------------------------------------------------------------- #


class _Std:
    """Equality-form problem with vectorized constraint matrices."""

    def __init__(self, p: SdpProblem):
        dims = list(p.block_dims)
        sign = -1.0 if p.sense == "max" else 1.0
        rows: list[dict[int, np.ndarray]] = []
        b: list[float] = []
        for con in p.constraints:
            coeffs = dict(con.coeffs)
            if con.relation != "=":
                j = len(dims)
                dims.append(1)
                coeffs[j] = np.array([[1.0 if con.relation == "<=" else -1.0]])
            rows.append(coeffs)
            b.append(float(con.rhs))
        for j, flag in enumerate(p.bounded):
            if not flag:
                continue
            n = p.block_dims[j]
            k = len(dims)
            dims.append(n)
            for B in hermitian_basis(n):
                rows.append({j: B, k: B})
                b.append(float(np.real(np.trace(B))))
        self.dims = dims
        self.nvar = len(p.block_dims)
        self.b = np.asarray(b, dtype=float)
        self.m = len(b)
        self.A = []
        for j, n in enumerate(dims):
            mat = np.zeros((self.m, n * n), dtype=complex)
            for i, row in enumerate(rows):
                if j in row:
                    mat[i] = np.asarray(row[j], dtype=complex).reshape(-1)
            self.A.append(mat)
        self.C = []
        for j, n in enumerate(dims):
            c = p.objective.get(j) if j < self.nvar else None
            c = np.zeros((n, n), dtype=complex) if c is None else sign * np.asarray(c, dtype=complex)
            self.C.append(c)

    def op(self, X):
        return sum((Aj.conj() @ Xj.reshape(-1)).real for Aj, Xj in zip(self.A, X))

    def adj(self, y):
        return [hermitize((y @ Aj).reshape(n, n)) for Aj, n in zip(self.A, self.dims)]

    def inner(self, U, V):
        return float(sum(np.vdot(u, v).real for u, v in zip(U, V)))


def _chol(X):
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        return None


def _max_step(X, dX, L=None):
    """Largest alpha keeping ``X + alpha dX`` PSD (``inf`` if unbounded)."""
    if L is None:
        L = _chol(X)
    if L is None:
        return 0.0
    Li = scipy.linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    lam = np.linalg.eigvalsh(hermitize(Li @ dX @ Li.conj().T)).min()
    return np.inf if lam >= 0 else -1.0 / lam


def _nt_scaling(LX, LZ):
    """Scaling point ``W`` with ``W Z W = X`` from Cholesky factors.

    With ``LZ^H LX = U S V^H`` the factor ``G = LX V S^{-1/2}`` gives
    ``W = G G^H``; this avoids square roots of ill-conditioned iterates.
    """
    _, sv, vh = np.linalg.svd(LZ.conj().T @ LX)
    G = (LX @ vh.conj().T) / np.sqrt(sv)[None, :]
    return hermitize(G @ G.conj().T)


def _chol_inv(L):
    Li = scipy.linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True)
    return hermitize(Li.conj().T @ Li)


def solve(p: SdpProblem, gap_tol: float = 1e-8, feas_tol: float = 1e-9, max_iter: int = 200) -> SdpSolution:
    """Solve ``p`` with an infeasible-start primal-dual interior-point method.

    Returns:
        :class:`SdpSolution` with ``status`` one of ``"optimal"``,
        ``"max-iter"``, ``"infeasible"`` or ``"numerical"`` (an iterate lost
        definiteness to round-off). Unless optimal, the iterate with the best
        combined gap and residual is returned. The reported primal and dual
        values are objective values of that iterate; the dual value is a
        valid bound once the dual residual is at round-off level.
    """
    sign = -1.0 if p.sense == "max" else 1.0
    if p.infeasible_by_construction:
        inf = np.inf * sign
        return SdpSolution([], inf, inf, np.inf, "infeasible", 0)
    s = _Std(p)
    dims, m = s.dims, s.m
    ntot = sum(dims)

    # starting point scaled to the data
    anorm = [max(np.linalg.norm(s.A[j][i]) for j in range(len(dims))) for i in range(m)] if m else []
    xi = max([10.0, np.sqrt(ntot)] + [ntot * (1 + abs(bi)) / (1 + an) for bi, an in zip(s.b, anorm)])
    eta = max([10.0, np.sqrt(ntot)] + [np.linalg.norm(c) for c in s.C] + anorm)
    X = [xi * np.eye(n, dtype=complex) for n in dims]
    Z = [eta * np.eye(n, dtype=complex) for n in dims]
    y = np.zeros(m)

    bnorm = 1 + np.linalg.norm(s.b)
    cnorm = 1 + max(np.linalg.norm(c) for c in s.C)
    status = "max-iter"
    it = 0
    pobj = dobj = np.nan
    rp_n = rd_n = np.inf
    snap = best = None
    best_merit = np.inf
    for it in range(1, max_iter + 1):
        LX = [_chol(x) for x in X]
        LZ = [_chol(z) for z in Z]
        if any(l is None for l in LX + LZ):
            # lost definiteness to round-off: fall back to the last good iterate
            status = "numerical"
            break
        rp = s.b - s.op(X)
        ATy = s.adj(y)
        Rd = [hermitize(c - a - z) for c, a, z in zip(s.C, ATy, Z)]
        pobj = s.inner(s.C, X)
        dobj = float(s.b @ y)
        mu = s.inner(X, Z) / ntot
        rp_n = np.linalg.norm(rp) / bnorm
        rd_n = max(np.linalg.norm(r) for r in Rd) / cnorm
        snap = (X, y, Z, pobj, dobj, rp_n, rd_n)
        gap = abs(pobj - dobj)
        merit = max(gap / (1 + abs(pobj)), rp_n, rd_n)
        if merit < best_merit:
            best_merit, best = merit, snap
        if gap <= gap_tol and rp_n <= feas_tol and rd_n <= feas_tol:
            status = "optimal"
            break
        if dobj > 1.0 / feas_tol and rd_n <= 1e-6:
            status = "infeasible"
            break

        with np.errstate(all="ignore"):
            W = [_nt_scaling(lx, lz) for lx, lz in zip(LX, LZ)]
            Zinv = [_chol_inv(lz) for lz in LZ]
        if not all(np.isfinite(w).all() for w in W + Zinv):
            status = "numerical"
            break
        # Schur complement M_ik = Re Tr(A_i W A_k W)
        M = np.zeros((m, m))
        for j, n in enumerate(dims):
            Aj = s.A[j]
            nz = np.flatnonzero(np.any(Aj != 0, axis=1))
            if nz.size == 0:
                continue
            Wj = W[j]
            WAW = np.einsum("ab,ibc,cd->iad", Wj, Aj[nz].reshape(-1, n, n), Wj, optimize=True).reshape(nz.size, -1)
            M[np.ix_(nz, nz)] += (Aj[nz].conj() @ WAW.T).real
        M = (M + M.T) / 2
        try:
            cf = scipy.linalg.cho_factor(M)

            def schur0(r):
                return scipy.linalg.cho_solve(cf, r)
        except (np.linalg.LinAlgError, ValueError):
            Mp = np.linalg.pinv(M)

            def schur0(r):
                return Mp @ r

        def schur(r):
            # one step of iterative refinement against the ill-conditioning near the optimum
            d = schur0(r)
            return d + schur0(r - M @ d)

        WRdW = [w @ r @ w for w, r in zip(W, Rd)]

        def direction(sig_mu):
            Rc = [sig_mu * zi - x for zi, x in zip(Zinv, X)]
            rhs = rp - s.op([rc - wr for rc, wr in zip(Rc, WRdW)])
            dy = schur(rhs)
            ATdy = s.adj(dy)
            dZ = [hermitize(r - a) for r, a in zip(Rd, ATdy)]
            dX = [hermitize(rc - w @ dz @ w) for rc, w, dz in zip(Rc, W, dZ)]
            return dX, dy, dZ

        def steps(dX, dZ):
            ap = min([1.0] + [_max_step(x, d, l) for x, d, l in zip(X, dX, LX)])
            ad = min([1.0] + [_max_step(z, d, l) for z, d, l in zip(Z, dZ, LZ)])
            return ap, ad

        # predictor
        dX, dy, dZ = direction(0.0)
        ap, ad = steps(dX, dZ)
        mu_aff = s.inner([x + ap * d for x, d in zip(X, dX)], [z + ad * d for z, d in zip(Z, dZ)]) / ntot
        sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0
        # corrector
        dX, dy, dZ = direction(sigma * mu)
        ap, ad = steps(dX, dZ)
        ap = min(1.0, 0.98 * ap)
        ad = min(1.0, 0.98 * ad)
        if ap <= 1e-12 and ad <= 1e-12:
            status = "numerical"
            break
        X = [hermitize(x + ap * d) for x, d in zip(X, dX)]
        y = y + ad * dy
        Z = [hermitize(z + ad * d) for z, d in zip(Z, dZ)]

    if status in ("max-iter", "numerical") and best is not None:
        X, y, Z, pobj, dobj, rp_n, rd_n = best
    Xv = X[: s.nvar]
    return SdpSolution(
        X=Xv,
        primal=sign * pobj,
        dual=sign * dobj,
        gap=abs(pobj - dobj),
        status=status,
        iterations=it,
        y=y,
        Z=Z[: s.nvar],
        primal_infeasibility=float(rp_n),
        dual_infeasibility=float(rd_n),
    )


# --------------------------------------------------------------------------- #
# Formulations                                                                #
# --------------------------------------------------------------------------- #


def _arr(x):
    return np.asarray(getattr(x, "data", x), dtype=complex)


def formulate_dh(rho, sigma, eps: float) -> SdpProblem:
    """``min Tr[P sigma]`` over ``0 <= P <= I`` with ``Tr[P rho] >= 1 - eps``.

    The optimum equals ``2^{-D_H^eps(rho || sigma)}``.
    """
    if not 0 <= eps < 1:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    r, sg = _arr(rho), _arr(sigma)
    if r.shape != sg.shape:
        raise ValueError("rho and sigma have different dimensions")
    n = r.shape[0]
    con = LinearConstraint({0: hermitize(r)}, 1.0 - eps, ">=")
    return SdpProblem([n], {0: hermitize(sg)}, [con], bounded=[True], sense="min")


def formulate_dmax_feasibility(rho, sigma, lam: float, eps: float = 0.0, ball: str = "trace") -> SdpProblem:
    """Distance from ``rho`` to the set ``{0 <= tau <= 2^lam sigma, Tr tau <= 1}``.

    With ``ball="trace"`` the problem minimizes ``||tau - rho||_1`` through the
    lift ``tau - P + N = rho`` with ``P, N >= 0``; ``lam`` is eps-feasible for
    the smoothed max-relative entropy iff the optimum is at most ``eps``.

    With ``ball="purified"`` it maximizes the generalized fidelity
    ``Re Tr X`` over ``[[tau, X], [X^dag, rho]] >= 0``; ``lam`` is feasible iff
    the optimum is at least ``sqrt(1 - eps^2)``.

    When ``sigma`` is rank deficient both states are compressed to its support.
    A support violation sets ``infeasible_by_construction``.
    """
    r, sg = hermitize(_arr(rho)), hermitize(_arr(sigma))
    if ball not in ("trace", "purified"):
        raise ValueError(f"unknown ball {ball!r}")
    w, v = np.linalg.eigh(sg)
    keep = w > 1e-12 * max(1.0, w.max())
    if not keep.all():
        outside = np.trace(r).real - np.trace(v[:, keep].conj().T @ r @ v[:, keep]).real
        V = v[:, keep]
        r_c = hermitize(V.conj().T @ r @ V)
        s_c = hermitize(V.conj().T @ sg @ V)
        if outside > 1e-9:
            p = SdpProblem([1], {}, [], infeasible_by_construction=True,
                           note=f"rho has weight {outside:.3e} outside supp(sigma)")
            return p
        r, sg = r_c, s_c
    n = r.shape[0]
    scale = 2.0 ** lam
    eye = np.eye(n)
    if ball == "trace":
        # blocks: 0 tau, 1 P, 2 N, 3 S
        cons = matrix_equality({0: (eye, 1.0), 1: (eye, -1.0), 2: (eye, 1.0)}, r)
        cons += matrix_equality({0: (eye, 1.0), 3: (eye, 1.0)}, scale * sg)
        cons.append(LinearConstraint({0: eye}, 1.0, "<="))
        return SdpProblem([n, n, n, n], {1: eye, 2: eye}, cons, sense="min")
    # blocks: 0 Y = [[tau, X], [X^dag, rho]], 1 S
    top = np.vstack([eye, np.zeros((n, n))])
    bot = np.vstack([np.zeros((n, n)), eye])
    cons = matrix_equality({0: (bot, 1.0)}, r)
    cons += matrix_equality({0: (top, 1.0), 1: (eye, 1.0)}, scale * sg)
    cons.append(LinearConstraint({0: top @ top.T}, 1.0, "<="))
    c = np.zeros((2 * n, 2 * n))
    c[:n, n:] = eye / 2
    c[n:, :n] = eye / 2
    return SdpProblem([2 * n, n], {0: c}, cons, sense="max")


def dmax_tau(sol: SdpSolution, rho, sigma) -> np.ndarray:
    """Recover ``tau`` (full space) from a solved feasibility problem."""
    r, sg = hermitize(_arr(rho)), hermitize(_arr(sigma))
    w, v = np.linalg.eigh(sg)
    keep = w > 1e-12 * max(1.0, w.max())
    n = int(keep.sum())
    blk = sol.X[0][:n, :n]
    V = v[:, keep]
    return hermitize(V @ blk @ V.conj().T)
