"""Dense linear algebra over labeled tensor-product register spaces.

Every multi-system object carries an ordered list of ``(label, dim)`` pairs so
that partial traces, embeddings and channel applications can be expressed by
register name instead of by axis position.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import reduce
from typing import Callable, Iterable, Sequence, Union

import numpy as np

HERM_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
SUPPORT_CUTOFF = 1e-12
KRAUS_TOL = 1e-9


class LabelError(ValueError):
    """Register labels are duplicated, missing or inconsistent."""


class PreconditionError(ValueError):
    """An operation was called on inputs violating its precondition."""


class DomainError(ValueError):
    """A matrix function was evaluated outside its domain."""


class ChannelError(ValueError):
    """A Kraus set is not trace preserving."""


# --------------------------------------------------------------------------- #
# Register spaces                                                             #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class RegisterSpace:
    """Ordered list of labeled tensor factors."""

    registers: tuple[tuple[str, int], ...]

    def __post_init__(self):
        regs = tuple((str(label), int(dim)) for label, dim in self.registers)
        labels = [label for label, _ in regs]
        if len(set(labels)) != len(labels):
            raise LabelError(f"duplicate register labels in {labels}")
        if any(dim < 1 for _, dim in regs):
            raise ValueError(f"register dimensions must be positive: {regs}")
        object.__setattr__(self, "registers", regs)

    @classmethod
    def of(cls, *pairs: tuple[str, int]) -> "RegisterSpace":
        return cls(tuple(pairs))

    @classmethod
    def from_lists(cls, labels: Sequence[str], dims: Sequence[int]) -> "RegisterSpace":
        if len(labels) != len(dims):
            raise LabelError("labels and dims have different lengths")
        return cls(tuple(zip(labels, dims)))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(dim for _, dim in self.registers)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.registers else 1

    def __len__(self) -> int:
        return len(self.registers)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown register {label!r}; have {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def sub(self, labels: Iterable[str]) -> "RegisterSpace":
        """Subspace on ``labels``, in the order given."""
        return RegisterSpace(tuple((label, self.dim(label)) for label in labels))

    def without(self, labels: Iterable[str]) -> "RegisterSpace":
        drop = set(labels)
        for label in drop:
            self.index(label)
        return RegisterSpace(tuple(r for r in self.registers if r[0] not in drop))

    def __add__(self, other: "RegisterSpace") -> "RegisterSpace":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LabelError(f"register labels {sorted(clash)} appear on both sides")
        return RegisterSpace(self.registers + other.registers)

    def relabel(self, mapping: dict[str, str]) -> "RegisterSpace":
        return RegisterSpace(tuple((mapping.get(l, l), d) for l, d in self.registers))


def _space(x) -> RegisterSpace:
    if isinstance(x, RegisterSpace):
        return x
    return RegisterSpace(tuple(x))


# --------------------------------------------------------------------------- #
# Raw array helpers                                                           #
# --------------------------------------------------------------------------- #


def permute_array(a: np.ndarray, dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder the tensor factors of a square matrix: new factor k is old ``perm[k]``."""
    n = len(dims)
    if list(perm) == list(range(n)):
        return a
    t = a.reshape(tuple(dims) * 2)
    t = t.transpose(list(perm) + [p + n for p in perm])
    d = a.shape[0]
    return t.reshape(d, d)


def ptrace_array(a: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace keeping the factors at positions ``keep`` (order preserved)."""
    n = len(dims)
    keep = list(keep)
    t = a.reshape(tuple(dims) * 2)
    ket = list(range(n))
    bra = [i + n if i in keep else i for i in range(n)]
    out = keep + [k + n for k in keep]
    d = int(np.prod([dims[k] for k in keep], dtype=np.int64)) if keep else 1
    return np.einsum(t, ket + bra, out).reshape(d, d)


def hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def eigh_desc(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """LAPACK Hermitian eigendecomposition with eigenvalues in descending order."""
    w, v = np.linalg.eigh(hermitize(a))
    return w[::-1], v[:, ::-1]


def jacobi_eigh(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100):
    """Cyclic Jacobi eigensolver for a dense complex Hermitian matrix.

    Each rotation first removes the phase of the pivot ``a[p, q]`` with a
    diagonal unitary and then applies the real symmetric Jacobi rotation.
    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``tol * max(1, ||a||_F)``.

    Returns:
        (eigenvalues, eigenvectors): eigenvalues sorted descending, eigenvectors
        as the columns of a unitary matrix.
    """
    A = np.array(hermitize(np.asarray(a, dtype=complex)))
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    scale = max(1.0, np.linalg.norm(A))
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                app, aqq = A[p, p].real, A[q, q].real
                theta = (aqq - app) / (2.0 * mag)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ph = apq / mag
                # u = diag(1, conj(ph)) @ [[c, s], [-s, c]]
                u = np.array([[c, s], [-s * np.conj(ph), c * np.conj(ph)]])
                cols = A[:, [p, q]] @ u
                A[:, p], A[:, q] = cols[:, 0], cols[:, 1]
                rows = u.conj().T @ A[[p, q], :]
                A[p, :], A[q, :] = rows[0], rows[1]
                A[p, q] = A[q, p] = 0.0
                vc = V[:, [p, q]] @ u
                V[:, p], V[:, q] = vc[:, 0], vc[:, 1]
    w = np.diag(A).real.copy()
    order = np.argsort(-w, kind="stable")
    return w[order], V[:, order]


def _phase_fix(v: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column real and positive."""
    idx = np.argmax(np.abs(v) > 1e-8 * np.abs(v).max(axis=0, keepdims=True), axis=0)
    ph = v[idx, np.arange(v.shape[1])]
    ph = np.where(np.abs(ph) > 0, ph / np.abs(ph), 1.0)
    return v / ph


def psd_func(a: np.ndarray, f: str | Callable, support_cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    """Array version of :func:`mat_func`."""
    w, v = eigh_desc(a)
    w = _apply_scalar(w, f, support_cutoff)
    return (v * w) @ v.conj().T


def _apply_scalar(w: np.ndarray, f, cutoff: float) -> np.ndarray:
    if callable(f):
        return np.asarray(f(w), dtype=float)
    if f == "sqrt":
        if w.min(initial=0.0) < -PSD_TOL:
            raise DomainError(f"sqrt of operator with eigenvalue {w.min():.3e}")
        return np.sqrt(np.clip(w, 0.0, None))
    if f in ("inv_sqrt_pseudo", "inv-sqrt-pseudo"):
        out = np.zeros_like(w)
        mask = w > cutoff
        out[mask] = w[mask] ** -0.5
        return out
    if f in ("inv_pseudo", "inv-pseudo"):
        out = np.zeros_like(w)
        mask = w > cutoff
        out[mask] = 1.0 / w[mask]
        return out
    if f == "support":
        return (w > cutoff).astype(float)
    raise ValueError(f"unknown matrix function {f!r}")


def support_projector(a: np.ndarray, cutoff: float = SUPPORT_CUTOFF) -> np.ndarray:
    w, v = eigh_desc(a)
    vs = v[:, w > cutoff]
    return vs @ vs.conj().T


# --------------------------------------------------------------------------- #
# Operators and states                                                        #
# --------------------------------------------------------------------------- #


class Operator:
    """Linear map between labeled register spaces; square when the spaces agree.

    Instances are immutable: the stored array is flagged read-only.
    """

    __slots__ = ("data", "out_space", "in_space")

    def __init__(self, data, space, in_space=None):
        out_space = _space(space)
        in_space = out_space if in_space is None else _space(in_space)
        arr = np.array(data, dtype=complex)
        if arr.shape != (out_space.total_dim, in_space.total_dim):
            raise ValueError(
                f"operator shape {arr.shape} does not match spaces "
                f"{out_space.total_dim}x{in_space.total_dim}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "out_space", out_space)
        object.__setattr__(self, "in_space", in_space)

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    @property
    def square(self) -> bool:
        return self.out_space == self.in_space

    @property
    def space(self) -> RegisterSpace:
        if not self.square:
            raise LabelError("non-square operator has no single space")
        return self.out_space

    @property
    def labels(self) -> tuple[str, ...]:
        return self.space.labels

    @property
    def dims(self) -> tuple[int, ...]:
        return self.space.dims

    def _like(self, data, space, in_space=None) -> "Operator":
        return Operator(data, space, in_space)

    def dag(self) -> "Operator":
        return Operator(self.data.conj().T, self.in_space, self.out_space)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def is_hermitian(self, tol: float = HERM_TOL) -> bool:
        return self.square and np.max(np.abs(self.data - self.data.conj().T), initial=0.0) <= tol

    def __matmul__(self, other: "Operator") -> "Operator":
        if self.in_space != other.out_space:
            raise LabelError("operator spaces do not compose")
        return Operator(self.data @ other.data, self.out_space, other.in_space)

    def _check_same(self, other: "Operator"):
        if self.out_space != other.out_space or self.in_space != other.in_space:
            raise LabelError("operators live on different spaces")

    def __add__(self, other: "Operator") -> "Operator":
        self._check_same(other)
        return Operator(self.data + other.data, self.out_space, self.in_space)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_same(other)
        return Operator(self.data - other.data, self.out_space, self.in_space)

    def __mul__(self, c) -> "Operator":
        return Operator(self.data * c, self.out_space, self.in_space)

    __rmul__ = __mul__

    def __neg__(self) -> "Operator":
        return self * -1

    def permute(self, order: Sequence[str]) -> "Operator":
        """Reorder the registers of a square operator."""
        sp = self.space
        order = list(order)
        if sorted(order) != sorted(sp.labels):
            raise LabelError(f"permutation {order} does not match registers {sp.labels}")
        perm = [sp.index(label) for label in order]
        return self._like(permute_array(self.data, sp.dims, perm), sp.sub(order))

    def relabel(self, mapping: dict[str, str]) -> "Operator":
        return self._like(self.data, self.out_space.relabel(mapping),
                          None if self.square else self.in_space.relabel(mapping))

    def __repr__(self):
        if self.square:
            return f"{type(self).__name__}({list(self.space.registers)})"
        return f"Operator({list(self.out_space.registers)} <- {list(self.in_space.registers)})"


class DensityMatrix(Operator):
    """Positive semidefinite operator with trace at most one.

    Inputs with Hermitian asymmetry up to ``HERM_TOL`` are symmetrized on
    construction; larger asymmetry, eigenvalues below ``-PSD_TOL`` or trace above
    ``1 + TRACE_TOL`` raise :class:`PreconditionError` when ``check`` is set.
    """

    __slots__ = ()

    def __init__(self, data, space, check: bool = True):
        sp = _space(space)
        arr = np.asarray(data, dtype=complex)
        if check:
            if arr.shape != (sp.total_dim, sp.total_dim):
                raise ValueError(f"state shape {arr.shape} does not match dim {sp.total_dim}")
            asym = np.max(np.abs(arr - arr.conj().T), initial=0.0)
            if asym > HERM_TOL:
                raise PreconditionError(f"state is not Hermitian (asymmetry {asym:.2e})")
            arr = hermitize(arr)
            lmin = np.linalg.eigvalsh(arr).min()
            if lmin < -PSD_TOL:
                raise PreconditionError(f"state has negative eigenvalue {lmin:.3e}")
            tr = np.trace(arr).real
            if tr > 1 + TRACE_TOL:
                raise PreconditionError(f"state has trace {tr:.12f} > 1")
        else:
            arr = hermitize(arr)
        super().__init__(arr, sp)

    def _like(self, data, space, in_space=None):
        if in_space is None:
            return DensityMatrix(data, space, check=False)
        return Operator(data, space, in_space)

    @property
    def op(self) -> Operator:
        return Operator(self.data, self.space)

    @property
    def normalized(self) -> bool:
        return abs(self.trace().real - 1.0) <= TRACE_TOL

    @classmethod
    def from_operator(cls, op: Operator, check: bool = True) -> "DensityMatrix":
        return cls(op.data, op.space, check=check)

    def __repr__(self):
        return f"DensityMatrix({list(self.space.registers)}, tr={self.trace().real:.6g})"


class PureState:
    """Unit vector on a labeled register space."""

    __slots__ = ("vector", "space")

    def __init__(self, amplitudes, space, check: bool = True):
        sp = _space(space)
        vec = np.array(amplitudes, dtype=complex).reshape(-1)
        if vec.shape[0] != sp.total_dim:
            raise ValueError(f"vector length {vec.shape[0]} does not match dim {sp.total_dim}")
        if check and abs(np.linalg.norm(vec) - 1.0) > 1e-10:
            raise PreconditionError(f"state vector has norm {np.linalg.norm(vec):.12f}")
        vec.setflags(write=False)
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "space", sp)

    def __setattr__(self, name, value):
        raise AttributeError("PureState is immutable")

    @property
    def amplitudes(self) -> np.ndarray:
        return self.vector

    @property
    def labels(self) -> tuple[str, ...]:
        return self.space.labels

    def dm(self) -> DensityMatrix:
        v = self.vector
        return DensityMatrix(np.outer(v, v.conj()), self.space, check=False)

    def permute(self, order: Sequence[str]) -> "PureState":
        order = list(order)
        if sorted(order) != sorted(self.space.labels):
            raise LabelError(f"permutation {order} does not match registers {self.space.labels}")
        perm = [self.space.index(label) for label in order]
        t = self.vector.reshape(self.space.dims).transpose(perm)
        return PureState(t.reshape(-1), self.space.sub(order), check=False)

    def relabel(self, mapping: dict[str, str]) -> "PureState":
        return PureState(self.vector, self.space.relabel(mapping), check=False)

    def reduced(self, keep: Sequence[str]) -> DensityMatrix:
        return partial_trace(self, keep)

    def __repr__(self):
        return f"PureState({list(self.space.registers)})"


def _array(x) -> np.ndarray:
    if isinstance(x, PureState):
        return np.outer(x.vector, x.vector.conj())
    return np.asarray(getattr(x, "data", x))


def identity(space) -> Operator:
    sp = _space(space)
    return Operator(np.eye(sp.total_dim), sp)


def basis_state(space, index: Sequence[int] | int) -> PureState:
    sp = _space(space)
    vec = np.zeros(sp.total_dim, dtype=complex)
    flat = index if isinstance(index, (int, np.integer)) else int(np.ravel_multi_index(tuple(index), sp.dims))
    vec[flat] = 1.0
    return PureState(vec, sp)


def maximally_entangled(label_a: str, label_b: str, d: int) -> PureState:
    vec = np.eye(d, dtype=complex).reshape(-1) / np.sqrt(d)
    return PureState(vec, RegisterSpace.of((label_a, d), (label_b, d)))


def maximally_mixed(space) -> DensityMatrix:
    sp = _space(space)
    return DensityMatrix(np.eye(sp.total_dim) / sp.total_dim, sp, check=False)


# --------------------------------------------------------------------------- #
# Core operations                                                             #
# --------------------------------------------------------------------------- #


def tensor(a, b):
    """Kronecker product on the concatenated register list.

    Two density matrices give a density matrix, two pure states a pure state,
    anything else a plain :class:`Operator`.
    """
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.vector, b.vector), a.space + b.space, check=False)
    if isinstance(a, PureState):
        a = a.dm()
    if isinstance(b, PureState):
        b = b.dm()
    out_space = a.out_space + b.out_space
    in_space = a.in_space + b.in_space
    data = np.kron(a.data, b.data)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(data, out_space, check=False)
    return Operator(data, out_space, in_space)


def tensor_all(items: Iterable):
    return reduce(tensor, items)


def partial_trace(rho, keep: Iterable[str]) -> DensityMatrix | Operator:
    """Reduced operator on the ``keep`` registers, in their original order."""
    if isinstance(rho, PureState):
        sp = rho.space
        keep = list(keep)
        for label in keep:
            sp.index(label)
        kidx = [i for i, label in enumerate(sp.labels) if label in keep]
        rest = [i for i in range(len(sp)) if i not in kidx]
        t = rho.vector.reshape(sp.dims).transpose(kidx + rest)
        dk = int(np.prod([sp.dims[i] for i in kidx], dtype=np.int64)) if kidx else 1
        m = t.reshape(dk, -1)
        return DensityMatrix(m @ m.conj().T, sp.sub([sp.labels[i] for i in kidx]), check=False)
    sp = rho.space
    keep = set(keep)
    for label in keep:
        sp.index(label)
    kidx = [i for i, label in enumerate(sp.labels) if label in keep]
    data = ptrace_array(rho.data, sp.dims, kidx)
    return rho._like(data, sp.sub([sp.labels[i] for i in kidx]))


def eig_hermitian(h, method: str = "lapack", check: bool = True):
    """Eigendecomposition of a Hermitian operator, eigenvalues descending.

    ``method`` is ``"lapack"`` (numpy) or ``"jacobi"`` (:func:`jacobi_eigh`).
    Inputs with asymmetry up to 1e-10 are symmetrized first.

    Returns:
        (eigenvalues, eigenvectors) where eigenvectors is a unitary
        :class:`Operator` on the same space when ``h`` is labeled, otherwise an
        array whose columns are the eigenvectors.
    """
    a = _array(h)
    if check:
        asym = np.max(np.abs(a - a.conj().T), initial=0.0)
        if asym > HERM_TOL:
            raise PreconditionError(f"operator is not Hermitian (asymmetry {asym:.2e})")
    if method == "lapack":
        w, v = eigh_desc(a)
    elif method == "jacobi":
        w, v = jacobi_eigh(a)
    else:
        raise ValueError(f"unknown eigensolver {method!r}")
    if isinstance(h, Operator):
        return w, Operator(v, h.space)
    return w, v


def mat_func(h, f: str | Callable, support_cutoff: float = SUPPORT_CUTOFF):
    """Apply a scalar function to the spectrum of a Hermitian operator.

    ``f`` may be a callable acting on the eigenvalue array or one of
    ``"sqrt"``, ``"inv_sqrt_pseudo"``, ``"inv_pseudo"``, ``"support"``. The
    pseudo-inverse variants send eigenvalues at or below ``support_cutoff`` to 0.
    """
    out = psd_func(_array(h), f, support_cutoff)
    if isinstance(h, Operator):
        return Operator(out, h.space)
    return out


def trace_norm(a) -> float:
    """Sum of singular values (sum of |eigenvalues| for Hermitian input)."""
    arr = _array(a)
    if arr.shape[0] == arr.shape[1] and np.allclose(arr, arr.conj().T, atol=1e-13, rtol=0):
        return float(np.abs(np.linalg.eigvalsh(hermitize(arr))).sum())
    return float(np.linalg.svd(arr, compute_uv=False).sum())


def fidelity(rho, sigma) -> float:
    """Root fidelity ``||sqrt(rho) sqrt(sigma)||_1``."""
    a = psd_func(_array(rho), "sqrt")
    b = psd_func(_array(sigma), "sqrt")
    return float(np.linalg.svd(a @ b, compute_uv=False).sum())


def purify(rho, ref_label: str | Sequence[tuple[str, int]]) -> PureState:
    """Spectral purification ``sum_i sqrt(l_i) |v_i>|i>`` with eigenvalues descending.

    ``ref_label`` is either a single label (reference of dimension
    ``dim(rho)``) or a list of ``(label, dim)`` pairs whose product is at least
    the rank of ``rho``. The reference follows the registers of ``rho``.
    """
    arr = _array(rho)
    sp = rho.space if isinstance(rho, Operator) else RegisterSpace.of(("S", arr.shape[0]))
    if isinstance(ref_label, str):
        ref = RegisterSpace.of((ref_label, sp.total_dim))
    else:
        ref = RegisterSpace(tuple(ref_label))
    tr = np.trace(arr).real
    if abs(tr - 1.0) > 1e-9:
        raise PreconditionError(f"purify expects a normalized state (trace {tr:.12f})")
    w, v = eigh_desc(arr)
    v = _phase_fix(v)
    w = np.clip(w, 0.0, None)
    rank = int(np.sum(w > SUPPORT_CUTOFF))
    if rank > ref.total_dim:
        raise PreconditionError(f"reference dim {ref.total_dim} below rank {rank}")
    k = min(len(w), ref.total_dim)
    coeff = np.zeros((sp.total_dim, ref.total_dim), dtype=complex)
    coeff[:, :k] = v[:, :k] * np.sqrt(w[:k])
    vec = coeff.reshape(-1)
    vec = vec / np.linalg.norm(vec)
    return PureState(vec, sp + ref, check=False)


def uhlmann_isometry(psi1: PureState, psi2: PureState, tol: float = 1e-8) -> Operator:
    """Isometry ``V: C -> B`` with ``(I_A (x) V) psi2 = psi1``.

    ``psi1`` lives on ``A u B`` and ``psi2`` on ``A u C`` where ``A`` is the set
    of shared labels. ``V`` comes from the polar part of ``Psi1^dag Psi2`` so it
    maximizes the overlap; off the support it is completed to a full isometry.
    """
    common = [label for label in psi2.space.labels if label in psi1.space.labels]
    b_labels = [label for label in psi1.space.labels if label not in common]
    c_labels = [label for label in psi2.space.labels if label not in common]
    for label in common:
        if psi1.space.dim(label) != psi2.space.dim(label):
            raise LabelError(f"register {label!r} has different dims in the two states")
    p1 = psi1.permute(common + b_labels)
    p2 = psi2.permute(common + c_labels)
    b_space = psi1.space.sub(b_labels)
    c_space = psi2.space.sub(c_labels)
    if c_space.total_dim > b_space.total_dim:
        raise PreconditionError(
            f"target purifying dim {b_space.total_dim} is smaller than source dim {c_space.total_dim}"
        )
    dA = psi2.space.sub(common).total_dim
    Psi1 = p1.vector.reshape(dA, b_space.total_dim)
    Psi2 = p2.vector.reshape(dA, c_space.total_dim)
    mismatch = trace_norm(Psi1 @ Psi1.conj().T - Psi2 @ Psi2.conj().T)
    if mismatch > tol:
        raise PreconditionError(f"marginals on the shared registers differ by {mismatch:.2e}")
    Y = Psi1.conj().T @ Psi2
    P, _, Qh = np.linalg.svd(Y)
    dC = c_space.total_dim
    U = Qh.conj().T @ P[:, :dC].conj().T  # d_C x d_B, rows orthonormal
    V = U.T
    return Operator(V, b_space, c_space)


# --------------------------------------------------------------------------- #
# Channels                                                                    #
# --------------------------------------------------------------------------- #


class KrausChannel:
    """Completely positive trace-preserving map in Kraus form.

    Kraus operators map ``in_space`` to ``out_space``. Operators with Frobenius
    norm below ``drop_tol`` are discarded.
    """

    __slots__ = ("kraus", "in_space", "out_space")

    def __init__(self, kraus, in_space, out_space=None, check: bool = True, drop_tol: float = 1e-13):
        in_sp = _space(in_space)
        out_sp = in_sp if out_space is None else _space(out_space)
        ks = []
        for k in kraus:
            arr = np.array(getattr(k, "data", k), dtype=complex)
            if arr.shape != (out_sp.total_dim, in_sp.total_dim):
                raise ValueError(f"Kraus operator shape {arr.shape} does not match channel spaces")
            if np.linalg.norm(arr) > drop_tol:
                arr.setflags(write=False)
                ks.append(arr)
        if not ks:
            raise ChannelError("channel has no nonzero Kraus operators")
        object.__setattr__(self, "kraus", tuple(ks))
        object.__setattr__(self, "in_space", in_sp)
        object.__setattr__(self, "out_space", out_sp)
        if check:
            dev = self.completeness_error()
            if dev > KRAUS_TOL:
                raise ChannelError(f"Kraus operators are not complete (deviation {dev:.2e})")

    def __setattr__(self, name, value):
        raise AttributeError("KrausChannel is immutable")

    @property
    def in_labels(self) -> tuple[str, ...]:
        return self.in_space.labels

    @property
    def out_labels(self) -> tuple[str, ...]:
        return self.out_space.labels

    def completeness_error(self) -> float:
        s = sum(k.conj().T @ k for k in self.kraus)
        return float(np.max(np.abs(s - np.eye(self.in_space.total_dim))))

    def kraus_operators(self) -> list[Operator]:
        return [Operator(k, self.out_space, self.in_space) for k in self.kraus]

    def __call__(self, rho):
        return apply_channel(self, rho)

    def choi(self) -> np.ndarray:
        """Unnormalized Choi matrix on (input copy, output)."""
        d = self.in_space.total_dim
        omega = np.eye(d).reshape(-1)
        out = 0
        for k in self.kraus:
            v = np.kron(np.eye(d), k) @ omega
            out = out + np.outer(v, v.conj())
        return out

    def compose(self, first: "KrausChannel") -> "KrausChannel":
        """The channel ``self o first``."""
        if first.out_space != self.in_space:
            raise LabelError("channel spaces do not compose")
        ks = [a @ b for a in self.kraus for b in first.kraus]
        return KrausChannel(ks, first.in_space, self.out_space, check=False)

    def tensor(self, other: "KrausChannel") -> "KrausChannel":
        ks = [np.kron(a, b) for a in self.kraus for b in other.kraus]
        return KrausChannel(ks, self.in_space + other.in_space, self.out_space + other.out_space, check=False)

    def relabel(self, mapping: dict[str, str]) -> "KrausChannel":
        return KrausChannel(self.kraus, self.in_space.relabel(mapping), self.out_space.relabel(mapping), check=False)

    def __repr__(self):
        return f"KrausChannel({list(self.in_space.registers)} -> {list(self.out_space.registers)}, n_kraus={len(self.kraus)})"


def identity_channel(space) -> KrausChannel:
    sp = _space(space)
    return KrausChannel([np.eye(sp.total_dim)], sp, sp)


def _split_for_channel(space: RegisterSpace, channel: KrausChannel) -> list[str]:
    for label in channel.in_labels:
        if label not in space:
            raise LabelError(f"channel input {label!r} is not a register of the state")
        if space.dim(label) != channel.in_space.dim(label):
            raise LabelError(f"register {label!r} has the wrong dimension for the channel")
    rest = [label for label in space.labels if label not in channel.in_labels]
    clash = set(rest) & set(channel.out_labels)
    if clash:
        raise LabelError(f"channel output labels {sorted(clash)} already present")
    return rest


def apply_channel(n: KrausChannel, rho) -> DensityMatrix:
    """``sum_k (K_k (x) I) rho (K_k (x) I)^dag`` acting on the channel's input registers.

    The output lists the untouched registers first (in their original order)
    followed by the channel's output registers.
    """
    dev = n.completeness_error()
    if dev > KRAUS_TOL:
        raise ChannelError(f"Kraus operators are not complete (deviation {dev:.2e})")
    sp = rho.space
    rest = _split_for_channel(sp, n)
    dr = sp.sub(rest).total_dim
    din = n.in_space.total_dim
    out_space = sp.sub(rest) + n.out_space
    if isinstance(rho, PureState):
        vec = rho.permute(rest + list(n.in_labels)).vector.reshape(dr, din)
        out = 0
        for k in n.kraus:
            w = (vec @ k.T).reshape(-1)
            out = out + np.outer(w, w.conj())
        return DensityMatrix(out, out_space, check=False)
    r = rho.permute(rest + list(n.in_labels)).data.reshape(dr, din, dr, din)
    out = 0
    for k in n.kraus:
        out = out + np.einsum("oi,risj,pj->rosp", k, r, k.conj(), optimize=True)
    d = out_space.total_dim
    return DensityMatrix(out.reshape(d, d), out_space, check=False)


def embed(op: Operator, space) -> Operator:
    """Extend a square operator on a subset of registers by the identity."""
    sp = _space(space)
    for label in op.labels:
        if sp.dim(label) != op.space.dim(label):
            raise LabelError(f"register {label!r} has different dims")
    rest = [label for label in sp.labels if label not in op.labels]
    big = np.kron(op.data, np.eye(sp.sub(rest).total_dim))
    cur = op.space + sp.sub(rest)
    perm = [cur.index(label) for label in sp.labels]
    return Operator(permute_array(big, cur.dims, perm), sp)


# --------------------------------------------------------------------------- #
# JSON interchange                                                            #
# --------------------------------------------------------------------------- #


def to_json_dict(op) -> dict:
    """``{labels, dims, re, im}`` with row-major nested lists."""
    arr = _array(op)
    sp = op.space if hasattr(op, "space") else RegisterSpace.of(("S", arr.shape[0]))
    return {
        "labels": list(sp.labels),
        "dims": list(sp.dims),
        "re": arr.real.tolist(),
        "im": arr.imag.tolist(),
    }


def from_json_dict(d: dict, state: bool = True, check: bool = True):
    try:
        sp = RegisterSpace.from_lists(d["labels"], d["dims"])
        arr = np.asarray(d["re"], dtype=float) + 1j * np.asarray(d.get("im", 0.0), dtype=float)
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix record: {exc}") from None
    if arr.shape != (sp.total_dim, sp.total_dim):
        raise ValueError(f"matrix shape {arr.shape} does not match dims {list(sp.dims)}")
    if state:
        return DensityMatrix(arr, sp, check=check)
    return Operator(arr, sp)


def save_json(op, path) -> None:
    with open(path, "w") as fh:
        json.dump(to_json_dict(op), fh)


def load_json(path, state: bool = True, check: bool = True):
    with open(path) as fh:
        return from_json_dict(json.load(fh), state=state, check=check)


ArrayLike = Union[np.ndarray, Operator]
