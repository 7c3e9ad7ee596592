"""Dense complex-matrix primitives for finite-dimensional quantum systems.

Operators and density matrices carry an explicit tensor-factor layout
(e.g. [2, 2, 2] for three qubits) so that Kronecker products, factor
embeddings and partial traces can be done without guessing dimensions.
All matrix functions (exp, log, entropies) go through Hermitian
eigendecompositions; the dimensions in play here are small enough that
this is both the most accurate and the simplest route.

Conventions: qubit basis ordering (|0>, |1>) with |1> the excited state,
sigma_z = |1><1| - |0><0|, sigma_plus = |1><0|.  The left Kronecker factor
is the slow index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence
import math

import numpy as np

from . import tolerances as tol


class LayoutError(ValueError):
    """Tensor-factor layouts of two objects do not compose."""


@dataclass(frozen=True)
class FactorLayout:
    """Ordered tensor-factor dimensions of an operator or state."""

    dims: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.dims:
            raise LayoutError("layout needs at least one factor")
        if any((not isinstance(d, (int, np.integer))) or d < 1 for d in self.dims):
            raise LayoutError(f"factor dimensions must be positive integers, got {self.dims}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    @property
    def n_factors(self) -> int:
        return len(self.dims)

    def __add__(self, other: "FactorLayout") -> "FactorLayout":
        return FactorLayout(self.dims + other.dims)


def _as_layout(layout: FactorLayout | Sequence[int] | None, dim: int) -> FactorLayout:
    if layout is None:
        return FactorLayout((dim,))
    if not isinstance(layout, FactorLayout):
        layout = FactorLayout(tuple(layout))
    if layout.dim != dim:
        raise LayoutError(f"layout {layout.dims} has total dimension {layout.dim}, matrix has {dim}")
    return layout


class Operator:
    """A square complex matrix with a declared tensor-factor layout.

    Instances are immutable: the underlying array is copied on
    construction and marked read-only, so operators are safe to share.
    """

    __slots__ = ("mat", "layout")

    def __init__(self, mat: np.ndarray, layout: FactorLayout | Sequence[int] | None = None):
        arr = np.array(mat, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise LayoutError(f"operator must be a square matrix, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "mat", arr)
        object.__setattr__(self, "layout", _as_layout(layout, arr.shape[0]))

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    def dagger(self) -> "Operator":
        return Operator(self.mat.conj().T, self.layout)

    def hermiticity_defect(self) -> float:
        return float(np.abs(self.mat - self.mat.conj().T).max())

    def is_hermitian(self, atol: float = tol.HERMITICITY_TOL) -> bool:
        return self.hermiticity_defect() <= atol

    def _require_same_layout(self, other: "Operator") -> None:
        if self.layout.dims != other.layout.dims:
            raise LayoutError(f"layout mismatch: {self.layout.dims} vs {other.layout.dims}")

    def __add__(self, other: "Operator") -> "Operator":
        self._require_same_layout(other)
        return Operator(self.mat + other.mat, self.layout)

    def __sub__(self, other: "Operator") -> "Operator":
        self._require_same_layout(other)
        return Operator(self.mat - other.mat, self.layout)

    def __neg__(self) -> "Operator":
        return Operator(-self.mat, self.layout)

    def __mul__(self, scalar: complex) -> "Operator":
        return Operator(self.mat * scalar, self.layout)

    __rmul__ = __mul__

    def __matmul__(self, other: "Operator") -> "Operator":
        self._require_same_layout(other)
        return Operator(self.mat @ other.mat, self.layout)

    def __repr__(self) -> str:
        return f"Operator(dim={self.dim}, dims={self.dims})"


def identity(layout: FactorLayout | Sequence[int]) -> Operator:
    layout = layout if isinstance(layout, FactorLayout) else FactorLayout(tuple(layout))
    return Operator(np.eye(layout.dim), layout)


class DensityMatrix:
    """A Hermitian, unit-trace, positive-semidefinite operator.

    Construction validates all three properties (Hermiticity to
    ``HERMITICITY_TOL``, trace to ``TRACE_TOL``, smallest eigenvalue above
    ``PSD_EIG_FLOOR``) and raises ``ValueError`` otherwise.
    """

    __slots__ = ("op",)

    def __init__(self, op: Operator):
        defect = op.hermiticity_defect()
        if defect > tol.HERMITICITY_TOL:
            raise ValueError(f"density matrix not Hermitian: defect {defect:.3e}")
        trace = op.mat.trace()
        if abs(trace - 1.0) > tol.TRACE_TOL:
            raise ValueError(f"density matrix trace {trace:.16g} differs from 1")
        lo = float(np.linalg.eigvalsh(op.mat)[0])
        if lo < tol.PSD_EIG_FLOOR:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "op", op)

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    @classmethod
    def from_matrix(cls, mat: np.ndarray, layout: FactorLayout | Sequence[int] | None = None) -> "DensityMatrix":
        return cls(Operator(mat, layout))

    @classmethod
    def pure(cls, ket: np.ndarray, layout: FactorLayout | Sequence[int] | None = None) -> "DensityMatrix":
        v = np.asarray(ket, dtype=complex).reshape(-1)
        v = v / np.linalg.norm(v)
        return cls(Operator(np.outer(v, v.conj()), layout))

    @classmethod
    def maximally_mixed(cls, layout: FactorLayout | Sequence[int]) -> "DensityMatrix":
        layout = layout if isinstance(layout, FactorLayout) else FactorLayout(tuple(layout))
        return cls(Operator(np.eye(layout.dim) / layout.dim, layout))

    @property
    def mat(self) -> np.ndarray:
        return self.op.mat

    @property
    def layout(self) -> FactorLayout:
        return self.op.layout

    @property
    def dim(self) -> int:
        return self.op.dim

    @property
    def dims(self) -> tuple[int, ...]:
        return self.op.dims

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim}, dims={self.dims})"


# ---------------------------------------------------------------------------
# tensor algebra
# ---------------------------------------------------------------------------

def kron(a: Operator, b: Operator) -> Operator:
    """Kronecker product; the layout is the concatenation of both layouts."""
    return Operator(np.kron(a.mat, b.mat), a.layout + b.layout)


def kron_all(ops: Iterable[Operator]) -> Operator:
    ops = list(ops)
    out = ops[0]
    for op in ops[1:]:
        out = kron(out, op)
    return out


def _permute_factors(mat: np.ndarray, dims_in: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Reorder tensor factors of a matrix; ``perm[k]`` is the input slot
    that lands at output slot ``k``."""
    n = len(dims_in)
    t = mat.reshape(tuple(dims_in) * 2)
    axes = list(perm) + [n + p for p in perm]
    out_dim = mat.shape[0]
    return t.transpose(axes).reshape(out_dim, out_dim)


def embed(op: Operator, layout: FactorLayout | Sequence[int], positions: Sequence[int]) -> Operator:
    """Embed ``op`` into a larger layout, acting on the given factor slots.

    ``positions`` lists, in order, the target slot for each factor of
    ``op``; identity acts on all remaining factors.
    """
    layout = layout if isinstance(layout, FactorLayout) else FactorLayout(tuple(layout))
    positions = list(positions)
    if len(positions) != op.layout.n_factors:
        raise LayoutError("one target position needed per factor of the embedded operator")
    if len(set(positions)) != len(positions):
        raise LayoutError("target positions must be distinct")
    for p, d in zip(positions, op.dims):
        if p < 0 or p >= layout.n_factors:
            raise LayoutError(f"position {p} outside layout with {layout.n_factors} factors")
        if layout.dims[p] != d:
            raise LayoutError(f"factor dim {d} does not fit slot {p} of {layout.dims}")
    rest = [k for k in range(layout.n_factors) if k not in positions]
    rest_dim = math.prod(layout.dims[k] for k in rest) if rest else 1
    big = np.kron(op.mat, np.eye(rest_dim))
    current = positions + rest  # current factor order after the kron
    dims_current = [layout.dims[k] for k in current]
    perm = [current.index(k) for k in range(layout.n_factors)]
    return Operator(_permute_factors(big, dims_current, perm), layout)


def _partial_trace_matrix(mat: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    n = len(dims)
    keep = sorted(keep)
    t = mat.reshape(tuple(dims) * 2)
    # contract each traced factor pair, counting from the back so axis
    # numbers stay valid
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n > len(letters):
        raise LayoutError("too many tensor factors")
    row = list(letters[:n])
    col = list(letters[n:2 * n])
    for k in range(n):
        if k not in keep:
            col[k] = row[k]
    out = "".join(row[k] for k in keep) + "".join(col[k] for k in keep)
    subs = "".join(row) + "".join(col) + "->" + out
    d_keep = math.prod(dims[k] for k in keep)
    return np.einsum(subs, t).reshape(d_keep, d_keep)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Trace out all factors except ``keep``; kept factors stay in their
    original order.
    """
    keep = sorted(set(keep))
    if not keep:
        raise LayoutError("must keep at least one factor")
    n = rho.layout.n_factors
    if any(k < 0 or k >= n for k in keep):
        raise LayoutError(f"factor index out of range for layout {rho.dims}")
    sub = _partial_trace_matrix(rho.mat, rho.dims, keep)
    layout = FactorLayout(tuple(rho.dims[k] for k in keep))
    return DensityMatrix(Operator(sub, layout))


# ---------------------------------------------------------------------------
# Hermitian matrix functions
# ---------------------------------------------------------------------------

def _require_hermitian(op: Operator, what: str) -> None:
    defect = op.hermiticity_defect()
    if defect > tol.HERMITICITY_TOL:
        raise ValueError(f"{what} must be Hermitian (defect {defect:.3e})")


def matrix_exp_unitary(H: Operator, tau: float) -> Operator:
    """U = exp(-i tau H) for Hermitian H, via eigendecomposition."""
    _require_hermitian(H, "Hamiltonian")
    w, V = np.linalg.eigh(H.mat)
    U = (V * np.exp(-1j * tau * w)) @ V.conj().T
    defect = np.abs(U.conj().T @ U - np.eye(H.dim)).max()
    if defect > tol.UNITARITY_TOL:
        raise RuntimeError(f"eigendecomposition produced a non-unitary exponential (defect {defect:.3e})")
    return Operator(U, H.layout)


def evolve_unitary(H_total: Operator, tau: float, rho: DensityMatrix) -> DensityMatrix:
    """rho -> exp(-i tau H) rho exp(+i tau H)."""
    if H_total.dims != rho.dims:
        raise LayoutError(f"layout mismatch: {H_total.dims} vs {rho.dims}")
    U = matrix_exp_unitary(H_total, tau)
    return DensityMatrix(Operator(U.mat @ rho.mat @ U.mat.conj().T, rho.layout))


def gibbs_state(H: Operator, beta: float) -> DensityMatrix:
    """Thermal state exp(-beta H) / Z at inverse temperature beta >= 0."""
    _require_hermitian(H, "Hamiltonian")
    if not (beta >= 0.0 and math.isfinite(beta)):
        raise ValueError(f"inverse temperature must be finite and >= 0, got {beta}")
    w, V = np.linalg.eigh(H.mat)
    weights = np.exp(-beta * (w - w.min()))  # shift avoids underflow of all weights
    weights /= weights.sum()
    return DensityMatrix(Operator((V * weights) @ V.conj().T, H.layout))


def _clamped_spectrum(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues with roundoff negatives clamped to zero, plus vectors."""
    w, V = np.linalg.eigh(mat)
    if w[0] < -tol.EIG_CLAMP_TOL:
        raise ValueError(f"eigenvalue {w[0]:.3e} below clamping window, not roundoff")
    return np.clip(w, 0.0, None), V


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S = -sum_i p_i ln p_i in nats, with 0 ln 0 = 0."""
    w, _ = _clamped_spectrum(rho.mat)
    nz = w[w > 0]
    return float(-np.sum(nz * np.log(nz)))


def relative_entropy(a: DensityMatrix, b: DensityMatrix) -> float:
    """D(a||b) = Tr[a ln a] - Tr[a ln b] in nats.

    Returns ``inf`` when ``a`` carries more than ``SUPPORT_WEIGHT_TOL`` of
    weight outside the support of ``b`` (eigenvalues below
    ``SUPPORT_EIGVAL_TOL``).
    """
    if a.dims != b.dims:
        raise LayoutError(f"layout mismatch: {a.dims} vs {b.dims}")
    wa, _ = _clamped_spectrum(a.mat)
    nz = wa[wa > 0]
    tr_a_ln_a = float(np.sum(nz * np.log(nz)))

    wb, Vb = _clamped_spectrum(b.mat)
    overlap = np.einsum("ij,jk,ki->i", Vb.conj().T, a.mat, Vb).real
    off_support = wb < tol.SUPPORT_EIGVAL_TOL
    if np.clip(overlap[off_support], 0.0, None).sum() > tol.SUPPORT_WEIGHT_TOL:
        return math.inf
    on = ~off_support
    tr_a_ln_b = float(np.sum(overlap[on] * np.log(wb[on])))
    return tr_a_ln_a - tr_a_ln_b


def expectation(A: Operator, rho: DensityMatrix) -> float:
    """Real expectation value Tr[A rho] of a Hermitian observable."""
    _require_hermitian(A, "observable")
    if A.dims != rho.dims:
        raise LayoutError(f"layout mismatch: {A.dims} vs {rho.dims}")
    val = complex(np.trace(A.mat @ rho.mat))
    if abs(val.imag) > tol.IMAG_EXPECTATION_TOL:
        raise RuntimeError(f"expectation value has imaginary part {val.imag:.3e}")
    return val.real
