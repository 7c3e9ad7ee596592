"""Lindblad generators from microscopic collision couplings.

``build_generator`` enumerates jump channels from the matrix elements of
the coupling in the bath eigenbasis: for bath eigenstates |i>, |j> the
channel has rate <i|omega_beta(H_B)|i> and jump operator <j|v|i>.  The
generator retains the bath metadata (beta, H_B, v, weight) so that heat
and work fluxes can be evaluated both globally (through the system x bath
flux functional) and locally (from system operators, valid under the
coupling-level equilibrium condition [v, H0 + H_B] = 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence
import math

import numpy as np

from . import tolerances as tol
from .core import DensityMatrix, FactorLayout, LayoutError, Operator, embed
from .repint import BathSpec


class StandardConditionError(ValueError):
    """Tr_B[v (I x omega)] != 0; the Lindblad limit does not exist."""


class DegenerateSteadyStateError(RuntimeError):
    """The generator's nullspace is not one-dimensional."""


class PositivityError(RuntimeError):
    """Integration drove an eigenvalue below the positivity floor."""


@dataclass(frozen=True)
class Channel:
    """One jump channel: rate gamma >= 0 and jump operator on the system."""

    rate: float
    jump: Operator
    bath_label: str

    def __post_init__(self) -> None:
        if self.rate < 0:
            raise ValueError(f"channel rate must be nonnegative, got {self.rate}")


@dataclass(frozen=True)
class BathInfo:
    """Microscopic origin of one dissipator contribution.

    ``coupling`` is the unscaled operator v on the system x bath space
    (bath factors last); ``weight`` is the fraction of time this
    contribution acts (1 for a plain stream, 1/2 for each of two
    alternating streams).
    """

    label: str
    beta: float
    H_B: Operator
    coupling: Operator
    weight: float = 1.0


@dataclass(frozen=True)
class LindbladGenerator:
    """System Hamiltonian plus bath-grouped jump channels."""

    hamiltonian: Operator
    channels: tuple[Channel, ...]
    baths: tuple[BathInfo, ...] = ()

    def __post_init__(self) -> None:
        if not self.hamiltonian.is_hermitian():
            raise ValueError("generator Hamiltonian must be Hermitian")
        for ch in self.channels:
            if ch.jump.dims != self.hamiltonian.dims:
                raise LayoutError("jump operator layout differs from the system layout")
        betas: dict[str, float] = {}
        for b in self.baths:
            if b.label in betas and betas[b.label] != b.beta:
                raise ValueError(f"bath '{b.label}' appears with two different temperatures")
            betas[b.label] = b.beta

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def bath_labels(self) -> tuple[str, ...]:
        seen: list[str] = []
        for b in self.baths:
            if b.label not in seen:
                seen.append(b.label)
        return tuple(seen)

    def bath_beta(self, label: str) -> float:
        for b in self.baths:
            if b.label == label:
                return b.beta
        raise KeyError(f"no bath metadata for label '{label}'")


def _bath_average(v: Operator, H_B: Operator, beta: float) -> np.ndarray:
    """Tr_B[v (I x omega_beta(H_B))] as a system-space matrix."""
    from .core import gibbs_state

    d_b = H_B.dim
    d_s = v.dim // d_b
    omega = gibbs_state(H_B, beta).mat
    t = v.mat.reshape(d_s, d_b, d_s, d_b)
    return np.einsum("abcd,db->ac", t, omega)


def build_generator(H_S: Operator, baths: Sequence[BathSpec],
                    couplings: Sequence[Operator] | None = None,
                    weights: Sequence[float] | None = None) -> LindbladGenerator:
    """Enumerate Lindblad channels from couplings in the bath eigenbasis.

    ``couplings`` are the unscaled operators v_r (collision couplings are
    V_r = v_r / sqrt(tau)); when omitted, each bath's own ``V`` field is
    taken as v_r.  Each v_r must be Hermitian and satisfy the standard
    condition Tr_B[v_r omega_r] = 0.  Channels with rate or jump norm
    below ``CHANNEL_PRUNE_TOL`` are dropped.  ``weights`` scale each
    bath's dissipator (used for alternating streams).
    """
    baths = list(baths)
    if couplings is None:
        couplings = [b.V for b in baths]
    if len(couplings) != len(baths):
        raise ValueError("need exactly one coupling per bath")
    if weights is None:
        weights = [1.0] * len(baths)
    if len(weights) != len(baths):
        raise ValueError("need exactly one weight per bath")

    channels: list[Channel] = []
    infos: list[BathInfo] = []
    for bath, v, weight in zip(baths, couplings, weights):
        if not v.is_hermitian():
            raise ValueError(f"bath '{bath.label}': coupling must be Hermitian")
        d_b = bath.H_B.dim
        d_s = v.dim // d_b
        if v.dims[-bath.H_B.layout.n_factors:] != bath.H_B.dims or d_s * d_b != v.dim:
            raise LayoutError(f"bath '{bath.label}': coupling layout {v.dims} does not end with bath {bath.H_B.dims}")
        if (d_s,) != (H_S.dim,):
            raise LayoutError(f"bath '{bath.label}': coupling system block {d_s} != system dim {H_S.dim}")
        avg = _bath_average(v, bath.H_B, bath.beta)
        defect = float(np.abs(avg).max())
        if defect > tol.STANDARD_CONDITION_TOL:
            raise StandardConditionError(
                f"bath '{bath.label}': Tr_B[v omega] has norm {defect:.3e}"
            )

        w_eig, basis = np.linalg.eigh(bath.H_B.mat)
        probs = np.exp(-bath.beta * (w_eig - w_eig.min()))
        probs /= probs.sum()
        v_t = v.mat.reshape(d_s, d_b, d_s, d_b)
        for i in range(d_b):
            if probs[i] <= tol.CHANNEL_PRUNE_TOL:
                continue
            for j in range(d_b):
                jump = np.einsum("b,abcd,d->ac", basis[:, j].conj(), v_t, basis[:, i])
                if np.abs(jump).max() <= tol.CHANNEL_PRUNE_TOL:
                    continue
                channels.append(Channel(weight * probs[i], Operator(jump, H_S.layout), bath.label))
        infos.append(BathInfo(bath.label, bath.beta, bath.H_B, v, weight))
    return LindbladGenerator(H_S, tuple(channels), tuple(infos))


# ---------------------------------------------------------------------------
# generator action
# ---------------------------------------------------------------------------

def apply_dissipator(G: LindbladGenerator, X: Operator, bath_label: str | None = None) -> Operator:
    """Dissipator action sum_k gamma_k (L X L^dag - {L^dag L, X}/2) on an
    arbitrary operator, optionally restricted to one bath's channels."""
    if X.dims != G.hamiltonian.dims:
        raise LayoutError("operator layout differs from the generator's system layout")
    out = np.zeros((G.dim, G.dim), dtype=complex)
    for ch in G.channels:
        if bath_label is not None and ch.bath_label != bath_label:
            continue
        L = ch.jump.mat
        LdL = L.conj().T @ L
        out += ch.rate * (L @ X.mat @ L.conj().T - 0.5 * (LdL @ X.mat + X.mat @ LdL))
    return Operator(out, G.hamiltonian.layout)


def apply_dissipator_dual(G: LindbladGenerator, A: Operator, bath_label: str | None = None) -> Operator:
    """Heisenberg-picture dissipator, the adjoint of ``apply_dissipator``
    with respect to the Hilbert-Schmidt inner product:
    sum_k gamma_k (L^dag A L - {L^dag L, A}/2)."""
    if A.dims != G.hamiltonian.dims:
        raise LayoutError("operator layout differs from the generator's system layout")
    out = np.zeros((G.dim, G.dim), dtype=complex)
    for ch in G.channels:
        if bath_label is not None and ch.bath_label != bath_label:
            continue
        L = ch.jump.mat
        LdL = L.conj().T @ L
        out += ch.rate * (L.conj().T @ A.mat @ L - 0.5 * (LdL @ A.mat + A.mat @ LdL))
    return Operator(out, G.hamiltonian.layout)


def apply_generator(G: LindbladGenerator, rho: DensityMatrix) -> Operator:
    """Full generator action -i[H, rho] + dissipator(rho)."""
    H = G.hamiltonian.mat
    comm = -1j * (H @ rho.mat - rho.mat @ H)
    return Operator(comm, G.hamiltonian.layout) + apply_dissipator(G, rho.op)


def liouvillian_matrix(G: LindbladGenerator) -> np.ndarray:
    """The generator as a D^2 x D^2 matrix acting on row-major vec(rho)."""
    D = G.dim
    eye = np.eye(D)
    H = G.hamiltonian.mat
    L_mat = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for ch in G.channels:
        L = ch.jump.mat
        LdL = L.conj().T @ L
        L_mat += ch.rate * (np.kron(L, L.conj())
                            - 0.5 * (np.kron(LdL, eye) + np.kron(eye, LdL.T)))
    return L_mat


# ---------------------------------------------------------------------------
# time integration and steady state
# ---------------------------------------------------------------------------

class IntegrationResult(NamedTuple):
    times: np.ndarray
    states: list[np.ndarray]    # density matrices as plain arrays

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def default_timestep(G: LindbladGenerator) -> float:
    """1e-3 over the spectral-norm estimate of the generator."""
    scale = float(np.linalg.norm(liouvillian_matrix(G), 2))
    return 1e-3 / max(scale, 1.0)


def integrate(G: LindbladGenerator, rho0: DensityMatrix, t_end: float,
              dt: float | None = None, stride: int = 1) -> IntegrationResult:
    """Fixed-step classical fourth-order integration of rho_dot = L(rho).

    The trace is renormalized every step after asserting that the drift
    stays below ``INTEGRATOR_TRACE_DRIFT_TOL``; every stored point (one
    per ``stride`` steps) is checked against the positivity floor and the
    run aborts with ``PositivityError`` beyond it.
    """
    if dt is None:
        dt = default_timestep(G)
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    L_mat = liouvillian_matrix(G)
    n_steps = int(round(t_end / dt))

    def monitor(mat: np.ndarray, t: float) -> None:
        lo = float(np.linalg.eigvalsh(mat)[0])
        if lo < tol.INTEGRATOR_POSITIVITY_FLOOR:
            raise PositivityError(
                f"eigenvalue {lo:.3e} below floor {tol.INTEGRATOR_POSITIVITY_FLOOR} at t = {t:.6g}; "
                "reduce dt or check the generator"
            )

    x = rho0.mat.reshape(-1).copy()
    times = [0.0]
    states = [rho0.mat.copy()]
    monitor(states[0], 0.0)
    for n in range(1, n_steps + 1):
        k1 = L_mat @ x
        k2 = L_mat @ (x + 0.5 * dt * k1)
        k3 = L_mat @ (x + 0.5 * dt * k2)
        k4 = L_mat @ (x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        trace = x.reshape(G.dim, G.dim).trace().real
        drift = abs(trace - 1.0)
        if drift > tol.INTEGRATOR_TRACE_DRIFT_TOL:
            raise RuntimeError(f"trace drift {drift:.3e} in one step at t = {n * dt:.6g}")
        x = x / trace
        if n % stride == 0 or n == n_steps:
            mat = x.reshape(G.dim, G.dim)
            mat = (mat + mat.conj().T) / 2
            t = n * dt
            monitor(mat, t)
            times.append(t)
            states.append(mat)
    return IntegrationResult(np.array(times), states)


def steady_state(G: LindbladGenerator) -> DensityMatrix:
    """Stationary state from the nullspace of the vectorized generator.

    Requires a one-dimensional nullspace (``DegenerateSteadyStateError``
    otherwise); the extracted vector is Hermitized and renormalized and
    the residual |L(rho_ss)|_max must not exceed
    ``STEADY_STATE_RESIDUAL_TOL``.
    """
    L_mat = liouvillian_matrix(G)
    _, svals, vh = np.linalg.svd(L_mat)
    threshold = tol.NULLSPACE_REL_TOL * svals[0]
    n_null = int(np.sum(svals < threshold))
    if n_null != 1:
        raise DegenerateSteadyStateError(
            f"nullspace dimension {n_null} (singular values {svals[-max(n_null, 2):]}); "
            "the stationary state is not unique"
        )
    mat = vh[-1].conj().reshape(G.dim, G.dim)
    mat = (mat + mat.conj().T) / 2
    trace = mat.trace().real
    if abs(trace) < 1e-12:
        raise DegenerateSteadyStateError("nullspace vector is traceless; no stationary density matrix")
    mat /= trace
    rho = DensityMatrix.from_matrix(mat, G.hamiltonian.layout)
    residual = float(np.abs(apply_generator(G, rho).mat).max())
    if residual > tol.STEADY_STATE_RESIDUAL_TOL:
        raise DegenerateSteadyStateError(f"steady-state residual {residual:.3e} too large")
    return rho


# ---------------------------------------------------------------------------
# thermodynamic fluxes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FluxReport:
    """Per-bath heat fluxes and powers plus entropy rates.

    Validates the first law E_dot = Q_dot + W_dot (within
    ``FLUX_FIRST_LAW_TOL`` times the flux scale) and the second law
    d_i S/dt >= -``FLUX_SECOND_LAW_TOL`` on construction.
    """

    heat: dict[str, float]
    power: dict[str, float]
    energy_rate: float
    entropy_rate: float
    entropy_production_rate: float

    def __post_init__(self) -> None:
        scale = max(1.0, abs(self.energy_rate), abs(self.heat_total), abs(self.power_total))
        defect = abs(self.energy_rate - self.heat_total - self.power_total)
        if defect > tol.FLUX_FIRST_LAW_TOL * scale:
            raise ValueError(f"flux first-law violation: defect {defect:.3e}")
        if math.isfinite(self.entropy_production_rate) and \
                self.entropy_production_rate < -tol.FLUX_SECOND_LAW_TOL:
            raise ValueError(f"negative entropy production rate {self.entropy_production_rate:.3e}")

    @property
    def heat_total(self) -> float:
        return sum(self.heat.values())

    @property
    def power_total(self) -> float:
        return sum(self.power.values())


def flux_functional(G: LindbladGenerator, bath_label: str, A: Operator, rho: DensityMatrix) -> float:
    """The joint-space flux functional of bath ``bath_label``:

    D_r(A) = Tr[(v A v - {v^2, A}/2) (rho x omega_r)],

    summed with stream weights when the bath has several contributions.
    ``A`` must live on the system x bath-r layout.
    """
    from .core import gibbs_state

    entries = [b for b in G.baths if b.label == bath_label]
    if not entries:
        raise KeyError(f"generator has no bath metadata for label '{bath_label}'")
    total = 0.0
    for info in entries:
        joint_dims = G.hamiltonian.dims + info.H_B.dims
        if A.dims != joint_dims:
            raise LayoutError(f"functional argument needs layout {joint_dims}, got {A.dims}")
        v = info.coupling.mat
        omega = gibbs_state(info.H_B, info.beta).mat
        state = np.kron(rho.mat, omega)
        vA = v @ A.mat
        inner = vA @ v - 0.5 * (v @ vA + A.mat @ v @ v)
        total += info.weight * float(np.trace(inner @ state).real)
    return total


def _entropy_rate(G: LindbladGenerator, rho: DensityMatrix) -> float:
    """S_dot = -Tr[L(rho) ln rho]; +inf if L(rho) pushes weight off the
    support of rho."""
    rhodot = apply_generator(G, rho).mat
    w, V = np.linalg.eigh(rho.mat)
    w = np.clip(w, 0.0, None)
    d = np.einsum("ij,jk,ki->i", V.conj().T, rhodot, V).real
    off = w < tol.SUPPORT_EIGVAL_TOL
    if np.abs(d[off]).sum() > tol.SUPPORT_WEIGHT_TOL:
        return math.inf
    on = ~off
    return float(-np.sum(d[on] * np.log(w[on])))


def _finish_report(G: LindbladGenerator, rho: DensityMatrix,
                   heat: dict[str, float], power: dict[str, float]) -> FluxReport:
    h_s = G.hamiltonian
    energy_rate = float(np.trace(h_s.mat @ apply_dissipator(G, rho.op).mat).real)
    entropy_rate = _entropy_rate(G, rho)
    beta_heat = sum(G.bath_beta(label) * q for label, q in heat.items())
    production = entropy_rate - beta_heat if math.isfinite(entropy_rate) else math.inf
    return FluxReport(heat, power, energy_rate, entropy_rate, production)


def global_fluxes(G: LindbladGenerator, rho: DensityMatrix) -> FluxReport:
    """Heat flux and power per bath from the joint-space functional:
    Q_dot_r = -D_r(H_B_r), W_dot_r = D_r(H_S + H_B_r)."""
    if not G.baths:
        raise ValueError("generator carries no bath metadata; global fluxes unavailable")
    heat: dict[str, float] = {}
    power: dict[str, float] = {}
    for label in G.bath_labels:
        info = next(b for b in G.baths if b.label == label)
        joint = FactorLayout(G.hamiltonian.dims + info.H_B.dims)
        ns = G.hamiltonian.layout.n_factors
        h_b = embed(info.H_B, joint, list(range(ns, joint.n_factors)))
        h_s = embed(G.hamiltonian, joint, list(range(ns)))
        heat[label] = -flux_functional(G, label, h_b, rho)
        power[label] = flux_functional(G, label, h_s + h_b, rho)
    return _finish_report(G, rho, heat, power)


def local_fluxes(G: LindbladGenerator, H0: Operator, rho: DensityMatrix) -> FluxReport:
    """Heat flux and power per bath from system operators only:
    Q_dot_r = Tr[H0 D_r(rho)], W_dot_r = Tr[(H_S - H0) D_r(rho)].

    Valid only when [H_S, H0] = 0 and every bath coupling satisfies the
    equilibrium condition [v_r, H0 + H_B_r] = 0; refuses otherwise.
    """
    if not G.baths:
        raise ValueError("generator carries no bath metadata; equilibrium check unavailable")
    comm = G.hamiltonian.mat @ H0.mat - H0.mat @ G.hamiltonian.mat
    defect = float(np.abs(comm).max())
    if defect > tol.COUPLING_COMMUTATOR_TOL:
        raise ValueError(f"[H_S, H0] != 0 (defect {defect:.3e}); local fluxes do not apply")
    ns = G.hamiltonian.layout.n_factors
    for info in G.baths:
        joint = FactorLayout(G.hamiltonian.dims + info.H_B.dims)
        conserved = embed(H0, joint, list(range(ns))).mat \
            + embed(info.H_B, joint, list(range(ns, joint.n_factors))).mat
        c = info.coupling.mat @ conserved - conserved @ info.coupling.mat
        defect = float(np.abs(c).max())
        if defect > tol.COUPLING_COMMUTATOR_TOL:
            raise ValueError(
                f"bath '{info.label}' fails the equilibrium condition [v, H0 + H_B] = 0 "
                f"(defect {defect:.3e}); local fluxes do not apply"
            )
    heat: dict[str, float] = {}
    power: dict[str, float] = {}
    diff = G.hamiltonian - H0
    for label in G.bath_labels:
        diss = apply_dissipator(G, rho.op, label).mat
        heat[label] = float(np.trace(H0.mat @ diss).real)
        power[label] = float(np.trace(diff.mat @ diss).real)
    return _finish_report(G, rho, heat, power)


# ---------------------------------------------------------------------------
# quantum detailed balance
# ---------------------------------------------------------------------------

class DetailedBalanceReport(NamedTuple):
    anti_hermitian_residual: float   # |L_a(pi)|_max = |[H, pi]|_max
    symmetric_residual: float        # max over basis of |L_s(A pi) - L_s*(A) pi|_max


def detailed_balance_check(G: LindbladGenerator, pi: DensityMatrix) -> DetailedBalanceReport:
    """Quantum detailed balance with respect to ``pi``:

    the Hamiltonian part must annihilate pi, and the dissipator must
    satisfy L_s(A pi) = L_s*(A) pi for every operator A.  The second
    condition is scanned over all matrix units, reporting the worst
    residual.
    """
    H = G.hamiltonian.mat
    anti = float(np.abs(-1j * (H @ pi.mat - pi.mat @ H)).max())
    layout = G.hamiltonian.layout
    D = G.dim
    worst = 0.0
    for a in range(D):
        for b in range(D):
            unit = np.zeros((D, D), dtype=complex)
            unit[a, b] = 1.0
            lhs = apply_dissipator(G, Operator(unit @ pi.mat, layout)).mat
            rhs = apply_dissipator_dual(G, Operator(unit, layout)).mat @ pi.mat
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    return DetailedBalanceReport(anti, worst)
