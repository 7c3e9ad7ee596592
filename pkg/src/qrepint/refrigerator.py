"""Three-qubit absorption refrigerator.

Qubit 1 couples to the cold bath, qubit 2 to the room bath, qubit 3 to
the hot bath, with energies E2 = E1 + E3 so that the internal coupling
g(|010><101| + |101><010|) connects degenerate states.  Dissipation is
the reset model (each qubit is replaced by its local thermal state at
rate p_i), which equals a 12-channel Lindblad dissipator and is realized
microscopically by collisions with thermal qubits through two alternating
streams of exchange-plus-dephasing couplings.

Basis ordering: qubit 1 is the slowest index, so |q1 q2 q3> has index
4 q1 + 2 q2 + q3.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple
import math

import numpy as np

from . import tolerances as tol
from .core import DensityMatrix, FactorLayout, Operator, embed, gibbs_state, kron_all
from .lindblad import BathInfo, Channel, LindbladGenerator, build_generator, integrate, local_fluxes
from .qubits import n_excited, sm, sp, sx, sy, sz, qubit_hamiltonian
from .repint import BathSpec, InteractionSchedule

BATH_LABELS = ("C", "R", "H")
SYSTEM_LAYOUT = FactorLayout((2, 2, 2))
PAIR_LAYOUT = FactorLayout((2, 2, 2, 2))   # three system qubits + one bath qubit


@dataclass(frozen=True)
class RefrigeratorParams:
    """Qubit energies, internal coupling, reset rates and temperatures.

    ``E2`` must equal ``E1 + E3`` (it is snapped to the exact sum after a
    1e-12 consistency check) and temperatures must be ordered
    T_C <= T_R <= T_H; the machine cools only for strict ordering, but
    equal temperatures are legitimate equilibrium configurations.
    """

    E1: float
    E2: float
    E3: float
    g: float
    p1: float
    p2: float
    p3: float
    T_C: float
    T_R: float
    T_H: float

    def __post_init__(self) -> None:
        target = self.E1 + self.E3
        if abs(self.E2 - target) > 1e-12 * max(1.0, abs(target)):
            raise ValueError(f"E2 must equal E1 + E3 = {target}, got {self.E2}")
        object.__setattr__(self, "E2", target)
        if self.E1 <= 0 or self.E3 <= 0:
            raise ValueError("qubit energies must be positive")
        if self.g < 0:
            raise ValueError("internal coupling g must be nonnegative")
        if min(self.p1, self.p2, self.p3) <= 0:
            raise ValueError("reset rates p_i must be positive")
        if not (0 < self.T_C <= self.T_R <= self.T_H):
            raise ValueError("temperatures must satisfy 0 < T_C <= T_R <= T_H")

    @classmethod
    def reference(cls) -> "RefrigeratorParams":
        """The benchmark parameter point used throughout the tests:
        E = (1, 5, 4), g = 1, p = (0.5, 0.4, 0.2), T = (2, 2.5, 5)."""
        return cls(E1=1.0, E2=5.0, E3=4.0, g=1.0, p1=0.5, p2=0.4, p3=0.2,
                   T_C=2.0, T_R=2.5, T_H=5.0)

    @property
    def energies(self) -> tuple[float, float, float]:
        return (self.E1, self.E2, self.E3)

    @property
    def rates(self) -> tuple[float, float, float]:
        return (self.p1, self.p2, self.p3)

    @property
    def temperatures(self) -> tuple[float, float, float]:
        return (self.T_C, self.T_R, self.T_H)

    @property
    def betas(self) -> tuple[float, float, float]:
        return tuple(1.0 / T for T in self.temperatures)


def ground_population(energy: float, beta: float) -> float:
    """r = <0| omega_beta |0> for a qubit of the given energy."""
    return 1.0 / (1.0 + math.exp(-beta * energy))


def build_hamiltonians(params: RefrigeratorParams) -> tuple[Operator, Operator, Operator]:
    """(H0, H_int, H_S) on the three-qubit layout.

    H0 is the free part sum_i E_i |1><1|_i; H_int couples the degenerate
    pair |010>, |101| with strength g.  E2 = E1 + E3 makes H_int energy
    preserving, asserted as [H_S, H0] = 0.
    """
    h0 = np.zeros((8, 8), dtype=complex)
    for i, E in enumerate(params.energies):
        h0 += embed(Operator(E * n_excited, (2,)), SYSTEM_LAYOUT, [i]).mat
    hint = np.zeros((8, 8), dtype=complex)
    hint[2, 5] = params.g   # |010><101|
    hint[5, 2] = params.g
    H0 = Operator(h0, SYSTEM_LAYOUT)
    Hint = Operator(hint, SYSTEM_LAYOUT)
    HS = H0 + Hint
    comm = HS.mat @ H0.mat - H0.mat @ HS.mat
    defect = float(np.abs(comm).max())
    if defect > tol.REFRIGERATOR_COMMUTATOR_TOL:
        raise AssertionError(f"[H_S, H0] = {defect:.3e}; energy degeneracy broken")
    return H0, Hint, HS


def thermal_product_state(params: RefrigeratorParams) -> DensityMatrix:
    """Product of the three local thermal states, omega_beta_i(H_i)."""
    parts = [gibbs_state(qubit_hamiltonian(E), 1.0 / T).op
             for E, T in zip(params.energies, params.temperatures)]
    return DensityMatrix(kron_all(parts))


class StreamCoefficients(NamedTuple):
    """Per-qubit quantities entering the two-stream couplings."""

    r: tuple[float, float, float]        # thermal ground populations
    M: tuple[float, float, float]        # magnetizations 1 - 2 r_i
    Q: tuple[float, float, float]        # odd-stream z coefficients (1 - M)^(-1/2)
    P: tuple[float, float, float]        # even-stream z coefficients (1 + M)^(-1/2)
    lam: tuple[float, float, float]      # stream weights p_i / 4


def stream_coefficients(params: RefrigeratorParams) -> StreamCoefficients:
    r = tuple(ground_population(E, b) for E, b in zip(params.energies, params.betas))
    M = tuple(1.0 - 2.0 * ri for ri in r)
    for i, m in enumerate(M):
        if abs(abs(m) - 1.0) < 1e-15:
            raise ValueError(f"qubit {i + 1}: |M| = 1 (zero or infinite temperature) "
                             "makes the stream coefficients singular")
    Q = tuple((1.0 - m) ** -0.5 for m in M)
    P = tuple((1.0 + m) ** -0.5 for m in M)
    lam = tuple(p / 4.0 for p in params.rates)
    return StreamCoefficients(r, M, Q, P, lam)


def _stream_coupling(i: int, z_coeff: float, magnetization: float, weight: float) -> Operator:
    """sqrt(weight) (sx_B sx_i + sy_B sy_i + c (sz_B - M) sz_i) on the
    three-system-qubits x one-bath-qubit layout; the bath sits in slot 3."""
    sx_i = embed(Operator(sx, (2,)), PAIR_LAYOUT, [i]).mat
    sy_i = embed(Operator(sy, (2,)), PAIR_LAYOUT, [i]).mat
    sz_i = embed(Operator(sz, (2,)), PAIR_LAYOUT, [i]).mat
    sx_b = embed(Operator(sx, (2,)), PAIR_LAYOUT, [3]).mat
    sy_b = embed(Operator(sy, (2,)), PAIR_LAYOUT, [3]).mat
    sz_b = embed(Operator(sz, (2,)), PAIR_LAYOUT, [3]).mat
    eye = np.eye(16)
    mat = sx_b @ sx_i + sy_b @ sy_i + z_coeff * (sz_b - magnetization * eye) @ sz_i
    return Operator(math.sqrt(weight) * mat, PAIR_LAYOUT)


def unscaled_couplings(params: RefrigeratorParams) -> tuple[tuple[Operator, ...], tuple[Operator, ...]]:
    """The tau-independent couplings v_i of both streams (collision
    couplings are V_i = v_i / sqrt(tau))."""
    co = stream_coefficients(params)
    v_q = tuple(_stream_coupling(i, co.Q[i], co.M[i], co.lam[i]) for i in range(3))
    v_p = tuple(_stream_coupling(i, co.P[i], co.M[i], co.lam[i]) for i in range(3))
    return v_q, v_p


def _bath_specs(params: RefrigeratorParams, couplings: tuple[Operator, ...]) -> tuple[BathSpec, ...]:
    return tuple(
        BathSpec(H_B=qubit_hamiltonian(E), beta=1.0 / T, V=v, label=label)
        for E, T, v, label in zip(params.energies, params.temperatures, couplings, BATH_LABELS)
    )


class AnsatzCouplings(NamedTuple):
    V_Q: tuple[Operator, ...]
    V_P: tuple[Operator, ...]
    baths_Q: tuple[BathSpec, ...]
    baths_P: tuple[BathSpec, ...]


def build_ansatz_couplings(params: RefrigeratorParams, tau: float) -> AnsatzCouplings:
    """Collision couplings V_i^Q, V_i^P = v_i / sqrt(tau) plus their bath
    specs (each bath qubit mirrors its system qubit's energy).

    Every coupling has vanishing thermal bath average and commutes with
    H0 + H_B_i, both asserted here to ``COUPLING_COMMUTATOR_TOL``-level
    tolerances.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    v_q, v_p = unscaled_couplings(params)
    scale = tau ** -0.5
    V_Q = tuple(scale * v for v in v_q)
    V_P = tuple(scale * v for v in v_p)
    H0, _, _ = build_hamiltonians(params)
    for V_stream in (V_Q, V_P):
        for i, V in enumerate(V_stream):
            _assert_equilibrium_coupling(params, H0, V, i, tau)
    return AnsatzCouplings(V_Q, V_P, _bath_specs(params, V_Q), _bath_specs(params, V_P))


def _assert_equilibrium_coupling(params: RefrigeratorParams, H0: Operator, V: Operator,
                                 i: int, tau: float) -> None:
    h_b = qubit_hamiltonian(params.energies[i])
    omega = gibbs_state(h_b, params.betas[i]).mat
    v_t = V.mat.reshape(8, 2, 8, 2)
    avg = np.einsum("abcd,db->ac", v_t, omega) * math.sqrt(tau)  # tau-independent defect
    if np.abs(avg).max() > tol.STANDARD_CONDITION_TOL:
        raise AssertionError(f"stream coupling {i + 1}: thermal bath average {np.abs(avg).max():.3e}")
    conserved = embed(H0, PAIR_LAYOUT, [0, 1, 2]).mat + embed(h_b, PAIR_LAYOUT, [3]).mat
    comm = (V.mat @ conserved - conserved @ V.mat) * math.sqrt(tau)
    if np.abs(comm).max() > tol.COUPLING_COMMUTATOR_TOL:
        raise AssertionError(f"stream coupling {i + 1}: [V, H0 + H_B] = {np.abs(comm).max():.3e}")


def build_repint_schedule(params: RefrigeratorParams, tau: float) -> InteractionSchedule:
    """Odd collision windows couple through the Q stream, even windows
    through the P stream; every window uses three fresh thermal qubits."""
    cpl = build_ansatz_couplings(params, tau)
    return InteractionSchedule.alternating(cpl.baths_Q, cpl.baths_P, tau)


def _derived_bath_infos(params: RefrigeratorParams) -> tuple[BathInfo, ...]:
    v_q, v_p = unscaled_couplings(params)
    infos = []
    for stream in (v_q, v_p):
        for E, T, v, label in zip(params.energies, params.temperatures, stream, BATH_LABELS):
            infos.append(BathInfo(label=label, beta=1.0 / T, H_B=qubit_hamiltonian(E),
                                  coupling=v, weight=0.5))
    return tuple(infos)


def build_derived_generator(params: RefrigeratorParams) -> LindbladGenerator:
    """The generator obtained from the two collision streams: channels
    enumerated from v_i^Q and v_i^P, each stream carrying weight 1/2."""
    _, _, HS = build_hamiltonians(params)
    v_q, v_p = unscaled_couplings(params)
    baths = _bath_specs(params, v_q) + _bath_specs(params, v_p)
    return build_generator(HS, baths, couplings=v_q + v_p, weights=[0.5] * 6)


def build_reset_generator(params: RefrigeratorParams) -> LindbladGenerator:
    """The reset-model generator: per qubit the four channels
    (p r_bar, sigma+), (p r_bar, sigma+ sigma-), (p r, sigma-),
    (p r, sigma- sigma+), carrying the two-stream couplings as metadata."""
    _, _, HS = build_hamiltonians(params)
    channels: list[Channel] = []
    for i, (E, p, beta, label) in enumerate(zip(params.energies, params.rates, params.betas, BATH_LABELS)):
        r = ground_population(E, beta)
        r_bar = 1.0 - r
        for rate, jump in ((p * r_bar, sp), (p * r_bar, sp @ sm), (p * r, sm), (p * r, sm @ sp)):
            lifted = embed(Operator(jump, (2,)), SYSTEM_LAYOUT, [i])
            channels.append(Channel(rate, lifted, label))
    return LindbladGenerator(HS, tuple(channels), _derived_bath_infos(params))


def reset_dissipator_action(params: RefrigeratorParams, X: Operator) -> Operator:
    """Direct evaluation of the reset form sum_i p_i (omega_i x Tr_i[X] - X);
    an independent route to the same dissipator, used as an oracle."""
    from .core import _partial_trace_matrix

    out = np.zeros((8, 8), dtype=complex)
    for i, (E, p, beta) in enumerate(zip(params.energies, params.rates, params.betas)):
        omega = gibbs_state(qubit_hamiltonian(E), beta)
        keep = [k for k in range(3) if k != i]
        reduced = _partial_trace_matrix(X.mat, (2, 2, 2), keep)
        full = np.kron(omega.mat, reduced)  # factor order: qubit i, then the kept qubits
        rebuilt = _reorder_three_qubits(full, [i] + keep)
        out += p * (rebuilt - X.mat)
    return Operator(out, SYSTEM_LAYOUT)


def _reorder_three_qubits(mat: np.ndarray, current_order: list[int]) -> np.ndarray:
    """Permute tensor factors of an 8x8 matrix from ``current_order`` to 0,1,2."""
    perm = [current_order.index(k) for k in range(3)]
    t = mat.reshape(2, 2, 2, 2, 2, 2)
    axes = perm + [3 + p for p in perm]
    return t.transpose(axes).reshape(8, 8)


def derived_generator_equals_reset(params: RefrigeratorParams) -> float:
    """Max-entry residual between the stream-derived dissipator and the
    reset-model dissipator over all 64 matrix units of the system space."""
    from .lindblad import apply_dissipator

    derived = build_derived_generator(params)
    reset = build_reset_generator(params)
    worst = 0.0
    for a in range(8):
        for b in range(8):
            unit = np.zeros((8, 8), dtype=complex)
            unit[a, b] = 1.0
            X = Operator(unit, SYSTEM_LAYOUT)
            diff = apply_dissipator(derived, X).mat - apply_dissipator(reset, X).mat
            worst = max(worst, float(np.abs(diff).max()))
    return worst


class CoolingWindow(NamedTuple):
    is_cooling: bool
    bound: float


def cooling_window(params: RefrigeratorParams) -> CoolingWindow:
    """The machine cools iff 0 < E1/E3 < (T_H - T_R) T_C / ((T_R - T_C) T_H)."""
    if params.T_R == params.T_C:
        bound = math.inf if params.T_H > params.T_R else 0.0
    else:
        bound = (params.T_H - params.T_R) * params.T_C / ((params.T_R - params.T_C) * params.T_H)
    ratio = params.E1 / params.E3
    return CoolingWindow(0.0 < ratio < bound, bound)


def cop(params: RefrigeratorParams) -> float:
    """Coefficient of performance Q_dot_C / Q_dot_H = E1/E3, defined only
    inside the cooling window."""
    window = cooling_window(params)
    if not window.is_cooling:
        raise ValueError(
            f"E1/E3 = {params.E1 / params.E3:.6g} outside the cooling window (bound {window.bound:.6g}); "
            "the COP is meaningless here"
        )
    return params.E1 / params.E3


@dataclass(frozen=True)
class NessStructureReport:
    """Structure of the stationary qubit marginals.

    Each marginal must be diagonal with deviation from its local thermal
    state proportional to sigma_z; the products p_i c_i (with
    delta_i = c_i sigma_z) must alternate in sign across the qubits and
    share one magnitude.
    """

    offdiagonal_residuals: tuple[float, float, float]
    sigma_z_coefficients: tuple[float, float, float]
    weighted_coefficients: tuple[float, float, float]   # p_i c_i
    alternating_signs: bool
    magnitude_spread: float
    heat_fluxes: tuple[float, float, float]             # (p_i/2) E_i Tr[sz (omega_i - rho_i)]


def ness_structure_check(rho_ss: DensityMatrix, params: RefrigeratorParams,
                         zero_tol: float = 1e-12) -> NessStructureReport:
    from .core import partial_trace

    offs: list[float] = []
    cs: list[float] = []
    pcs: list[float] = []
    qdots: list[float] = []
    for i, (E, p, beta) in enumerate(zip(params.energies, params.rates, params.betas)):
        marginal = partial_trace(rho_ss, [i])
        offs.append(float(abs(marginal.mat[0, 1])))
        omega = gibbs_state(qubit_hamiltonian(E), beta)
        delta = marginal.mat - omega.mat
        c = float(delta[1, 1].real)
        cs.append(c)
        pcs.append(p * c)
        qdots.append(0.5 * p * E * float(np.trace(sz @ (omega.mat - marginal.mat)).real))
    signs = [0 if abs(pc) < zero_tol else (1 if pc > 0 else -1) for pc in pcs]
    alternating = (signs[0] * signs[1] <= 0) and (signs[1] * signs[2] <= 0) and \
        not (signs[0] == signs[2] == 0 and signs[1] != 0)
    mags = [abs(pc) for pc in pcs]
    return NessStructureReport(
        offdiagonal_residuals=tuple(offs),
        sigma_z_coefficients=tuple(cs),
        weighted_coefficients=tuple(pcs),
        alternating_signs=alternating,
        magnitude_spread=max(mags) - min(mags),
        heat_fluxes=tuple(qdots),
    )


class TransientPower(NamedTuple):
    integrated_abs_power: float
    final_abs_power: float


def transient_power(params: RefrigeratorParams, t_end: float = 40.0, dt: float = 1e-3,
                    stride: int = 20) -> TransientPower:
    """Integrated |W_dot(t)| along the relaxation from the thermal product
    state to the stationary state (trapezoid rule on the sampled fluxes)."""
    G = build_reset_generator(params)
    H0, _, _ = build_hamiltonians(params)
    rho0 = thermal_product_state(params)
    traj = integrate(G, rho0, t_end, dt, stride)
    powers = []
    for mat in traj.states:
        rho = DensityMatrix.from_matrix(mat, SYSTEM_LAYOUT)
        powers.append(abs(local_fluxes(G, H0, rho).power_total))
    integral = float(np.trapezoid(powers, traj.times))
    return TransientPower(integral, powers[-1])
