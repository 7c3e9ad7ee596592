"""Repeated-interaction engine with exact per-step thermodynamic bookkeeping.

One collision couples the system to fresh thermal copies of one or more
baths for a window of length tau, evolves the joint state with the exact
unitary, and records heat per bath, switching work, system energy and
entropy changes, and entropy production.  Maps are classified as
with-equilibrium ([U, H0 + H_B] = 0) or with-NESS, and for equilibrium
maps heat, work and entropy production can be evaluated from system
quantities alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence
import math

import numpy as np

from . import tolerances as tol
from .core import (
    DensityMatrix,
    FactorLayout,
    LayoutError,
    Operator,
    embed,
    gibbs_state,
    matrix_exp_unitary,
    partial_trace,
    relative_entropy,
    von_neumann_entropy,
    _partial_trace_matrix,
)


class ConvergenceError(RuntimeError):
    """Fixed-point iteration did not converge within the iteration cap."""


@dataclass(frozen=True)
class BathSpec:
    """One thermal bath copy: its Hamiltonian, temperature and coupling.

    ``V`` acts on the system x bath-copy space with the bath factors
    last; ``H_B`` acts on the bath copy alone.
    """

    H_B: Operator
    beta: float
    V: Operator
    label: str

    def __post_init__(self) -> None:
        if not self.H_B.is_hermitian():
            raise ValueError(f"bath '{self.label}': H_B not Hermitian")
        if not self.V.is_hermitian():
            raise ValueError(f"bath '{self.label}': coupling not Hermitian")
        if not (self.beta >= 0.0 and math.isfinite(self.beta)):
            raise ValueError(f"bath '{self.label}': beta must be finite and >= 0")
        nb = self.H_B.layout.n_factors
        if self.V.layout.n_factors <= nb or self.V.dims[-nb:] != self.H_B.dims:
            raise LayoutError(
                f"bath '{self.label}': coupling layout {self.V.dims} must end with bath factors {self.H_B.dims}"
            )

    @property
    def system_dims(self) -> tuple[int, ...]:
        nb = self.H_B.layout.n_factors
        return self.V.dims[:-nb]

    def thermal_state(self) -> DensityMatrix:
        return gibbs_state(self.H_B, self.beta)


@dataclass(frozen=True)
class InteractionSchedule:
    """Assigns to each step index n >= 1 the baths coupled in that window."""

    steps: Callable[[int], Sequence[BathSpec]]
    tau: float
    period: int | None = None

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError("window duration tau must be positive")

    @classmethod
    def constant(cls, baths: Sequence[BathSpec], tau: float) -> "InteractionSchedule":
        baths = tuple(baths)
        return cls(steps=lambda n: baths, tau=tau, period=1)

    @classmethod
    def alternating(cls, odd_baths: Sequence[BathSpec], even_baths: Sequence[BathSpec],
                    tau: float) -> "InteractionSchedule":
        odd = tuple(odd_baths)
        even = tuple(even_baths)
        return cls(steps=lambda n: odd if n % 2 == 1 else even, tau=tau, period=2)


@dataclass(frozen=True)
class ThermoRecord:
    """Per-step thermodynamic ledger.

    Validates the first law |dE - sum_r dQ_r - dW| <= FIRST_LAW_TOL * scale
    and the second law dS_i >= -SECOND_LAW_TOL on construction.
    """

    step_index: int
    heat: dict[str, float]          # per-bath dQ_r
    work: float                     # switching work dW
    energy_change: float            # system dE
    entropy_change: float           # system dS (nats)
    entropy_production: float       # dS_i = dS - sum_r beta_r dQ_r

    def __post_init__(self) -> None:
        scale = max(1.0, abs(self.energy_change))
        defect = abs(self.energy_change - self.total_heat - self.work)
        if defect > tol.FIRST_LAW_TOL * scale:
            raise ValueError(f"first-law violation at step {self.step_index}: defect {defect:.3e}")
        if self.entropy_production < -tol.SECOND_LAW_TOL:
            raise ValueError(
                f"second-law violation at step {self.step_index}: dS_i = {self.entropy_production:.3e}"
            )

    @property
    def total_heat(self) -> float:
        return sum(self.heat.values())


class _PreparedStep:
    """Collision unitary and lifted operators for one (H_S, baths, tau)."""

    def __init__(self, H_S: Operator, baths: Sequence[BathSpec], tau: float):
        baths = tuple(baths)
        if not baths:
            raise ValueError("a collision window needs at least one bath")
        labels = [b.label for b in baths]
        if len(set(labels)) != len(labels):
            raise ValueError(f"bath labels within one window must be distinct, got {labels}")
        system_layout = H_S.layout
        ns = system_layout.n_factors
        joint = system_layout
        slots: list[tuple[int, ...]] = []
        cursor = ns
        for b in baths:
            if b.system_dims != system_layout.dims:
                raise LayoutError(
                    f"bath '{b.label}' coupling expects system {b.system_dims}, state has {system_layout.dims}"
                )
            nb = b.H_B.layout.n_factors
            joint = joint + b.H_B.layout
            slots.append(tuple(range(cursor, cursor + nb)))
            cursor += nb

        self.baths = baths
        self.tau = tau
        self.system_layout = system_layout
        self.h_system = H_S.mat
        self.joint_layout = joint
        self.system_slots = tuple(range(ns))
        self.bath_slots = slots
        self.omegas = [b.thermal_state() for b in baths]

        sys_slots = list(self.system_slots)
        self.h_bath_lifted: list[np.ndarray] = []
        h_total = embed(H_S, joint, sys_slots).mat.copy()
        h_free = h_total.copy()
        for b, sl in zip(baths, slots):
            hb = embed(b.H_B, joint, list(sl)).mat
            self.h_bath_lifted.append(hb)
            h_free += hb
            h_total += hb + embed(b.V, joint, sys_slots + list(sl)).mat
        self.h_free = h_free  # H_S + sum_r H_B_r, the part left on at the switches
        self.unitary = matrix_exp_unitary(Operator(h_total, joint), tau).mat

    def initial_joint(self, rho_S_mat: np.ndarray) -> np.ndarray:
        out = rho_S_mat
        for w in self.omegas:
            out = np.kron(out, w.mat)
        return out

    def evolve(self, joint0: np.ndarray) -> np.ndarray:
        return self.unitary @ joint0 @ self.unitary.conj().T

    def system_marginal(self, joint: np.ndarray) -> np.ndarray:
        return _partial_trace_matrix(joint, self.joint_layout.dims, list(self.system_slots))

    def bath_marginal(self, joint: np.ndarray, r: int) -> np.ndarray:
        return _partial_trace_matrix(joint, self.joint_layout.dims, list(self.bath_slots[r]))

    def apply_map(self, rho_S_mat: np.ndarray) -> np.ndarray:
        return self.system_marginal(self.evolve(self.initial_joint(rho_S_mat)))


def _ledger(prep: _PreparedStep, rho_S: DensityMatrix, joint0: np.ndarray, joint1: np.ndarray,
            rho_S_new: np.ndarray, step_index: int) -> ThermoRecord:
    heat: dict[str, float] = {}
    beta_heat = 0.0
    for r, b in enumerate(prep.baths):
        rho_b = prep.bath_marginal(joint1, r)
        dq = -float(np.trace(b.H_B.mat @ (rho_b - prep.omegas[r].mat)).real)
        heat[b.label] = dq
        beta_heat += b.beta * dq
    # switching work: the conserved H_S + H_B + V during the window means
    # dW = Tr[(H_S + H_B)(rho(tau) - rho(0))] exactly
    work = float(np.trace(prep.h_free @ (joint1 - joint0)).real)
    dE = float(np.trace(prep.h_system @ (rho_S_new - rho_S.mat)).real)
    dS = von_neumann_entropy(DensityMatrix.from_matrix(rho_S_new, prep.system_layout)) \
        - von_neumann_entropy(rho_S)
    return ThermoRecord(
        step_index=step_index,
        heat=heat,
        work=work,
        energy_change=dE,
        entropy_change=dS,
        entropy_production=dS - beta_heat,
    )


def _execute(prep: _PreparedStep, rho_S: DensityMatrix, step_index: int) -> tuple[DensityMatrix, ThermoRecord]:
    joint0 = prep.initial_joint(rho_S.mat)
    joint1 = prep.evolve(joint0)
    new_mat = prep.system_marginal(joint1)
    new_mat = new_mat / new_mat.trace().real  # strip trace roundoff before re-validating
    record = _ledger(prep, rho_S, joint0, joint1, new_mat, step_index)
    return DensityMatrix.from_matrix(new_mat, prep.system_layout), record


def step(rho_S: DensityMatrix, H_S: Operator, baths: Sequence[BathSpec], tau: float,
         step_index: int = 1) -> tuple[DensityMatrix, ThermoRecord]:
    """One collision window: evolve with fresh bath copies and return the
    new system state together with the window's thermodynamic ledger."""
    return _execute(_PreparedStep(H_S, baths, tau), rho_S, step_index)


class EntropyDecomposition(NamedTuple):
    correlation_term: float     # D(rho_joint || rho_S' x rho_B')
    bath_term: float            # D(rho_B' || product of fresh thermal states)
    entropy_production: float   # dS - sum_r beta_r dQ_r from the ledger

    @property
    def total(self) -> float:
        return self.correlation_term + self.bath_term


def entropy_production_decomposition(rho_S: DensityMatrix, H_S: Operator, baths: Sequence[BathSpec],
                                     tau: float) -> EntropyDecomposition:
    """Split one window's entropy production into system-bath correlations
    plus the displacement of the baths from their thermal states.

    With several baths the bath term compares the joint post-collision
    bath state against the product of fresh thermal states, which keeps
    the identity dS_i = correlation_term + bath_term exact (bath-bath
    correlations are then part of the bath term).
    """
    prep = _PreparedStep(H_S, baths, tau)
    joint0 = prep.initial_joint(rho_S.mat)
    joint1 = prep.evolve(joint0)
    new_sys = prep.system_marginal(joint1)
    record = _ledger(prep, rho_S, joint0, joint1, new_sys, 1)

    joint_state = DensityMatrix.from_matrix(joint1 / joint1.trace().real, prep.joint_layout)
    rho_S_new = partial_trace(joint_state, prep.system_slots)
    bath_slots = [s for sl in prep.bath_slots for s in sl]
    rho_B_new = partial_trace(joint_state, bath_slots)
    product = np.kron(rho_S_new.mat, rho_B_new.mat)
    corr = relative_entropy(joint_state, DensityMatrix.from_matrix(product, prep.joint_layout))
    fresh = prep.omegas[0].mat
    for w in prep.omegas[1:]:
        fresh = np.kron(fresh, w.mat)
    bath = relative_entropy(rho_B_new, DensityMatrix.from_matrix(fresh, rho_B_new.layout))
    return EntropyDecomposition(corr, bath, record.entropy_production)


def run(rho0: DensityMatrix, H_S: Operator, schedule: InteractionSchedule,
        n_steps: int) -> tuple[list[DensityMatrix], list[ThermoRecord]]:
    """Iterate the schedule for ``n_steps`` windows.

    Returns the trajectory (length ``n_steps + 1``, starting at ``rho0``)
    and one ledger record per window.  Collision unitaries are cached per
    distinct bath tuple, so schedules should hand back the same tuples for
    recurring patterns.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    cache: dict[tuple[int, ...], _PreparedStep] = {}
    trajectory = [rho0]
    records: list[ThermoRecord] = []
    rho = rho0
    for n in range(1, n_steps + 1):
        baths = tuple(schedule.steps(n))
        key = tuple(id(b) for b in baths)
        prep = cache.get(key)
        if prep is None:
            prep = _PreparedStep(H_S, baths, schedule.tau)
            cache[key] = prep
        rho, rec = _execute(prep, rho, n)
        trajectory.append(rho)
        records.append(rec)
    return trajectory, records


class MapClassification(NamedTuple):
    equilibrium: bool
    residual: float


def classify_map(H_S: Operator, bath: BathSpec, H0: Operator, tau: float) -> MapClassification:
    """Equilibrium test for a single-bath collision map: [U, H0 + H_B] = 0.

    Returns the max-entry norm of the commutator; the map counts as a map
    with equilibrium when the residual is at most
    ``EQUILIBRIUM_COMMUTATOR_TOL``, otherwise it has a NESS.
    """
    if not H0.is_hermitian():
        raise ValueError("H0 must be Hermitian")
    if H0.dims != H_S.dims:
        raise LayoutError("H0 must act on the system factors")
    prep = _PreparedStep(H_S, [bath], tau)
    conserved = embed(H0, prep.joint_layout, list(prep.system_slots)).mat + prep.h_bath_lifted[0]
    comm = prep.unitary @ conserved - conserved @ prep.unitary
    residual = float(np.abs(comm).max())
    return MapClassification(residual <= tol.EQUILIBRIUM_COMMUTATOR_TOL, residual)


class LocalThermo(NamedTuple):
    heat: float
    work: float
    entropy_production: float


def local_thermo(rho_before: DensityMatrix, rho_after: DensityMatrix, H_S: Operator,
                 H0: Operator, pi: DensityMatrix) -> LocalThermo:
    """Heat, work and entropy production of one window from system
    quantities only, valid for maps with equilibrium state ``pi``.

    dQ = Tr[H0 (rho' - rho)], dW = Tr[(H_S - H0)(rho' - rho)],
    dS_i = D(rho || pi) - D(rho' || pi).
    """
    comm = H_S.mat @ H0.mat - H0.mat @ H_S.mat
    defect = float(np.abs(comm).max())
    if defect > tol.COUPLING_COMMUTATOR_TOL:
        raise ValueError(f"[H_S, H0] != 0 (defect {defect:.3e}); local thermodynamics does not apply")
    delta = rho_after.mat - rho_before.mat
    heat = float(np.trace(H0.mat @ delta).real)
    work = float(np.trace((H_S.mat - H0.mat) @ delta).real)
    dsi = relative_entropy(rho_before, pi) - relative_entropy(rho_after, pi)
    return LocalThermo(heat, work, dsi)


def invariant_state(H_S: Operator, baths: Sequence[BathSpec] | Sequence[Sequence[BathSpec]],
                    tau: float, *, fp_tol: float = tol.FIXED_POINT_TOL,
                    max_iter: int = tol.FIXED_POINT_MAX_ITER) -> DensityMatrix:
    """Fixed point of one full schedule period, found by iterating the map.

    ``baths`` is either one bath list (a single collision map) or a
    sequence of bath lists applied in order within each period.  Iteration
    starts from the maximally mixed state, stops when successive iterates
    differ by at most ``fp_tol`` in max-entry norm, and fails with
    ``ConvergenceError`` at ``max_iter``.
    """
    if baths and isinstance(baths[0], BathSpec):
        period: list[Sequence[BathSpec]] = [baths]  # type: ignore[list-item]
    else:
        period = list(baths)  # type: ignore[arg-type]
    preps = [_PreparedStep(H_S, b, tau) for b in period]

    rho = np.eye(H_S.dim, dtype=complex) / H_S.dim
    for _ in range(max_iter):
        new = rho
        for prep in preps:
            new = prep.apply_map(new)
        new = new / new.trace().real
        if np.abs(new - rho).max() <= fp_tol:
            rho = new
            break
        rho = new
    else:
        raise ConvergenceError(f"no fixed point after {max_iter} iterations of the period map")

    rho = (rho + rho.conj().T) / 2
    rho = rho / rho.trace().real
    check = rho
    for prep in preps:
        check = prep.apply_map(check)
    residual = float(np.abs(check - rho).max())
    if residual > 10 * fp_tol:
        raise ConvergenceError(f"fixed-point residual {residual:.3e} exceeds tolerance")
    return DensityMatrix.from_matrix(rho, H_S.layout)
