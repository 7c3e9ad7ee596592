"""Tests for the collision engine and its thermodynamic ledger."""

import math

import numpy as np
import pytest
import scipy.linalg

from qrepint.core import (
    DensityMatrix,
    Operator,
    gibbs_state,
    relative_entropy,
    von_neumann_entropy,
)
from qrepint.qubits import id2, n_excited, sx, sy, sz, qubit_hamiltonian
from qrepint.repint import (
    BathSpec,
    InteractionSchedule,
    ThermoRecord,
    classify_map,
    entropy_production_decomposition,
    invariant_state,
    local_thermo,
    run,
    step,
)
from qrepint import refrigerator


def exchange_coupling(strength: float) -> Operator:
    """strength * (sx x sx + sy x sy) on qubit-system x qubit-bath."""
    return Operator(strength * (np.kron(sx, sx) + np.kron(sy, sy)), (2, 2))


def qubit_bath(energy: float, beta: float, coupling: Operator, label: str = "b") -> BathSpec:
    return BathSpec(H_B=qubit_hamiltonian(energy), beta=beta, V=coupling, label=label)


def random_density(rng, dims):
    d = math.prod(dims)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    mat = g @ g.conj().T
    return DensityMatrix.from_matrix(mat / mat.trace().real, dims)


def random_hermitian(rng, d):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (g + g.conj().T) / 2


# ---------------------------------------------------------------------------
# single collision windows
# ---------------------------------------------------------------------------

def test_decoupled_window_is_inert():
    H_S = qubit_hamiltonian(1.0)
    rho = DensityMatrix.from_matrix(np.diag([0.6, 0.4]))
    bath = qubit_bath(2.0, 0.5, Operator(np.zeros((4, 4)), (2, 2)))
    new, rec = step(rho, H_S, [bath], tau=0.7)
    np.testing.assert_allclose(new.mat, rho.mat, atol=1e-12)
    assert abs(rec.heat["b"]) < 1e-12
    assert abs(rec.work) < 1e-12
    assert abs(rec.energy_change) < 1e-12
    assert abs(rec.entropy_change) < 1e-12
    assert abs(rec.entropy_production) < 1e-12


def test_equilibrium_state_produces_no_entropy():
    # resonant exchange conserves H0 + H_B, so omega_beta(H0) is a fixed
    # point with zero entropy production
    E, beta, tau = 1.0, 0.8, 0.6
    H_S = qubit_hamiltonian(E)
    bath = qubit_bath(E, beta, exchange_coupling(0.9))
    cls = classify_map(H_S, bath, H_S, tau)
    assert cls.equilibrium
    rho = gibbs_state(H_S, beta)
    new, rec = step(rho, H_S, [bath], tau)
    np.testing.assert_allclose(new.mat, rho.mat, atol=1e-13)
    assert abs(rec.entropy_production) <= 1e-10


def test_excited_qubit_heats_cold_bath():
    """Direct 4x4 evolution oracle built with scipy, independent of the engine."""
    E, beta, tau, J = 1.0, 5.0, 0.35, 1.3
    H_S = qubit_hamiltonian(E)
    V = exchange_coupling(J)
    bath = qubit_bath(E, beta, V)
    excited = DensityMatrix.from_matrix(np.diag([0.0, 1.0]))
    new, rec = step(excited, H_S, [bath], tau)

    # oracle: dense joint evolution with plain numpy/scipy and loop ptrace
    omega = np.diag([1.0, math.exp(-beta * E)]).astype(complex)
    omega /= omega.trace().real
    H = np.kron(E * n_excited, id2) + np.kron(id2, E * n_excited) + V.mat
    U = scipy.linalg.expm(-1j * tau * H)
    joint = U @ np.kron(excited.mat, omega) @ U.conj().T
    sys_oracle = np.zeros((2, 2), dtype=complex)
    bath_oracle = np.zeros((2, 2), dtype=complex)
    for a in range(2):
        for b in range(2):
            for k in range(2):
                sys_oracle[a, b] += joint[2 * a + k, 2 * b + k]
                bath_oracle[a, b] += joint[2 * k + a, 2 * k + b]
    np.testing.assert_allclose(new.mat, sys_oracle, atol=1e-12)
    dq_oracle = -float(np.trace(E * n_excited @ (bath_oracle - omega)).real)
    assert abs(rec.heat["b"] - dq_oracle) < 1e-12
    assert rec.heat["b"] < 0          # the cold bath absorbs energy
    scale = max(1.0, abs(rec.energy_change))
    assert abs(rec.energy_change - rec.total_heat - rec.work) <= 1e-10 * scale


def test_step_rejects_bad_input():
    H_S = qubit_hamiltonian(1.0)
    rho = DensityMatrix.maximally_mixed((2,))
    bath = qubit_bath(1.0, 1.0, exchange_coupling(1.0))
    with pytest.raises(ValueError):
        step(rho, H_S, [], tau=0.1)
    with pytest.raises(ValueError):
        step(rho, H_S, [bath, bath], tau=0.1)       # duplicate labels
    wide = Operator(np.zeros((8, 8)), (2, 2, 2))    # wrong system block
    with pytest.raises(Exception):
        step(rho, H_S, [BathSpec(qubit_hamiltonian(1.0), 1.0, wide, "x")], tau=0.1)


def test_bathspec_validation():
    with pytest.raises(ValueError):
        BathSpec(Operator(sx @ sy), 1.0, exchange_coupling(1.0), "x")   # non-Hermitian H_B
    with pytest.raises(ValueError):
        BathSpec(qubit_hamiltonian(1.0), -2.0, exchange_coupling(1.0), "x")
    with pytest.raises(Exception):
        BathSpec(qubit_hamiltonian(1.0), 1.0, Operator(np.zeros((2, 2)), (2,)), "x")


def test_thermo_record_checks_laws():
    with pytest.raises(ValueError):
        ThermoRecord(1, {"b": 0.5}, work=0.0, energy_change=0.0,
                     entropy_change=0.0, entropy_production=0.0)
    with pytest.raises(ValueError):
        ThermoRecord(1, {"b": 0.0}, work=0.0, energy_change=0.0,
                     entropy_change=0.0, entropy_production=-1e-6)


# ---------------------------------------------------------------------------
# laws over random windows
# ---------------------------------------------------------------------------

def test_laws_on_random_windows():
    rng = np.random.default_rng(1234)
    for _ in range(40):
        ds = int(rng.integers(2, 4))
        db = int(rng.integers(2, 4))
        n_baths = int(rng.integers(1, 3))
        tau = float(rng.uniform(0.01, 1.0))
        H_S = Operator(random_hermitian(rng, ds), (ds,))
        rho = random_density(rng, (ds,))
        baths = []
        for r in range(n_baths):
            V = Operator(random_hermitian(rng, ds * db), (ds, db))
            H_B = Operator(random_hermitian(rng, db), (db,))
            baths.append(BathSpec(H_B, float(rng.uniform(0.1, 3.0)), V, f"b{r}"))
        _, rec = step(rho, H_S, baths, tau)
        scale = max(1.0, abs(rec.energy_change))
        assert abs(rec.energy_change - rec.total_heat - rec.work) <= 1e-10 * scale
        assert rec.entropy_production >= -1e-10


def test_entropy_production_decomposition_single_bath():
    rng = np.random.default_rng(77)
    for _ in range(10):
        H_S = Operator(random_hermitian(rng, 2), (2,))
        rho = random_density(rng, (2,))
        V = Operator(random_hermitian(rng, 4), (2, 2))
        bath = BathSpec(qubit_hamiltonian(1.3), float(rng.uniform(0.2, 2.0)), V, "b")
        dec = entropy_production_decomposition(rho, H_S, [bath], float(rng.uniform(0.05, 0.8)))
        assert dec.correlation_term >= -1e-10
        assert dec.bath_term >= -1e-10
        assert abs(dec.total - dec.entropy_production) < 1e-9


def test_entropy_production_decomposition_two_baths():
    rng = np.random.default_rng(78)
    H_S = Operator(random_hermitian(rng, 2), (2,))
    rho = random_density(rng, (2,))
    baths = [
        BathSpec(qubit_hamiltonian(1.0), 0.4, Operator(random_hermitian(rng, 4), (2, 2)), "hot"),
        BathSpec(qubit_hamiltonian(1.0), 1.5, Operator(random_hermitian(rng, 4), (2, 2)), "cold"),
    ]
    dec = entropy_production_decomposition(rho, H_S, baths, 0.3)
    assert abs(dec.total - dec.entropy_production) < 1e-9


# ---------------------------------------------------------------------------
# trajectories
# ---------------------------------------------------------------------------

def test_run_single_step_matches_step():
    rng = np.random.default_rng(5)
    H_S = qubit_hamiltonian(1.0)
    rho = random_density(rng, (2,))
    bath = qubit_bath(1.0, 0.7, exchange_coupling(0.8))
    schedule = InteractionSchedule.constant([bath], tau=0.4)
    traj, recs = run(rho, H_S, schedule, 1)
    direct, rec = step(rho, H_S, [bath], 0.4)
    assert len(traj) == 2 and len(recs) == 1
    np.testing.assert_allclose(traj[1].mat, direct.mat, atol=1e-14)
    assert recs[0].heat == rec.heat


def test_run_converges_with_contracting_relative_entropy():
    # constant equal-temperature schedule: the trajectory approaches the
    # invariant state monotonically in relative entropy
    E, beta, tau = 1.0, 0.9, 0.5
    H_S = qubit_hamiltonian(E)
    bath = qubit_bath(E, beta, exchange_coupling(0.7))
    schedule = InteractionSchedule.constant([bath], tau)
    pi = invariant_state(H_S, [bath], tau)
    rho0 = DensityMatrix.from_matrix(np.diag([0.05, 0.95]))
    traj, _ = run(rho0, H_S, schedule, 40)
    distances = [relative_entropy(state, pi) for state in traj]
    assert distances[-1] < 1e-8
    assert all(d2 <= d1 + 1e-10 for d1, d2 in zip(distances, distances[1:]))


def test_refrigerator_schedule_ledger_is_valid():
    params = refrigerator.RefrigeratorParams.reference()
    _, _, HS = refrigerator.build_hamiltonians(params)
    schedule = refrigerator.build_repint_schedule(params, tau=0.05)
    rho0 = refrigerator.thermal_product_state(params)
    traj, recs = run(rho0, HS, schedule, 10)
    assert len(traj) == 11
    for rec in recs:
        scale = max(1.0, abs(rec.energy_change))
        assert abs(rec.energy_change - rec.total_heat - rec.work) <= 1e-10 * scale
        assert rec.entropy_production >= -1e-10
        assert set(rec.heat) == {"C", "R", "H"}


def test_map_contractivity():
    E, beta, tau = 1.0, 0.8, 0.45
    H_S = qubit_hamiltonian(E)
    bath = qubit_bath(E, beta, exchange_coupling(1.1))
    pi = invariant_state(H_S, [bath], tau)
    rng = np.random.default_rng(31)
    for _ in range(10):
        rho = random_density(rng, (2,))
        after, _ = step(rho, H_S, [bath], tau)
        assert relative_entropy(after, pi) <= relative_entropy(rho, pi) + 1e-10


# ---------------------------------------------------------------------------
# map classification
# ---------------------------------------------------------------------------

def test_classify_decoupled_map():
    H_S = qubit_hamiltonian(1.0)
    bath = qubit_bath(2.0, 1.0, Operator(np.zeros((4, 4)), (2, 2)))
    cls = classify_map(H_S, bath, H_S, tau=0.3)
    assert cls.equilibrium and cls.residual < 1e-14


def test_classify_refrigerator_couplings_have_equilibrium():
    params = refrigerator.RefrigeratorParams.reference()
    H0, _, HS = refrigerator.build_hamiltonians(params)
    cpl = refrigerator.build_ansatz_couplings(params, tau=0.2)
    for bath in cpl.baths_Q + cpl.baths_P:
        cls = classify_map(HS, bath, H0, tau=0.2)
        assert cls.equilibrium, f"bath {bath.label}: residual {cls.residual:.3e}"


def test_classify_detuned_exchange_is_ness():
    H_S = qubit_hamiltonian(1.0)
    bath = qubit_bath(1.7, 1.0, exchange_coupling(0.9))   # detuned bath qubit
    cls = classify_map(H_S, bath, H_S, tau=0.3)
    assert not cls.equilibrium
    assert cls.residual > 1e-3


# ---------------------------------------------------------------------------
# local thermodynamics
# ---------------------------------------------------------------------------

def test_local_thermo_trivial_cases():
    E, beta = 1.0, 0.9
    H_S = qubit_hamiltonian(E)
    pi = gibbs_state(H_S, beta)
    rng = np.random.default_rng(17)
    rho = random_density(rng, (2,))
    out = local_thermo(rho, rho, H_S, H_S, pi)
    assert out.heat == 0 and out.work == 0 and abs(out.entropy_production) < 1e-12
    # starting at the fixed point of an equilibrium map leaves it in place
    bath = qubit_bath(E, beta, exchange_coupling(0.8))
    after, _ = step(pi, H_S, [bath], 0.5)
    out = local_thermo(pi, after, H_S, H_S, pi)
    assert abs(out.entropy_production) < 1e-10


def test_local_matches_global_for_equilibrium_map():
    E, beta, tau = 1.0, 0.6, 0.4
    H_S = qubit_hamiltonian(E)
    bath = qubit_bath(E, beta, exchange_coupling(1.2))
    assert classify_map(H_S, bath, H_S, tau).equilibrium
    pi = gibbs_state(H_S, beta)
    rng = np.random.default_rng(23)
    for _ in range(5):
        rho = random_density(rng, (2,))
        after, rec = step(rho, H_S, [bath], tau)
        loc = local_thermo(rho, after, H_S, H_S, pi)
        assert abs(loc.heat - rec.heat["b"]) < 1e-10
        assert abs(loc.work - rec.work) < 1e-10
        assert abs(loc.entropy_production - rec.entropy_production) < 1e-10


def test_local_thermo_requires_commuting_h0():
    H_S = Operator(sx)
    pi = DensityMatrix.maximally_mixed((2,))
    rho = DensityMatrix.from_matrix(np.diag([0.3, 0.7]))
    with pytest.raises(ValueError):
        local_thermo(rho, rho, H_S, Operator(sz), pi)


# ---------------------------------------------------------------------------
# invariant states
# ---------------------------------------------------------------------------

def test_invariant_state_decoupled():
    H_S = Operator(np.diag([0.0, 1.0, 2.0]), (3,))
    bath = BathSpec(qubit_hamiltonian(1.0), 1.0, Operator(np.zeros((6, 6)), (3, 2)), "b")
    pi = invariant_state(H_S, [bath], tau=0.5)
    # the maximally mixed seed is already invariant here
    np.testing.assert_allclose(pi.mat, np.eye(3) / 3, atol=1e-12)


def test_invariant_state_equilibrium_bath():
    E, beta, tau = 1.0, 0.75, 0.6
    H_S = qubit_hamiltonian(E)
    bath = qubit_bath(E, beta, exchange_coupling(0.9))
    pi = invariant_state(H_S, [bath], tau)
    np.testing.assert_allclose(pi.mat, gibbs_state(H_S, beta).mat, atol=1e-10)


def test_invariant_state_refrigerator_equal_temperatures():
    params = refrigerator.RefrigeratorParams(1.0, 5.0, 4.0, 1.0, 0.5, 0.4, 0.2, 2.5, 2.5, 2.5)
    H0, Hint, HS = refrigerator.build_hamiltonians(params)
    cpl = refrigerator.build_ansatz_couplings(params, tau=0.05)
    pi = invariant_state(HS, [cpl.baths_Q, cpl.baths_P], tau=0.05)
    expected = gibbs_state(H0, 1.0 / 2.5)
    np.testing.assert_allclose(pi.mat, expected.mat, atol=1e-8)
    assert abs(float(np.trace(Hint.mat @ pi.mat).real)) < 1e-10


def test_schedule_validation():
    bath = qubit_bath(1.0, 1.0, exchange_coupling(1.0))
    with pytest.raises(ValueError):
        InteractionSchedule.constant([bath], tau=0.0)
    schedule = InteractionSchedule.alternating([bath], [bath], tau=0.1)
    assert schedule.period == 2
    assert schedule.steps(1)[0] is bath and schedule.steps(2)[0] is bath
