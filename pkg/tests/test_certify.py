"""Supply rates, LMI solving, certificates, and trajectory cross-checks."""

import numpy as np
import pytest

from dissipacert.certify import (
    CertificateRecord,
    FEASIBILITY_BAND,
    PassivityIndices,
    SupplyRate,
    add_certificate_observer,
    certify_qsr,
    load_certificate,
    optimize_channel_indices,
    qsr_lmi,
    remove_certificate_observer,
    save_certificate,
    solve_lmi,
    supply_from_indices,
    verify_dissipation_on_trajectory,
)
from dissipacert.errors import InfeasibleError, ValidationError
from dissipacert.lti import StateSpaceModel
from dissipacert.signals import Trajectory

from conftest import random_system


def scalar_model(a=0.5, b=1.0, c=1.0):
    return StateSpaceModel(
        a=np.array([[a]]), b=np.array([[b]]), c=np.array([[c]])
    )


# ------------------------------------------------------------- supply rates

def test_channel_indices_build_diagonal_supply():
    supply = supply_from_indices(
        PassivityIndices(rho=[0.25, -0.5], nu=[-1.0, 2.0])
    )
    np.testing.assert_array_equal(supply.q, [[-0.25, 0.0], [0.0, 0.5]])
    np.testing.assert_array_equal(supply.s, 0.5 * np.eye(2))
    np.testing.assert_array_equal(supply.r, [[1.0, 0.0], [0.0, -2.0]])


def test_supply_rate_validation():
    with pytest.raises(ValidationError):
        SupplyRate(q=np.eye(2), s=np.eye(2), r=np.eye(3))
    with pytest.raises(ValidationError):
        SupplyRate(
            q=np.array([[0.0, 1.0], [0.0, 0.0]]), s=np.eye(2), r=np.eye(2)
        )  # not symmetric


def test_indices_validation():
    with pytest.raises(ValidationError):
        PassivityIndices(rho=[1.0, 2.0], nu=[1.0])
    with pytest.raises(ValidationError):
        PassivityIndices(rho=[np.nan], nu=[0.0])


# ------------------------------------------------------------------ the LMI

def test_qsr_block_assembly_by_hand():
    model = scalar_model(a=0.5, b=1.0, c=2.0)
    supply = SupplyRate(
        q=np.array([[-0.5]]), s=np.array([[0.5]]), r=np.array([[0.9]])
    )
    block = qsr_lmi(model, supply, np.array([[2.0]]))
    # [[a p a - p - c q c, a p b - c s], [., b p b - r]]
    np.testing.assert_allclose(block, [[0.5, 0.0], [0.0, 1.1]], atol=1e-14)


def test_solve_lmi_maximizes_inside_the_feasible_set():
    import cvxpy as cp

    x = cp.Variable()
    solution = solve_lmi(
        [x * np.eye(2) - np.diag([1.0, 2.0])], objective=x
    )
    assert abs(solution.objective_value - 1.0) <= 1e-6
    assert solution.solver_name


def test_solve_lmi_feasibility_mode_reports_interior_slack():
    import cvxpy as cp

    x = cp.Variable()
    solution = solve_lmi([x - 3.0], hard_constraints=[x >= 1.0])
    assert solution.slack <= FEASIBILITY_BAND


def test_solve_lmi_detects_infeasibility_with_slack():
    import cvxpy as cp

    x = cp.Variable()
    with pytest.raises(InfeasibleError) as err:
        solve_lmi([x - 1.0], hard_constraints=[x >= 2.0])
    assert err.value.slack == pytest.approx(1.0, abs=1e-5)


def test_solve_lmi_rejects_non_expressions():
    with pytest.raises(ValidationError):
        solve_lmi([np.eye(2)])


# ------------------------------------------------------------- certify_qsr

def test_scalar_system_with_known_feasible_indices():
    # (a, b, c) = (0.5, 1, 1) with p = 1 gives diag(-0.25, -0.5) <= 0
    cert = certify_qsr(
        scalar_model(), supply_from_indices(PassivityIndices(rho=[0.5], nu=[-1.5]))
    )
    assert cert.lmi_residual <= FEASIBILITY_BAND
    assert cert.p.shape == (1, 1) and cert.p[0, 0] >= -FEASIBILITY_BAND


def test_scalar_system_with_provably_infeasible_indices():
    # needs p >= rho/(1-a^2) = 1 and p <= -nu = 0.9 simultaneously
    with pytest.raises(InfeasibleError) as err:
        certify_qsr(
            scalar_model(),
            supply_from_indices(PassivityIndices(rho=[0.75], nu=[-0.9])),
        )
    assert err.value.slack is None or err.value.slack > FEASIBILITY_BAND


def test_half_shifted_supply_is_universally_feasible(rng):
    # rho = nu = -1/2 makes the supplied power 0.5*||u + y||^2, nonnegative
    # along any trajectory, so a zero storage function always certifies it
    supply = supply_from_indices(PassivityIndices(rho=[-0.5], nu=[-0.5]))
    for seed in range(3):
        model = random_system(
            np.random.default_rng(seed), orders=(2, 4), channels=(1, 1)
        )
        cert = certify_qsr(model, supply)
        assert cert.lmi_residual <= cert.margin


def test_certificate_storage_is_positive_semidefinite(rng, make_system):
    model = make_system(rng, orders=(3, 3), channels=(2, 2), radius=(0.3, 0.5))
    indices, cert = optimize_channel_indices(model)
    eigs = np.linalg.eigvalsh(cert.p)
    assert eigs[0] >= -1e-12


# --------------------------------------------------------- index optimization

def test_optimized_excess_never_falls_below_universal_floor(make_system):
    for seed in (0, 1):
        model = make_system(np.random.default_rng(100 + seed))
        indices, cert = optimize_channel_indices(model)
        excess = np.asarray(indices.rho) + np.asarray(indices.nu)
        assert excess.min() >= -1.0 - 1e-6
        assert cert.lmi_residual <= cert.margin


def test_damped_low_gain_systems_have_positive_excess(make_system):
    model = make_system(
        np.random.default_rng(7),
        orders=(3, 3),
        channels=(2, 2),
        radius=(0.2, 0.35),
        input_scale=0.2,
    )
    indices, _ = optimize_channel_indices(model)
    excess = np.asarray(indices.rho) + np.asarray(indices.nu)
    assert excess.min() > 0.0


def test_index_bound_is_respected():
    model = scalar_model(a=0.1, b=0.05, c=1.0)
    indices, _ = optimize_channel_indices(model, index_bound=2.0)
    assert np.all(np.abs(indices.rho) <= 2.0 + 1e-9)
    assert np.all(np.abs(indices.nu) <= 2.0 + 1e-9)


# ------------------------------------------------------ trajectory validation

def test_certified_pair_passes_trajectory_check(rng):
    model = scalar_model()
    supply = supply_from_indices(PassivityIndices(rho=[0.5], nu=[-1.5]))
    cert = certify_qsr(model, supply)
    u = Trajectory(rng.normal(size=(1, 500)), dt=1.0)
    worst = verify_dissipation_on_trajectory(
        model, cert.p, supply, np.zeros(1), u
    )
    assert worst <= 1e-8 * (1.0 + np.linalg.norm(cert.p, 2))


def test_non_certificate_fails_trajectory_check(rng):
    # zero storage with supply -||y||^2 cannot absorb any output energy
    model = scalar_model()
    supply = SupplyRate(
        q=-np.eye(1), s=np.zeros((1, 1)), r=np.zeros((1, 1))
    )
    u = Trajectory(rng.normal(size=(1, 200)), dt=1.0)
    worst = verify_dissipation_on_trajectory(
        model, np.zeros((1, 1)), supply, np.array([1.0]), u
    )
    assert worst > 1e-3


# ---------------------------------------------------------------- observers

def test_observers_receive_and_stop_receiving_records():
    seen = []
    add_certificate_observer(seen.append)
    try:
        cert = certify_qsr(
            scalar_model(),
            supply_from_indices(PassivityIndices(rho=[0.5], nu=[-1.5])),
            context="toy",
        )
    finally:
        remove_certificate_observer(seen.append)
    assert len(seen) == 1
    record = seen[0]
    assert isinstance(record, CertificateRecord)
    assert record.context == "toy"
    np.testing.assert_array_equal(record.a, [[0.5]])
    assert record.certificate.lmi_residual == cert.lmi_residual
    certify_qsr(
        scalar_model(), supply_from_indices(PassivityIndices(rho=[0.5], nu=[-1.5]))
    )
    assert len(seen) == 1


# -------------------------------------------------------------------- files

def test_certificate_save_load_roundtrip(tmp_path):
    cert = certify_qsr(
        scalar_model(), supply_from_indices(PassivityIndices(rho=[0.5], nu=[-1.5]))
    )
    path = tmp_path / "cert.json"
    save_certificate(path, cert)
    loaded = load_certificate(path)
    np.testing.assert_array_equal(loaded.p, cert.p)
    np.testing.assert_array_equal(loaded.supply.q, cert.supply.q)
    np.testing.assert_array_equal(loaded.supply.s, cert.supply.s)
    np.testing.assert_array_equal(loaded.supply.r, cert.supply.r)
    assert loaded.lmi_residual == cert.lmi_residual


def test_tampered_certificate_file_is_rejected(tmp_path):
    cert = certify_qsr(
        scalar_model(), supply_from_indices(PassivityIndices(rho=[0.5], nu=[-1.5]))
    )
    path = tmp_path / "cert.json"
    save_certificate(path, cert)
    pristine = path.read_text()

    path.write_text(pristine.replace('"Q"', '"quux"'))
    with pytest.raises(ValidationError):
        load_certificate(path)

    # storage positivity is re-validated on load, not trusted from the file
    p_value = repr(float(cert.p[0, 0]))
    assert p_value in pristine
    path.write_text(pristine.replace(p_value, f"-{p_value}"))
    with pytest.raises(ValidationError):
        load_certificate(path)
