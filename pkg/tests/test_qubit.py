import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from brachistochrone.errors import DensityTooLow, TargetUnreachable
from brachistochrone.hilbert import (
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    bloch_vector,
    energy_variance,
    fubini_study_distance,
    pure_state,
    ray_equal,
)
from brachistochrone.propagator import HamiltonianSchedule, evolve, geodesic_residual
from brachistochrone.qubit import (
    ANTIPODE_STATE,
    INITIAL_STATE,
    BlochSample,
    QubitFamily,
    bloch_components,
    bloch_trajectory,
    count_nodes,
    enumerate_families,
    field_profile,
    frame_rotation,
    global_optimum,
    hamiltonian,
    node_times,
    qubit_state,
    qubit_trajectory,
    scan_arrival,
    variance_profile,
)

PAIRS_L5 = [(k, l) for l in range(1, 6) for k in range(l) if (k + l) % 2 == 1]


def oracle_states(family, times):
    """Direct Schrodinger integration with the rotating field written out by hand."""
    w, Om = family.omega, family.Omega

    def rhs(t, y):
        h = -w * (np.sin(2 * Om * t) * SIGMA_X + np.cos(2 * Om * t) * SIGMA_Y)
        return -1j * (h @ y)

    sol = solve_ivp(rhs, (0, times[-1]), INITIAL_STATE.astype(complex), method="DOP853",
                    rtol=1e-12, atol=1e-13, t_eval=times)
    return sol.y.T


def sigma_of(states):
    return np.array([bloch_vector(s / np.linalg.norm(s)) for s in states])


# -- family table ---------------------------------------------------------

def test_family_table_leading_entries():
    fams = enumerate_families(1.0, 3)
    assert [(f.k, f.l) for f in fams] == [(0, 1), (1, 2), (2, 3)]
    expected = [(np.pi / 2, 0.0), (np.pi / 2 * np.sqrt(3), 1 / np.sqrt(3)),
                (np.pi / 2 * np.sqrt(5), 2 / np.sqrt(5))]
    for f, (wT, ratio) in zip(fams, expected):
        assert abs(f.omega * f.T - wT) < 1e-12
        assert abs(abs(f.Omega / f.omega) - ratio) < 1e-12


def test_single_family_and_parity():
    fams = enumerate_families(2.0, 1)
    assert len(fams) == 1 and (fams[0].k, fams[0].l) == (0, 1)
    assert abs(fams[0].T - np.pi / 4) < 1e-15
    with pytest.raises(ValueError):
        enumerate_families(1.0, 0)
    with pytest.raises(ValueError):
        QubitFamily(1, 1, 1.0)
    with pytest.raises(ValueError):
        QubitFamily(2, 1, 1.0)
    with pytest.raises(ValueError):
        QubitFamily(0, 1, -1.0)


def test_enumeration_skips_retracing_multiples():
    fams = enumerate_families(1.0, 9)
    assert all(math.gcd(f.k, f.l) == 1 for f in fams)
    assert (0, 3) not in [(f.k, f.l) for f in fams]
    # (0, 3) would pass the antipode already at a third of its duration
    retrace = QubitFamily(0, 3, 1.0)
    assert np.allclose(bloch_components(retrace, retrace.T / 3), [-1, 0, 0], atol=1e-12)
    times = [f.T for f in fams]
    assert times == sorted(times)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.floats(0.1, 10.0), st.sampled_from([1, -1]))
def test_family_invariants(l, omega, orientation):
    for k in range(l - 1, -1, -2):
        f = QubitFamily(k, l, omega, orientation)
        assert abs(2 * abs(f.Omega) * f.T / np.pi - k) < 1e-12 * l
        assert abs(2 * f.OmegaPrime * f.T / np.pi - l) < 1e-12 * l
        assert abs(abs(f.Omega / f.omega) - k / np.sqrt(l * l - k * k)) < 1e-12
        assert abs(f.omega * f.T - np.pi / 2 * np.sqrt(l * l - k * k)) < 1e-12 * l
        if k >= 1:
            assert f.T > QubitFamily(0, 1, omega).T


# -- closed forms -----------------------------------------------------------

def test_bloch_trajectory_endpoints_and_great_circle():
    for f in enumerate_families(1.0, 5):
        bt = bloch_trajectory(f, 101)
        assert np.allclose(bt.sigma[0], [1, 0, 0], atol=1e-15)
        assert np.max(np.abs(bt.sigma[-1] - [-1, 0, 0])) < 1e-9
        assert np.max(np.abs(np.linalg.norm(bt.sigma, axis=1) - 1)) < 1e-10
        assert np.all(bt.B[:, 2] == 0.0)
        assert isinstance(bt[3], BlochSample)
    f01 = QubitFamily(0, 1, 1.3)
    assert np.allclose(bloch_components(f01, f01.T / 2), [0, 0, 1], atol=1e-15)
    assert np.allclose(bloch_trajectory(f01, 50).sigma[:, 1], 0, atol=1e-15)


@pytest.mark.parametrize("kl", PAIRS_L5)
def test_bloch_matches_integrated_state(kl):
    f = QubitFamily(*kl, 1.0)
    bt = bloch_trajectory(f, 201)
    assert np.max(np.abs(sigma_of(oracle_states(f, bt.t)) - bt.sigma)) < 1e-7
    f_m = f.mirrored()
    assert np.max(np.abs(sigma_of(oracle_states(f_m, bt.t)) - bloch_trajectory(f_m, 201).sigma)) < 1e-7


def test_closed_form_state_matches_package_propagation():
    f = QubitFamily(1, 2, 0.8)
    traj = evolve(HamiltonianSchedule(lambda t: hamiltonian(f, min(t, f.T)), f.T), INITIAL_STATE, 2000)
    closed = np.array([qubit_state(f, t) for t in traj.times])
    assert np.max(np.abs(closed - traj.states)) < 1e-8
    assert ray_equal(traj.states[-1], ANTIPODE_STATE, tol=1e-8)


def test_field_profile_examples():
    for f in enumerate_families(1.7, 4):
        assert np.allclose(field_profile(f, 0.0), [0, 1.7, 0])
        assert np.allclose(hamiltonian(f, 0.0), -1.7 * SIGMA_Y)
        ts = np.linspace(0, f.T, 17)
        assert np.allclose(np.linalg.norm(field_profile(f, ts), axis=1), 1.7)
    f01 = QubitFamily(0, 1, 1.0)
    assert np.allclose(field_profile(f01, np.linspace(0, f01.T, 9)), [0, 1, 0])
    f12 = QubitFamily(1, 2, 1.0)
    b0, b1 = field_profile(f12, 0.0), field_profile(f12, f12.T)
    angle = np.arccos(np.clip(b0 @ b1, -1, 1))
    assert abs(angle - (2 * abs(f12.Omega) * f12.T) % (2 * np.pi)) < 1e-12
    assert abs(angle - np.pi) < 1e-12
    with pytest.raises(ValueError):
        field_profile(f12, f12.T * 1.1)


def test_variance_profile_examples():
    f01 = QubitFamily(0, 1, 1.2)
    assert np.allclose(variance_profile(f01, np.linspace(0, f01.T, 33)), 1.2, atol=1e-15)
    f12 = QubitFamily(1, 2, 1.0)
    tmin = np.pi / (4 * f12.OmegaPrime)
    assert abs(variance_profile(f12, tmin) - f12.omega**2 / f12.OmegaPrime) < 1e-12
    for f in enumerate_families(1.0, 4):
        assert variance_profile(f, 0.0) == f.omega


@pytest.mark.parametrize("kl", [(0, 1), (1, 2), (2, 3), (1, 4)])
def test_variance_profile_matches_evolved_state(kl):
    f = QubitFamily(*kl, 1.0)
    traj = evolve(HamiltonianSchedule(lambda t: hamiltonian(f, min(t, f.T)), f.T), INITIAL_STATE, 2000)
    spread = np.sqrt([energy_variance(h, s) for _, s, h in traj])
    assert np.max(np.abs(spread - variance_profile(f, traj.times))) < 1e-7
    if f.k >= 1:
        assert abs(spread.min() - f.omega**2 / f.OmegaPrime) < 1e-6
    else:
        assert np.max(np.abs(spread - f.omega)) < 1e-7


def test_geodesic_only_without_rotation():
    for f in enumerate_families(1.0, 4):
        r = geodesic_residual(qubit_trajectory(f, 2000))
        assert (r < 1e-4) == (f.k == 0)


# -- nodes --------------------------------------------------------------------

def test_node_counts_match_family_index():
    for f, nodes in zip(enumerate_families(1.0, 3), (0, 1, 2)):
        assert count_nodes(bloch_trajectory(f, 64 * (f.l + 1))) == nodes
        assert count_nodes(list(bloch_trajectory(f, 500))) == nodes


def test_node_times_are_sine_roots():
    for f in enumerate_families(1.0, 5):
        roots = node_times(f)
        expected = np.arange(1, f.l) * np.pi / (2 * f.OmegaPrime)
        assert roots.size == f.l - 1
        assert np.max(np.abs(roots - expected), initial=0.0) < 1e-10


def test_nodes_on_grid_points_count_once():
    f = QubitFamily(1, 2, 1.0)
    # 3 samples put the single node exactly on the middle grid point
    bt = bloch_trajectory(f, 2001)
    assert abs(bt.sigma[1000, 2]) < 1e-9
    assert count_nodes(bt) == 1


def test_sparse_sampling_is_rejected():
    f = QubitFamily(2, 3, 1.0)
    with pytest.raises(DensityTooLow):
        count_nodes(bloch_trajectory(f, 5))


# -- global optimum ---------------------------------------------------------

def test_antipodal_target_prefers_nodeless_family():
    fams = enumerate_families(1.0, 5)
    best = global_optimum(fams, ANTIPODE_STATE)
    assert (best.k, best.l) == (0, 1)
    assert abs(best.duration - np.pi / 2) < 1e-12


def test_node_target_truncates_second_family():
    f12 = QubitFamily(1, 2, 1.0)
    t_node = node_times(f12)[0]
    target = qubit_state(f12, t_node)
    best = global_optimum(enumerate_families(1.0, 3), target)
    assert (best.k, best.l) == (1, 2)
    assert abs(best.duration - t_node) < 1e-9
    assert best.duration < f12.T
    # truncated trajectory ends on the node
    assert ray_equal(qubit_trajectory(best, 400).states[-1], target, tol=1e-8)


def test_start_ray_target_is_trivial():
    best = global_optimum(enumerate_families(1.0, 3), np.exp(0.4j) * INITIAL_STATE)
    assert best.duration == 0.0


def test_unreachable_target():
    with pytest.raises(TargetUnreachable):
        global_optimum(enumerate_families(1.0, 3), pure_state([1.0, 0.3j]))
    with pytest.raises(ValueError):
        global_optimum([], ANTIPODE_STATE)


def test_other_equatorial_start_is_rotated():
    phi = 0.9
    start = pure_state([1.0, np.exp(1j * phi)])
    goal = pure_state([1.0, -np.exp(1j * phi)])
    best = global_optimum(enumerate_families(1.0, 3), goal, initial=start)
    assert (best.k, best.l) == (0, 1)
    r = frame_rotation(start)
    assert ray_equal(r @ INITIAL_STATE, start)
    assert ray_equal(r @ qubit_state(best, best.duration), goal, tol=1e-8)


def test_scan_arrival_respects_isotropic_bound():
    for target in (pure_state([np.cos(0.3), np.sin(0.3) * np.exp(1.1j)]),
                   pure_state([1.0, 0.4 + 0.7j])):
        sol = scan_arrival(target, 1.0, max_rate=2.0, grid=161)
        assert sol.duration >= fubini_study_distance(INITIAL_STATE, target) - 1e-9
        s = sol.bloch(sol.duration)
        assert 0.5 * (1 - s @ bloch_vector(target)) < 1e-8
