import numpy as np
import pytest

from vortexlab.errors import NumericalError
from vortexlab.kernels import wrap
from vortexlab.noise import NoisePaths, SeedTree, make_paths
from vortexlab.particles import (
    ParticleConfig,
    ParticleEnsemble,
    drift,
    drift_direct,
    interaction_potential,
    load_ensemble,
    min_pairwise_distance,
    run_particles,
    save_ensemble,
    singular_functional,
    step,
    trajectory_to_csv,
)
from vortexlab.sigma import SigmaField, StreamMode

CROSS = SigmaField(modes=(StreamMode(-1.0, (0, 1)), StreamMode(1.0, (1, 0))))


def random_ensemble(n, seed=0):
    rng = np.random.default_rng(seed)
    return ParticleEnsemble(rng.uniform(-np.pi, np.pi, (n, 2)), rng.uniform(0.5, 1.5, n))


def test_single_particle_zero_drift():
    e = ParticleEnsemble(np.array([[0.3, -0.2]]), np.ones(1))
    assert np.array_equal(drift(e, ParticleConfig()), np.zeros((1, 2)))


def test_two_particle_hand_value():
    e = ParticleEnsemble(np.array([[np.pi / 2, 0.0], [0.0, 0.0]]), np.ones(2))
    cfg = ParticleConfig(epsilon=0.01, M=1)
    u = drift(e, cfg)
    assert np.allclose(u[0], [0.0, 1.0], atol=1e-12)
    assert np.allclose(u[1], [0.0, -1.0], atol=1e-12)


def test_drift_matches_direct_summation():
    e = random_ensemble(40, seed=3)
    cfg = ParticleConfig(epsilon=0.15, M=12)
    assert np.max(np.abs(drift(e, cfg) - drift_direct(e, cfg))) < 1e-12


def test_drift_translation_equivariance():
    e = random_ensemble(12, seed=5)
    cfg = ParticleConfig(epsilon=0.1, M=8)
    shift = np.array([0.8, -1.1])
    e2 = ParticleEnsemble(wrap(e.positions + shift), e.intensities)
    assert np.allclose(drift(e, cfg), drift(e2, cfg), atol=1e-10)


def test_exchangeability():
    e = random_ensemble(15, seed=7)
    cfg = ParticleConfig(epsilon=0.1, M=8)
    perm = np.random.default_rng(1).permutation(15)
    e2 = ParticleEnsemble(e.positions[perm], e.intensities[perm])
    assert np.allclose(drift(e, cfg)[perm], drift(e2, cfg), atol=1e-12)


def test_step_constant_sigma_translation():
    e = random_ensemble(6, seed=2)
    sig = SigmaField(constant=(0.7, -0.3))
    dW = np.array([0.5])
    # zero drift contributions: single common move dominates when dt = 0-ish
    out = step(e, dW, np.zeros((6, 2)), 0.0, ParticleConfig(), [sig])
    assert np.allclose(out.positions, wrap(e.positions + np.array([0.35, -0.15])), atol=1e-12)


def test_step_stratonovich_correction_displacement():
    e = ParticleEnsemble(np.array([[np.pi / 2, 0.0]]), np.ones(1))
    dt = 1e-3
    out = step(e, np.zeros(1), np.zeros((1, 2)), dt, ParticleConfig(), [CROSS])
    disp = wrap(out.positions - e.positions)
    assert np.allclose(disp[0], [0.5 * dt, 0.0], atol=1e-15)


def test_step_nan_detection():
    e = ParticleEnsemble(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([np.nan, 1.0]))
    with pytest.raises(NumericalError):
        step(e, np.zeros(0), np.zeros((2, 2)), 1e-3, ParticleConfig(), [])


def test_min_pairwise_distance():
    e = ParticleEnsemble(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]]), np.ones(3))
    assert min_pairwise_distance(e) == pytest.approx(1.0)
    # wrap-around pair
    e2 = ParticleEnsemble(np.array([[np.pi - 0.05, 0.0], [-np.pi + 0.05, 0.0]]), np.ones(2))
    assert min_pairwise_distance(e2) == pytest.approx(0.1)


def test_interaction_potential_antipodes():
    e = ParticleEnsemble(np.array([[0.0, 0.0], [np.pi, np.pi]]), np.ones(2))
    assert interaction_potential(e, epsilon=0.1, M=1) == pytest.approx(-8.0)


def test_interaction_potential_matches_direct_sum():
    from vortexlab.kernels import KernelSpec, green_regularized

    e = random_ensemble(20, seed=9)
    eps, M = 0.3, 8
    spec = KernelSpec(M, eps)
    total = 0.0
    for i in range(20):
        for j in range(20):
            if i != j:
                total += green_regularized(wrap(e.positions[i] - e.positions[j]), spec)
    assert interaction_potential(e, eps, M) == pytest.approx(total, rel=1e-10)


def test_singular_functional_collinear():
    e = ParticleEnsemble(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), np.ones(3))
    # s = (1.5, 2, 1.5), q = (1.25, 2, 1.25): sum s^2 - q = 1 + 2 + 1
    assert singular_functional(e) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        singular_functional(ParticleEnsemble(np.zeros((2, 2)), np.ones(2)))


def test_run_particles_deterministic_and_snapshots():
    tree = SeedTree(12)
    grid = np.arange(11) * 1e-2
    paths = make_paths(tree, grid, 1, 8)
    e0 = random_ensemble(8, seed=4)
    cfg = ParticleConfig(epsilon=0.1, M=8)
    basis = [SigmaField(constant=(0.2, 0.1))]
    s1, d1 = run_particles(e0.copy(), paths, cfg, basis, [0.05, 0.1], diagnostics=True)
    s2, _ = run_particles(e0.copy(), paths, cfg, basis, [0.05, 0.1])
    assert len(s1) == 2
    assert s1[-1].t == pytest.approx(0.1)
    assert np.array_equal(s1[0].positions, s2[0].positions)
    assert np.array_equal(s1[1].positions, s2[1].positions)
    assert len(d1.t) == 2 and len(d1.min_dist) == 2


def test_intensities_frozen():
    tree = SeedTree(12)
    paths = make_paths(tree, np.arange(6) * 1e-2, 0, 5)
    e0 = random_ensemble(5, seed=1)
    snaps, _ = run_particles(e0, paths, ParticleConfig(epsilon=0.1, M=4), [], [0.05])
    assert np.array_equal(snaps[0].intensities, e0.intensities)


def test_ensemble_save_load_round_trip(tmp_path):
    e = random_ensemble(17, seed=6)
    e.t = 0.25
    p = tmp_path / "ens.bin"
    save_ensemble(e, p)
    g = load_ensemble(p)
    assert g.n == 17 and g.t == 0.25
    assert np.array_equal(g.positions, e.positions)
    assert np.array_equal(g.intensities, e.intensities)
    p2 = tmp_path / "ens2.bin"
    save_ensemble(g, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_trajectory_csv(tmp_path):
    e = random_ensemble(3, seed=8)
    path = tmp_path / "traj.csv"
    trajectory_to_csv([e], path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,i,x1,x2,xi"
    assert len(lines) == 4


def test_diagnostics_csv(tmp_path):
    tree = SeedTree(3)
    paths = make_paths(tree, np.arange(6) * 1e-2, 0, 6)
    e0 = random_ensemble(6, seed=3)
    _, diag = run_particles(e0, paths, ParticleConfig(epsilon=0.1, M=4), [], [0.05], diagnostics=True)
    path = tmp_path / "diag.csv"
    diag.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,min_dist,phi_eps,phi_singular"
    assert len(lines) == 2
