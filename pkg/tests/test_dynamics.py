import numpy as np
import pytest

from starklat import dynamics as dyn
from starklat import model
from starklat.model import ModelParams, PairPotential, Window


@pytest.fixture(scope="module")
def pair_setup():
    p = ModelParams(g=1.0, h=0.5, N=2, potential=PairPotential("nearest_neighbor", 1.0))
    w = Window(L=10, interior_margin=3)
    return p, w, model.build_hamiltonian(p, w, "position")


def spectral_propagate(op, psi0, t):
    dense = op.toarray()
    vals, vecs = np.linalg.eigh(dense)
    return vecs @ (np.exp(-1j * vals * t) * (vecs.T @ psi0))


def test_config_validation():
    with pytest.raises(ValueError):
        dyn.PropagatorConfig(t_max=-1.0, samples=10)
    with pytest.raises(ValueError):
        dyn.PropagatorConfig(t_max=1.0, samples=0)
    with pytest.raises(ValueError):
        dyn.PropagatorConfig(t_max=1.0, samples=10, tolerance=1e-6)


def test_gershgorin_encloses_spectrum(pair_setup):
    p, w, op = pair_setup
    lo, hi = dyn.gershgorin_bounds(op)
    vals = np.linalg.eigvalsh(op.toarray())
    assert lo < vals.min() and hi > vals.max()


def test_evolve_t0_identity(pair_setup):
    p, w, op = pair_setup
    psi0 = dyn.product_state(w, (0, 1))
    out = dyn.evolve(op, psi0, 0.0, dyn.PropagatorConfig(1.0, 1))
    assert np.array_equal(out, psi0.astype(complex))


def test_evolve_g0_pure_phase():
    p = ModelParams(g=0.0, h=0.5, N=1)
    w = Window(L=10, interior_margin=3)
    op = model.build_hamiltonian(p, w, "position")
    psi0 = np.full(w.n_sites, 1.0 / np.sqrt(w.n_sites))
    psi_t = dyn.evolve(op, psi0, 7.3, dyn.PropagatorConfig(10.0, 1))
    assert np.abs(np.abs(psi_t) - np.abs(psi0)).max() <= 1e-11


def test_evolve_matches_spectral_oracle():
    p = ModelParams(g=1.0, h=0.5, N=1)
    w = Window(L=40, interior_margin=10)
    op = model.build_hamiltonian(p, w, "position")
    psi0 = dyn.product_state(w, (0,))
    psi_t = dyn.evolve(op, psi0, 10.0, dyn.PropagatorConfig(10.0, 1))
    assert np.linalg.norm(psi_t - spectral_propagate(op, psi0, 10.0)) <= 1e-9


def test_evolve_group_property(pair_setup):
    p, w, op = pair_setup
    cfg = dyn.PropagatorConfig(10.0, 1)
    psi0 = dyn.product_state(w, (0, 1))
    one = dyn.evolve(op, psi0, 5.0, cfg)
    two = dyn.evolve(op, one, 5.0, cfg)
    direct = dyn.evolve(op, psi0, 10.0, cfg)
    assert np.linalg.norm(two - direct) <= 1e-10


def test_evolve_energy_conservation(pair_setup):
    p, w, op = pair_setup
    psi0 = dyn.product_state(w, (0, 1)).astype(complex)
    e0 = np.real(np.conj(psi0) @ (op.matrix @ psi0))
    psi_t = dyn.evolve(op, psi0, 50.0, dyn.PropagatorConfig(50.0, 1))
    e_t = np.real(np.conj(psi_t) @ (op.matrix @ psi_t))
    assert abs(e_t - e0) <= 1e-8


def test_evolve_rejects_unnormalized(pair_setup):
    p, w, op = pair_setup
    with pytest.raises(ValueError):
        dyn.evolve(op, 2.0 * dyn.product_state(w, (0, 1)), 1.0, dyn.PropagatorConfig(1.0, 1))


def test_density_product_state():
    w = Window(L=6, interior_margin=2)
    psi = dyn.product_state(w, (2, 5))
    rho = dyn.density(psi, w, 2)
    x = np.arange(-6, 7)
    want = (x == 2).astype(float) + (x == 5).astype(float)
    assert np.array_equal(rho, want)


def test_density_symmetrized_pair():
    w = Window(L=6, interior_margin=2)
    psi = dyn.symmetrized_pair(w, 0, 0)
    rho = dyn.density(psi, w, 2)
    assert rho[6] == pytest.approx(2.0)
    assert rho.sum() == pytest.approx(2.0)


def test_density_rejects_mismatch():
    with pytest.raises(ValueError):
        dyn.density(np.zeros(10), Window(L=6, interior_margin=2), 2)


def test_tail_trace_g0_constant():
    p = ModelParams(g=0.0, h=0.5, N=2)
    w = Window(L=8, interior_margin=2)
    op = model.build_hamiltonian(p, w, "position")
    psi0 = dyn.symmetrized_pair(w, 1, -2)
    tr = dyn.tail_trace(op, psi0, dyn.PropagatorConfig(5.0, 20), [0, 1, 3])
    for col in range(tr.radii.size):
        assert np.abs(tr.tails[:, col] - tr.tails[0, col]).max() <= 1e-11


def test_tail_trace_desk(pair_setup):
    p, w, op = pair_setup
    psi0 = dyn.product_state(w, (0, 1))
    cfg = dyn.PropagatorConfig(t_max=50.0, samples=200)
    tr = dyn.tail_trace(op, psi0, cfg, [2, 4, 6, 7])
    assert tr.norm_drift_max <= 1e-10
    assert np.all(np.abs(tr.densities.sum(axis=1) - 2.0) <= 1e-8)
    assert np.all(np.diff(tr.sup_tails) <= 1e-12)  # weakly decreasing in r


def test_tail_trace_rejects_boundary_state(pair_setup):
    p, w, op = pair_setup
    psi0 = dyn.product_state(w, (w.L, 0))
    with pytest.raises(ValueError):
        dyn.tail_trace(op, psi0, dyn.PropagatorConfig(1.0, 2), [2])


def test_grid_refinement_stable(pair_setup):
    # the sampled sup is a surrogate for sup over t; halving the step may only
    # refine it upward by the quadrature error of the tail curve, not jump
    p, w, op = pair_setup
    psi0 = dyn.product_state(w, (0, 1))
    coarse = dyn.tail_trace(op, psi0, dyn.PropagatorConfig(10.0, 40), [4])
    fine = dyn.tail_trace(op, psi0, dyn.PropagatorConfig(10.0, 80), [4])
    assert fine.sup_tails[0] >= coarse.sup_tails[0] - 1e-12
    assert abs(coarse.sup_tails[0] - fine.sup_tails[0]) <= 1e-2 * fine.sup_tails[0]
