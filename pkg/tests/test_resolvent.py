import numpy as np
import pytest

from starklat import model, resolvent as rsv, spectra
from starklat.model import ModelParams, PairPotential, Window
from starklat.spectra import ClusterDecomposition


@pytest.fixture(scope="module")
def pair_ws():
    p = ModelParams(g=1.0, h=0.5, N=2, potential=PairPotential("nearest_neighbor", 1.0))
    w = Window(L=10, interior_margin=3)
    return rsv.ResolventWorkspace(p, w)


def chain_of(*blocklists):
    return rsv.DecompositionChain(
        tuple(ClusterDecomposition(tuple(map(tuple, b))) for b in blocklists)
    )


def test_chain_validation():
    with pytest.raises(ValueError):
        chain_of([[1, 2], [3]], [[1, 2, 3]])  # must start at singletons
    with pytest.raises(ValueError):
        chain_of([[1], [2], [3]], [[1], [2], [3]])  # no coarsening
    c = chain_of([[1], [2], [3]], [[1, 2], [3]], [[1, 2, 3]])
    assert c.k_s == 1 and c.is_single_merge
    jump = chain_of([[1], [2], [3]], [[1, 2, 3]])
    assert jump.k_s == 1 and not jump.is_single_merge


def test_chain_counts():
    assert len(rsv.enumerate_chains(2, "connected_only")) == 1
    assert len(rsv.enumerate_chains(2, "all")) == 2
    all3 = rsv.enumerate_chains(3, "all")
    con3 = rsv.enumerate_chains(3, "connected_only")
    assert len(con3) == 4
    assert len(all3) - len(con3) == 4
    # deterministic order
    again = rsv.enumerate_chains(3, "all")
    assert [c.sequence for c in again] == [c.sequence for c in all3]


def test_coupling_n2_full_interaction(pair_ws):
    fine = ClusterDecomposition(((1,), (2,)))
    coarse = ClusterDecomposition(((1, 2),))
    v = rsv.inter_cluster_coupling(fine, coarse, pair_ws.params, pair_ws.window)
    full = model.build_interaction(pair_ws.params, pair_ws.window, "stark").toarray()
    assert np.array_equal(v, full)


def test_coupling_n3_steps():
    p = ModelParams(g=1.0, h=0.5, N=3, potential=PairPotential("nearest_neighbor", 1.0))
    w = Window(L=3, interior_margin=1)
    single = ClusterDecomposition(((1,), (2,), (3,)))
    mid = ClusterDecomposition(((1, 2), (3,)))
    full = ClusterDecomposition(((1, 2, 3),))
    v1 = rsv.inter_cluster_coupling(single, mid, p, w, "position")
    only12 = model.build_interaction(p, w, "position", pair_list=[(0, 1)]).toarray()
    assert np.array_equal(v1, only12)
    v2 = rsv.inter_cluster_coupling(mid, full, p, w, "position")
    rest = model.build_interaction(p, w, "position", pair_list=[(0, 2), (1, 2)]).toarray()
    assert np.array_equal(v2, rest)
    with pytest.raises(ValueError):
        rsv.inter_cluster_coupling(mid, mid, p, w)


def test_coupling_completeness():
    # couplings along any chain + intra terms of the endpoint rebuild V
    p = ModelParams(g=1.0, h=0.5, N=3, potential=PairPotential("nearest_neighbor", 1.0))
    w = Window(L=3, interior_margin=1)
    full_v = model.build_interaction(p, w, "position").toarray()
    h0 = model.build_h0(p, w, "position").toarray()
    for chain in rsv.enumerate_chains(3, "all"):
        acc = np.zeros_like(full_v)
        for a, b in zip(chain.sequence, chain.sequence[1:]):
            acc += rsv.inter_cluster_coupling(a, b, p, w, "position")
        end = chain.sequence[-1]
        intra = model.build_cluster_hamiltonian(p, w, end, "position").toarray() - h0
        assert np.abs(acc - intra).max() == 0.0
        if chain.k_s == 1:
            assert np.abs(acc - full_v).max() == 0.0


def test_operator_norm_against_svd():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((40, 40)) + 1j * rng.standard_normal((40, 40))
    exact = np.linalg.svd(a, compute_uv=False)[0]
    assert rsv.operator_norm(a) == pytest.approx(exact, rel=1e-3)
    assert rsv.operator_norm(np.zeros((5, 5))) == 0.0


def test_cluster_resolvent_diagonal(pair_ws):
    fine = ClusterDecomposition(((1,), (2,)))
    z = 8j
    g0 = pair_ws.resolvent(fine, z)
    h0 = model.build_h0(pair_ws.params, pair_ws.window, "stark").toarray()
    want = np.diag(1.0 / (z - np.diag(h0)))
    assert np.abs(g0 - want).max() <= 1e-14


def test_cluster_resolvent_norm_bound(pair_ws):
    full = ClusterDecomposition(((1, 2),))
    g = pair_ws.resolvent(full, 8j)
    assert rsv.operator_norm(g) <= 1.0 / 8.0 + 1e-6


def test_cluster_resolvent_rejects_near_spectrum(pair_ws):
    full = ClusterDecomposition(((1, 2),))
    evs = np.linalg.eigvalsh(pair_ws.hamiltonian(full))
    with pytest.raises(np.linalg.LinAlgError):
        rsv.ResolventWorkspace(pair_ws.params, pair_ws.window).resolvent(
            full, complex(evs[0]) + 1e-14
        )


def test_resolvent_cache_reused(pair_ws):
    ws = rsv.ResolventWorkspace(pair_ws.params, pair_ws.window)
    fine = ClusterDecomposition(((1,), (2,)))
    a = ws.resolvent(fine, 4j)
    b = ws.resolvent(fine, 4j)
    assert a is b


def test_build_I_n2_closed_form(pair_ws):
    z = 8j
    fine = ClusterDecomposition(((1,), (2,)))
    g0 = pair_ws.resolvent(fine, z)
    v = model.build_interaction(pair_ws.params, pair_ws.window, "stark").toarray()
    assert np.abs(rsv.build_I(z, pair_ws) - g0 @ v).max() <= 1e-14


def test_build_D_n2_is_g0(pair_ws):
    z = 8j
    fine = ClusterDecomposition(((1,), (2,)))
    assert np.abs(rsv.build_D(z, pair_ws) - pair_ws.resolvent(fine, z)).max() == 0.0


def test_norm_decay_ladder(pair_ws):
    v = model.build_interaction(pair_ws.params, pair_ws.window, "stark").toarray()
    vnorm = rsv.operator_norm(v.astype(complex))
    prev = np.inf
    for k in (2, 4, 8, 16, 32):
        y = k * vnorm
        val = rsv.operator_norm(rsv.build_I(1j * y, pair_ws))
        assert val <= vnorm / y + 1e-10
        assert val <= prev + 1e-12
        prev = val


def test_functional_equation_n2(pair_ws):
    r = rsv.functional_equation_residual(8j, pair_ws.params, pair_ws.window, pair_ws)
    assert r <= 1e-8


def test_functional_equation_real_midgap():
    p = ModelParams(g=1.0, h=0.5, N=2, potential=PairPotential("nearest_neighbor", 0.3))
    w = Window(L=10, interior_margin=3)
    r = rsv.functional_equation_residual(0.5 + 0j, p, w)
    assert r <= 1e-7


def test_functional_equation_n3():
    p = ModelParams(g=1.0, h=0.5, N=3, potential=PairPotential("nearest_neighbor", 1.0))
    w = Window(L=5, interior_margin=2)
    r = rsv.functional_equation_residual(12j, p, w)
    assert r <= 1e-6


def test_compactness_zero_potential():
    p = ModelParams(g=1.0, h=0.5, N=2, potential=PairPotential("tabulated", table={0: 0.0}))
    w = Window(L=6, interior_margin=2)
    ws = rsv.ResolventWorkspace(p, w)
    rep = rsv.compactness_proxy(rsv.build_I(8j, ws))
    assert rep.singular_values.max() <= 1e-14


def test_compactness_desk(pair_ws):
    rep = rsv.compactness_proxy(rsv.build_I(8j, pair_ws))
    assert rep.passed
    assert rep.k_drop is not None and rep.k_drop < rep.singular_values.size / 2
    s = rep.singular_values
    assert np.all(np.diff(s) <= 1e-12)


def test_fredholm_probe(pair_ws):
    p, w = pair_ws.params, pair_ws.window
    res = spectra.eigh(model.build_hamiltonian(p, w, "stark"))
    lam = res.eigenvalues[np.argmin(np.abs(res.eigenvalues - 0.367))]
    far = 16j
    pts = rsv.fredholm_probe([lam + 1e-4, 0.437, far], p, w, ws=pair_ws)
    assert pts[0].flagged
    assert abs(pts[0].z.real - pts[0].nearest_h_eigenvalue) <= 1e-2
    assert not pts[1].flagged
    assert not pts[2].flagged and pts[2].nearest_h_eigenvalue is None
