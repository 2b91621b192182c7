"""Cluster-expansion resolvent algebra: chains, I(z), D(z), functional equation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .model import ModelParams, Window, build_cluster_hamiltonian, build_interaction
from .spectra import ClusterDecomposition, enumerate_set_partitions

RESIDUAL_TOL = 1e-10
COND_CAP = 1e12
POWER_STEPS = 30


@dataclass(frozen=True)
class DecompositionChain:
    """Strictly coarsening sequence of partitions, starting from all singletons."""

    sequence: tuple

    def __post_init__(self):
        if not self.sequence:
            raise ValueError("empty chain")
        first = self.sequence[0]
        if first.n_blocks != first.n_particles:
            raise ValueError("chains must start at the all-singletons partition")
        for a, b in zip(self.sequence, self.sequence[1:]):
            if not b.is_coarser_than(a):
                raise ValueError("chain steps must strictly coarsen")

    @property
    def k_s(self) -> int:
        return self.sequence[-1].n_blocks

    @property
    def is_single_merge(self) -> bool:
        """Block count drops by exactly one at every step."""
        return all(
            a.n_blocks - b.n_blocks == 1
            for a, b in zip(self.sequence, self.sequence[1:])
        )


def enumerate_chains(n: int, terminal: str = "all") -> list:
    """Every strictly coarsening chain from the singleton partition.

    terminal = "connected_only" keeps chains ending in a single block (these
    index I(z)); "all" returns the rest too (k_s >= 2 chains index D(z)).
    """
    if n > 5:
        raise ValueError("chain enumeration limited to N <= 5")
    if terminal not in ("all", "connected_only"):
        raise ValueError(f"unknown terminal mode {terminal!r}")
    parts = enumerate_set_partitions(n)
    start = ClusterDecomposition(tuple((i,) for i in range(1, n + 1)))

    def extend(chain):
        yield chain
        for p in parts:
            if p.is_coarser_than(chain[-1]):
                yield from extend(chain + (p,))

    chains = [DecompositionChain(c) for c in extend((start,))]
    if terminal == "connected_only":
        chains = [c for c in chains if c.k_s == 1]
    chains.sort(key=lambda c: (len(c.sequence), tuple(d.canonical() for d in c.sequence)))
    return chains


def inter_cluster_coupling(
    d_fine: ClusterDecomposition,
    d_coarse: ClusterDecomposition,
    params: ModelParams,
    window: Window,
    basis: str = "stark",
) -> np.ndarray:
    """Sum of V_alpha over pairs joined by the coarsening step."""
    if not d_coarse.is_coarser_than(d_fine):
        raise ValueError("partitions are not strictly comparable")

    def intra(dec):
        out = set()
        for b in dec.blocks:
            bs = sorted(b)
            for i in range(len(bs)):
                for j in range(i + 1, len(bs)):
                    out.add((bs[i] - 1, bs[j] - 1))
        return out

    new_pairs = sorted(intra(d_coarse) - intra(d_fine))
    return build_interaction(params, window, basis, pair_list=new_pairs).toarray()


def operator_norm(a: np.ndarray) -> float:
    """2-norm estimate: power iteration on A*A from the all-ones vector."""
    v = np.ones(a.shape[1], dtype=complex)
    v /= np.linalg.norm(v)
    ah = a.conj().T
    est = 0.0
    for _ in range(POWER_STEPS):
        v = ah @ (a @ v)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return 0.0
        est, v = np.sqrt(nv), v / nv
    return float(est)


@dataclass
class ResolventWorkspace:
    """Shared dense factor cache keyed by (partition, z)."""

    params: ModelParams
    window: Window
    basis: str = "stark"
    cache: dict = field(default_factory=dict)

    def hamiltonian(self, dec: ClusterDecomposition) -> np.ndarray:
        key = ("H", dec.canonical())
        if key not in self.cache:
            self.cache[key] = build_cluster_hamiltonian(
                self.params, self.window, dec, self.basis
            ).toarray()
        return self.cache[key]

    def resolvent(self, dec: ClusterDecomposition, z: complex) -> np.ndarray:
        key = ("G", dec.canonical(), complex(z))
        if key in self.cache:
            return self.cache[key]
        h = self.hamiltonian(dec)
        dim = h.shape[0]
        a = z * np.eye(dim) - h
        g = np.linalg.solve(a, np.eye(dim, dtype=complex))
        norm_g = operator_norm(g)
        if norm_g > COND_CAP:
            raise np.linalg.LinAlgError(
                f"z within ~{1.0 / norm_g:.2e} of the truncated spectrum of H_D"
            )
        resid = np.abs(a @ g - np.eye(dim)).max()
        if resid > RESIDUAL_TOL:
            raise np.linalg.LinAlgError(f"resolvent solve residual {resid:.2e}")
        self.cache[key] = g
        return g


def chain_product(
    chain: DecompositionChain,
    z: complex,
    ws: ResolventWorkspace,
    trailing_resolvent: bool,
) -> np.ndarray:
    """G_{D_N} V_{D_N,D_{N-1}} ... , with or without the final G_{D_k}."""
    seq = chain.sequence
    out = ws.resolvent(seq[0], z)
    for a, b in zip(seq, seq[1:]):
        v = inter_cluster_coupling(a, b, ws.params, ws.window, ws.basis)
        out = out @ v
        if b is not seq[-1] or trailing_resolvent:
            out = out @ ws.resolvent(b, z)
    return out


def _expansion_chains(n: int, k_s_one: bool) -> list:
    # the resummation telescopes exactly over one-merge-per-step chains;
    # admitting coarser jumps double-counts graphs and breaks G = D + I G
    chains = [c for c in enumerate_chains(n, "all") if c.is_single_merge]
    if k_s_one:
        return [c for c in chains if c.k_s == 1]
    return [c for c in chains if c.k_s >= 2]


def build_I(z: complex, ws: ResolventWorkspace) -> np.ndarray:
    """I(z): sum over connected chains, no trailing resolvent."""
    n = ws.params.N
    if n < 2:
        raise ValueError("the expansion needs N >= 2")
    chains = _expansion_chains(n, k_s_one=True)
    dim = ws.window.n_sites**n
    out = np.zeros((dim, dim), dtype=complex)
    for c in chains:
        out += chain_product(c, z, ws, trailing_resolvent=False)
    return out


def build_D(z: complex, ws: ResolventWorkspace) -> np.ndarray:
    """D(z): sum over k_s >= 2 chains, each ending in its cluster resolvent."""
    n = ws.params.N
    chains = _expansion_chains(n, k_s_one=False)
    dim = ws.window.n_sites**n
    out = np.zeros((dim, dim), dtype=complex)
    for c in chains:
        out += chain_product(c, z, ws, trailing_resolvent=True)
    return out


def full_resolvent(z: complex, ws: ResolventWorkspace) -> np.ndarray:
    full = ClusterDecomposition((tuple(range(1, ws.params.N + 1)),))
    return ws.resolvent(full, z)


def functional_equation_residual(
    z: complex, params: ModelParams, window: Window, ws: Optional[ResolventWorkspace] = None
) -> float:
    """||G - D - I G|| at truncation; solver-level for valid z."""
    ws = ws or ResolventWorkspace(params, window)
    g = full_resolvent(z, ws)
    d = build_D(z, ws)
    i = build_I(z, ws)
    return operator_norm(g - d - i @ g)


@dataclass
class CompactnessReport:
    singular_values: np.ndarray
    k_drop: Optional[int]
    passed: bool


def compactness_proxy(i_matrix: np.ndarray, rel_tol: float = 1e-6) -> CompactnessReport:
    """Singular value decay of I(z) as the finite-size compactness witness."""
    s = np.linalg.svd(i_matrix, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return CompactnessReport(s, 0, True)
    below = np.nonzero(s <= rel_tol * s[0])[0]
    k = int(below[0]) if below.size else None
    passed = k is not None and k < s.size / 2
    return CompactnessReport(s, k, passed)


@dataclass
class FredholmPoint:
    z: complex
    nearest_to_one: complex
    proximity: float
    flagged: bool
    nearest_h_eigenvalue: Optional[float]


def fredholm_probe(
    z_grid: list,
    params: ModelParams,
    window: Window,
    threshold: float = 1e-3,
    ws: Optional[ResolventWorkspace] = None,
) -> list:
    """Locate z with 1 in the spectrum of I(z); flags should track eigenvalues of H."""
    ws = ws or ResolventWorkspace(params, window)
    h = ws.hamiltonian(ClusterDecomposition((tuple(range(1, params.N + 1)),)))
    h_eigs = np.linalg.eigvalsh(h)
    out = []
    for z in z_grid:
        i_mat = build_I(complex(z), ws)
        eigs = np.linalg.eigvals(i_mat)
        j = int(np.argmin(np.abs(eigs - 1.0)))
        prox = float(np.abs(eigs[j] - 1.0))
        flagged = prox < threshold
        nearest_h = None
        if np.imag(z) == 0.0:
            nearest_h = float(h_eigs[np.argmin(np.abs(h_eigs - np.real(z)))])
        out.append(FredholmPoint(complex(z), complex(eigs[j]), prox, flagged, nearest_h))
    return out
