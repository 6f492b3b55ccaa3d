"""Communication graphs, Laplacians and spectral quantities.

The Kronecker lift ``W = Wbar (x) I_n`` is never formed: stacked vectors are
handled as ``(m, n)`` arrays and ``W x`` is computed as ``Wbar @ X``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

GRAPH_KINDS = ("cycle", "path", "star", "complete", "erdos_renyi")

#: eigenvalues below ``ZERO_EIG_TOL * lambda_max`` count as zero
ZERO_EIG_TOL = 1e-9


class GraphError(ValueError):
    """Invalid or disconnected communication graph."""


@dataclass(frozen=True)
class Topology:
    """Undirected, connected graph on nodes ``0..m-1``.

    Edges are stored as sorted ``(i, j)`` pairs with ``i < j``.
    """

    m: int
    edges: tuple[tuple[int, int], ...]
    neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)
    _edge_set: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.m < 2:
            raise GraphError(f"need at least 2 nodes, got m={self.m}")
        normalized = set()
        for i, j in self.edges:
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (0 <= i < self.m and 0 <= j < self.m):
                raise GraphError(f"edge ({i}, {j}) out of range for m={self.m}")
            normalized.add((min(i, j), max(i, j)))
        edges = tuple(sorted(normalized))
        nbrs = [[] for _ in range(self.m)]
        for i, j in edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "neighbors", tuple(tuple(sorted(a)) for a in nbrs))
        object.__setattr__(self, "_edge_set", frozenset(edges))
        if not _is_connected(self.m, edges):
            raise GraphError("graph is not connected")

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbors], dtype=float)

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._edge_set


def _is_connected(m, edges):
    if not edges:
        return m == 1
    rows, cols = np.array(edges).T
    adj = csr_matrix((np.ones(len(edges)), (rows, cols)), shape=(m, m))
    n_comp, _ = connected_components(adj, directed=False)
    return n_comp == 1


def build_graph(kind: str, m: int, edge_prob: float | None = None, seed: int = 0) -> Topology:
    """Build a connected graph of the named family.

    Parameters
    ----------
    kind : {"cycle", "path", "star", "complete", "erdos_renyi"}
    m : int
        Number of nodes, at least 2.
    edge_prob : float, optional
        Edge probability in (0, 1], required for ``erdos_renyi``.
    seed : int
        Seed for ``erdos_renyi``. A disconnected draw is discarded and the
        whole graph is redrawn with ``seed + 1``, ``seed + 2``, ...

    Returns
    -------
    Topology
    """
    if m < 2:
        raise GraphError(f"need at least 2 nodes, got m={m}")
    if kind == "cycle":
        edges = [(i, (i + 1) % m) for i in range(m)]
    elif kind == "path":
        edges = [(i, i + 1) for i in range(m - 1)]
    elif kind == "star":
        edges = [(0, i) for i in range(1, m)]
    elif kind == "complete":
        edges = [(i, j) for i in range(m) for j in range(i + 1, m)]
    elif kind == "erdos_renyi":
        if edge_prob is None:
            raise GraphError("erdos_renyi needs edge_prob")
        if not 0.0 < edge_prob <= 1.0:
            raise GraphError(f"edge_prob must lie in (0, 1], got {edge_prob}")
        iu, ju = np.triu_indices(m, k=1)
        s = seed
        while True:
            rng = np.random.default_rng(s)
            keep = rng.random(iu.size) < edge_prob
            edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
            if _is_connected(m, edges):
                break
            s += 1
    else:
        raise GraphError(f"unknown graph kind {kind!r}; expected one of {GRAPH_KINDS}")
    return Topology(m, tuple(edges))


def laplacian(t: Topology) -> np.ndarray:
    """Dense graph Laplacian: degrees on the diagonal, -1 per edge."""
    w = np.zeros((t.m, t.m))
    for i, j in t.edges:
        w[i, j] = w[j, i] = -1.0
    w[np.diag_indices(t.m)] = t.degrees
    return w


@dataclass(frozen=True)
class SpectralSummary:
    lambda_max: float
    lambda_min_plus: float

    @property
    def chi(self) -> float:
        """Laplacian condition number ``lambda_max / lambda_min_plus``."""
        return self.lambda_max / self.lambda_min_plus


def spectral_summary(w: np.ndarray) -> SpectralSummary:
    eig = np.linalg.eigvalsh(w)
    lam_max = float(eig[-1])
    if lam_max <= 0:
        raise GraphError("Laplacian has no positive eigenvalue")
    zero = eig < ZERO_EIG_TOL * lam_max
    if zero.sum() > 1:
        raise GraphError(
            f"{int(zero.sum())} zero eigenvalues: graph is disconnected"
        )
    return SpectralSummary(lam_max, float(eig[~zero][0]))


def sqrt_laplacian(w: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root of ``w`` by spectral decomposition.

    Only for oracles and certification; the distributed algorithms never
    touch it since its sparsity pattern does not follow the graph.
    """
    eig, vec = np.linalg.eigh(w)
    s = (vec * _sqrt_spectrum(eig)) @ vec.T
    return 0.5 * (s + s.T)


def sqrt_laplacian_pinv(w: np.ndarray) -> np.ndarray:
    """Pseudo-inverse of :func:`sqrt_laplacian` with the same kernel cutoff."""
    eig, vec = np.linalg.eigh(w)
    root = _sqrt_spectrum(eig)
    inv = np.divide(1.0, root, out=np.zeros_like(root), where=root > 0)
    s = (vec * inv) @ vec.T
    return 0.5 * (s + s.T)


def _sqrt_spectrum(eig):
    # round-off around the kernel would otherwise survive the square root
    keep = eig >= ZERO_EIG_TOL * max(float(eig[-1]), 0.0)
    return np.where(keep & (eig > 0), np.sqrt(np.clip(eig, 0.0, None)), 0.0)


def as_blocks(x, m: int) -> np.ndarray:
    """View a stacked vector of ``m`` blocks as an ``(m, n)`` array."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        if x.shape[0] != m:
            raise ValueError(f"expected {m} blocks, got array of shape {x.shape}")
        return x
    if x.ndim != 1 or x.size % m:
        raise ValueError(f"vector of size {x.size} does not split into {m} blocks")
    return x.reshape(m, -1)


def laplacian_apply(w: np.ndarray, x) -> np.ndarray:
    """``(Wbar (x) I_n) x`` for stacked ``x``, returned in block form."""
    return w @ as_blocks(x, w.shape[0])


def consensus_residual(x, w: np.ndarray) -> float:
    """Consensus violation ``sqrt(x^T W x) = ||sqrt(W) x||_2``.

    Evaluated as ``sum over edges of w_ij-weighted ||x_i - x_j||^2``, which
    equals the quadratic form for zero-row-sum ``w`` and does not cancel
    catastrophically near consensus.
    """
    xb = as_blocks(x, w.shape[0])
    iu, ju = np.nonzero(np.triu(w, 1))
    d = xb[iu] - xb[ju]
    return float(np.sqrt(np.sum(-w[iu, ju][:, None] * d * d)))
