"""Synchronous message-passing simulator.

Agents publish one payload per round and may read only what their neighbors
published. The simulator counts rounds, per-agent oracle calls and any
attempted read across a non-edge.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix

from .graph import Topology

ORACLE_KINDS = ("gradient", "conjugate")


class LocalityViolation(RuntimeError):
    """An agent tried to read a message from a non-neighbor."""


class PayloadError(ValueError):
    pass


@dataclass(frozen=True)
class RoundMessage:
    sender: int
    payload: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.payload)):
            raise PayloadError(f"non-finite payload from agent {self.sender}")


class Inbox:
    """What every agent received in one round.

    ``inbox[i]`` maps neighbor ids of ``i`` to their payloads. ``read(i, j)``
    is the checked accessor: reading a non-neighbor is recorded as a
    violation and raises.
    """

    def __init__(self, sim: "NetworkSim", payloads: np.ndarray):
        self._sim = sim
        self._payloads = payloads

    def __getitem__(self, i):
        return {j: self._payloads[j] for j in self._sim.topology.neighbors[i]}

    def __len__(self):
        return self._sim.topology.m

    def read(self, i, j):
        if not self._sim.topology.has_edge(i, j):
            self._sim.violation_count += 1
            raise LocalityViolation(f"agent {i} read from non-neighbor {j}")
        return self._payloads[j]

    def mix(self) -> np.ndarray:
        """Stacked ``deg(i) own_i - sum_j received_j`` for every agent."""
        sim = self._sim
        if sim.strict:
            return np.stack([
                weighted_neighbor_sum(sim, i, self._payloads[i], self[i])
                for i in range(sim.topology.m)
            ])
        return sim._lap @ self._payloads


class NetworkSim:
    """Round counter and message router for one run.

    Parameters
    ----------
    topology : Topology
    strict : bool
        Route every mixing step through per-agent ``weighted_neighbor_sum``
        over the neighbor inbox. The default uses an equivalent sparse
        Laplacian product built from the edge list.
    """

    def __init__(self, topology: Topology, strict: bool = False):
        self.topology = topology
        self.strict = strict
        m = topology.m
        rows, cols, vals = [], [], []
        for i, j in topology.edges:
            rows += [i, j]
            cols += [j, i]
            vals += [-1.0, -1.0]
        rows += list(range(m))
        cols += list(range(m))
        vals += topology.degrees.tolist()
        self._lap = csr_matrix((vals, (rows, cols)), shape=(m, m))
        self.reset()

    def reset(self):
        self.round_count = 0
        self.violation_count = 0
        m = self.topology.m
        self.oracle_call_counts = {k: np.zeros(m, dtype=np.int64) for k in ORACLE_KINDS}

    def exchange(self, payloads) -> Inbox:
        """Publish one payload per agent and advance the round counter."""
        payloads = np.asarray(payloads, dtype=float)
        if payloads.shape[0] != self.topology.m:
            raise PayloadError(
                f"expected {self.topology.m} payloads, got {payloads.shape[0]}"
            )
        if not np.all(np.isfinite(payloads)):
            rows = (~np.isfinite(payloads.reshape(payloads.shape[0], -1))).any(axis=1)
            bad = int(np.flatnonzero(rows)[0])
            raise PayloadError(f"non-finite payload from agent {bad}")
        self.round_count += 1
        return Inbox(self, payloads.copy())

    def record_oracle_call(self, i: int, kind: str, count: int = 1):
        if kind not in ORACLE_KINDS:
            raise ValueError(f"unknown oracle kind {kind!r}")
        self.oracle_call_counts[kind][i] += count

    def record_oracle_calls(self, kind: str, count: int = 1):
        """Every agent made ``count`` calls of ``kind`` (one vectorized step)."""
        if kind not in ORACLE_KINDS:
            raise ValueError(f"unknown oracle kind {kind!r}")
        self.oracle_call_counts[kind] += count

    def oracle_calls(self, i: int | None = None):
        """Total calls of agent ``i``, or the per-agent totals."""
        total = sum(self.oracle_call_counts.values())
        return total if i is None else int(total[i])

    @property
    def oracle_calls_max(self) -> int:
        return int(self.oracle_calls().max())


def exchange(sim: NetworkSim, payloads) -> Inbox:
    return sim.exchange(payloads)


def record_oracle_call(sim: NetworkSim, i: int, kind: str, count: int = 1):
    sim.record_oracle_call(i, kind, count)


def weighted_neighbor_sum(sim: NetworkSim, i: int, own, received: dict) -> np.ndarray:
    """Block ``i`` of ``W`` applied to the stacked payloads.

    ``received`` must hold a payload from every neighbor of ``i``; extra
    senders count as violations.
    """
    nbrs = sim.topology.neighbors[i]
    missing = [j for j in nbrs if j not in received]
    if missing:
        raise KeyError(f"agent {i} is missing payloads from {missing}")
    extra = [j for j in received if not sim.topology.has_edge(i, j)]
    if extra:
        sim.violation_count += len(extra)
        raise LocalityViolation(f"agent {i} received from non-neighbors {extra}")
    out = len(nbrs) * np.asarray(own, dtype=float)
    for j in nbrs:
        out = out - received[j]
    return out
