"""Clustering of hidden-node activations into a few discrete levels."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, categorical, input_matrix
from .network import Network, forward_batch, outputs_from_hidden

DEFAULT_GRID = tuple(round(0.05 * k, 2) for k in range(1, 21))
_EPS = 1e-12


@dataclass(frozen=True)
class Cluster:
    representative: float
    lo: float
    hi: float
    size: int = 0


def cluster_values(values, delta: float) -> list[Cluster]:
    """One-pass clustering of activation values.

    Values are scanned in ascending order; a value joins the open cluster
    while it lies within ``delta`` of that cluster's first member, otherwise
    it opens a new one. Representatives are member means.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    xs = np.sort(np.asarray(values, dtype=float).reshape(-1))
    clusters = []
    start = 0
    for i in range(1, xs.size + 1):
        if i == xs.size or xs[i] - xs[start] > delta + _EPS:
            members = xs[start:i]
            # float mean can drift an ulp outside the members
            rep = min(max(float(members.mean()), members[0]), members[-1])
            clusters.append(Cluster(float(rep), float(members[0]),
                                    float(members[-1]), int(members.size)))
            start = i
    return clusters


@dataclass(frozen=True)
class ClusterTable:
    clusters: tuple[tuple[Cluster, ...], ...]
    delta: float

    @property
    def node_count(self) -> int:
        return len(self.clusters)

    def assign(self, node: int, activation) -> np.ndarray:
        """Cluster index per activation: containing interval, else nearest representative."""
        a = np.atleast_1d(np.asarray(activation, dtype=float))
        cl = self.clusters[node]
        reps = np.array([c.representative for c in cl])
        out = np.argmin(np.abs(a[:, None] - reps[None, :]), axis=1)
        for k, c in enumerate(cl):
            out[(a >= c.lo) & (a <= c.hi)] = k
        return out

    def assign_all(self, hidden: np.ndarray) -> np.ndarray:
        return np.column_stack([self.assign(j, hidden[:, j]) for j in range(self.node_count)])

    def representatives(self, hidden: np.ndarray) -> np.ndarray:
        codes = self.assign_all(hidden)
        reps = np.empty_like(hidden, dtype=float)
        for j, cl in enumerate(self.clusters):
            reps[:, j] = np.array([c.representative for c in cl])[codes[:, j]]
        return reps

    def to_json(self) -> str:
        doc = {"delta": self.delta, "nodes": [
            [{"representative": c.representative, "interval": [c.lo, c.hi], "size": c.size}
             for c in cl] for cl in self.clusters]}
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ClusterTable":
        doc = json.loads(text)
        return cls(tuple(tuple(Cluster(c["representative"], c["interval"][0], c["interval"][1],
                                       c.get("size", 0)) for c in node)
                         for node in doc["nodes"]), doc["delta"])


def build_table(hidden: np.ndarray, delta: float) -> ClusterTable:
    return ClusterTable(tuple(tuple(cluster_values(hidden[:, j], delta))
                              for j in range(hidden.shape[1])), float(delta))


def discrete_predictions(net: Network, hidden: np.ndarray, table: ClusterTable) -> np.ndarray:
    return np.argmax(outputs_from_hidden(net, table.representatives(hidden)), axis=1)


def select_delta(net: Network, data: Dataset, grid=DEFAULT_GRID) -> ClusterTable:
    """Largest grid delta whose discretized network still classifies every
    training pattern as the continuous network does (smallest delta if none)."""
    grid = sorted(float(d) for d in grid)
    if not grid:
        raise ValueError("delta grid is empty")
    X, _ = input_matrix(data)
    hidden, out = forward_batch(net, X)
    reference = np.argmax(out, axis=1)
    for delta in reversed(grid):
        table = build_table(hidden, delta)
        if np.array_equal(discrete_predictions(net, hidden, table), reference):
            return table
    return build_table(hidden, grid[0])


def hidden_schema(table: ClusterTable):
    return tuple(categorical(f"H_{j + 1}", [str(k) for k in range(len(cl))])
                 for j, cl in enumerate(table.clusters))


def discretize_dataset(net: Network, data: Dataset, table: ClusterTable) -> Dataset:
    """Patterns re-described by hidden-node cluster indices.

    Attribute ``H_j`` holds the cluster index of hidden node ``j``; the
    label is the class the discretized network predicts, not the ground
    truth, since the resulting rules are meant to explain the network.
    """
    X, _ = input_matrix(data)
    hidden, _ = forward_batch(net, X)
    codes = table.assign_all(hidden)
    labels = discrete_predictions(net, hidden, table)
    return Dataset(hidden_schema(table), data.classes, codes, labels,
                   name=f"{data.name}:hidden" if data.name else "hidden")


def cluster_membership(net: Network, encoded: Dataset, table: ClusterTable, node: int) -> np.ndarray:
    X, _ = input_matrix(encoded)
    hidden, _ = forward_batch(net, X)
    return table.assign(node, hidden[:, node])

