"""Sticky traffic routing between a cluster's baseline and its clone groups.

Assignment is a pure function of (salt, user_id): the unit-interval hash is
compared against cumulative weights in table order, so a user lands in the
same group for every request of a run and across replays. The vectorized
path must agree with the scalar path bit for bit; a property test holds the
two together.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .hashing import hash_unit, hash_unit_many

GROUP_KINDS = ("baseline", "control", "experiment")
WEIGHT_EPS = 1e-9


@dataclass(frozen=True)
class GroupEntry:
    group: str
    kind: str
    weight: float

    def __post_init__(self):
        if self.kind not in GROUP_KINDS:
            raise ValueError(f"unknown group kind {self.kind!r}")
        if self.weight < 0:
            raise ValueError(f"{self.group}: weight must be >= 0")


@dataclass(frozen=True)
class RoutingTable:
    cluster: str
    experiment_id: Optional[str]
    entries: tuple[GroupEntry, ...]
    salt: str = ""

    def __post_init__(self):
        if not self.entries:
            raise ValueError(f"{self.cluster}: routing table needs entries")
        total = sum(e.weight for e in self.entries)
        if abs(total - 1.0) > WEIGHT_EPS:
            raise ValueError(f"{self.cluster}: weights sum to {total}, expected 1")
        names = [e.group for e in self.entries]
        if len(set(names)) != len(names):
            raise ValueError(f"{self.cluster}: duplicate group names")
        if not self.salt:
            object.__setattr__(self, "salt", f"{self.experiment_id or 'base'}:{self.cluster}")

    def cumulative(self) -> list[float]:
        acc, out = 0.0, []
        for e in self.entries:
            acc += e.weight
            out.append(acc)
        out[-1] = 1.0  # guard the last edge against float drift
        return out

    def assign(self, user_id: int) -> GroupEntry:
        u = hash_unit(self.salt, user_id)
        for edge, entry in zip(self.cumulative(), self.entries):
            if u < edge:
                return entry
        return self.entries[-1]

    def assign_many(self, user_ids: np.ndarray) -> np.ndarray:
        """Entry index per user; exact vector twin of assign()."""
        u = hash_unit_many(self.salt, user_ids)
        cum = np.asarray(self.cumulative(), dtype=np.float64)
        return np.searchsorted(cum, u, side="right")


def diversion_table(cluster: str, experiment_id: str, fraction: float) -> RoutingTable:
    """The canonical three-way split: the baseline keeps 1-f of traffic and
    the two identically sized clone groups get f/2 each.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"diverted fraction must be in (0,1), got {fraction}")
    return RoutingTable(
        cluster=cluster,
        experiment_id=experiment_id,
        entries=(
            GroupEntry(cluster, "baseline", 1.0 - fraction),
            GroupEntry(f"{cluster}-chap-control", "control", fraction / 2.0),
            GroupEntry(f"{cluster}-chap-experiment", "experiment", fraction / 2.0),
        ),
    )


class Router:
    """Per-cluster routing tables plus assignment counts for conservation checks."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._tables: dict[str, RoutingTable] = {}
        self.assignment_counts: dict[tuple[str, str], int] = {}

    def install(self, table: RoutingTable) -> None:
        with self._lock:
            self._tables[table.cluster] = table

    def uninstall(self, cluster: str) -> None:
        with self._lock:
            self._tables.pop(cluster, None)

    def table_for(self, cluster: str) -> Optional[RoutingTable]:
        with self._lock:
            return self._tables.get(cluster)

    def diverted_clusters(self) -> list[str]:
        with self._lock:
            return sorted(self._tables)

    def assign(self, cluster: str, user_id: int) -> GroupEntry:
        """Group for this user on this cluster; the bare cluster when no
        diversion is installed. Every call is tallied for conservation.
        """
        with self._lock:
            table = self._tables.get(cluster)
        if table is None:
            entry = GroupEntry(cluster, "baseline", 1.0)
        else:
            entry = table.assign(user_id)
        with self._lock:
            key = (cluster, entry.group)
            self.assignment_counts[key] = self.assignment_counts.get(key, 0) + 1
        return entry

    def experiment_tag_for(self, cluster: str, entry: GroupEntry) -> Optional[str]:
        if entry.kind != "experiment":
            return None
        table = self.table_for(cluster)
        return table.experiment_id if table else None
