"""Shared fixtures: tiny YAML topologies and platform factories."""

from __future__ import annotations

import pytest

from chaoslab import load_topology
from chaoslab.runtime import Platform

TWO_HOP_YAML = """\
schema_version: 1
name: two-hop
entry: front
routing_hash: fnv1a-64
services:
  - name: front
    base_latency_ms: 0
    dependencies:
      - command: GetThing
        target: back
        criticality: non-critical
        fallback:
          kind: static-value
        command_config:
          timeout_ms: 400
          breaker_min_volume: 1000000000
  - name: back
    base_latency_ms: [5, 10]
traffic:
  rate_per_s: 100
  duration_s: 10
  user_population: 10000
  seed: 11
"""


@pytest.fixture
def two_hop():
    return load_topology(TWO_HOP_YAML)


@pytest.fixture
def two_hop_platform(two_hop):
    return Platform(two_hop)


def make_topology(yaml_text: str):
    return load_topology(yaml_text)
