"""chaoslab: a chaos-experimentation platform on a simulated service mesh.

Define a topology, divert a small slice of traffic into control and
experiment clone groups, inject failures into the experiment group only,
and let the safety monitor and analyzer decide whether the system degrades
gracefully.
"""

from .analysis import ComparisonReport, Verdict, compare_groups, verdict
from .engine import Engine, MeshClock
from .injector import FaultInjector, InjectionPoint, InjectionRule, Treatment
from .mesh import Mesh, RequestContext, RequestOutcome, RunSummary
from .orchestrator import (
    ExperimentSpec,
    Orchestrator,
    SafetyPolicy,
    load_experiment_spec,
    parse_experiment_spec,
)
from .router import Router, RoutingTable, diversion_table
from .runtime import ExperimentValidationError, Platform
from .telemetry import MetricId, TelemetryStore
from .topology import Topology, TopologyError, load_scenario, load_topology

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "MeshClock",
    "FaultInjector",
    "InjectionPoint",
    "InjectionRule",
    "Treatment",
    "ExperimentSpec",
    "Orchestrator",
    "SafetyPolicy",
    "load_experiment_spec",
    "parse_experiment_spec",
    "ComparisonReport",
    "Verdict",
    "compare_groups",
    "verdict",
    "ExperimentValidationError",
    "Platform",
    "Mesh",
    "RequestContext",
    "RequestOutcome",
    "RunSummary",
    "Router",
    "RoutingTable",
    "diversion_table",
    "MetricId",
    "TelemetryStore",
    "Topology",
    "TopologyError",
    "load_scenario",
    "load_topology",
    "__version__",
]
