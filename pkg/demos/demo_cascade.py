"""Walkthrough: a fallback that makes things worse.

Three variants of the same three-service chain (a -> b -> c, with c capacity
limited) show how a broken fallback amplifies load instead of shedding it:

  cascade          b's fallback is broken; a's fallback retries against c
  cascade-noamp    same breakage, but a has no fallback edge to c
  cascade-healthy  b's fallback serves a static value; nothing retries

The plain runs measure the amplification directly (arrivals at c, overloads,
normalized SPS). The orchestrated probe then injects latency into a small
diverted slice and shows the safety monitor aborting the experiment as soon
as the experiment group's SPS collapses.
"""

from chaoslab.cli import render_report_text
from chaoslab.orchestrator import load_experiment_spec
from chaoslab.runtime import Platform
from chaoslab.topology import load_scenario


def measure(scenario: str) -> None:
    platform = Platform(load_scenario(scenario))
    platform.run_simulation()
    dep = platform.mesh.deployment("c")
    until = platform.engine.now_ms + platform.telemetry.bucket_ms
    sps = platform.telemetry.compute_sps("a", 0.0, until)
    print(f"{scenario:18s}  arrivals at c {dep.arrivals:6d}  "
          f"overloads {dep.overloads:6d}  "
          f"normalized SPS {sps.normalized:.4f}")


def main() -> None:
    print("plain runs, identical traffic and seed:")
    for scenario in ("cascade-healthy", "cascade-noamp", "cascade"):
        measure(scenario)
    print()
    print("Every extra arrival at c in the last row is a's fallback retrying "
          "a request that b's broken fallback already failed.")
    print()

    platform = Platform(load_scenario("cascade"))
    spec = load_experiment_spec("cascade-overload")
    print(f"--- orchestrated probe: {spec.id} ---")
    exp, report, _ = platform.run_experiment(spec)
    print(render_report_text(report))
    minutes_early = (exp.ends_at - exp.ended_at) / 60_000.0
    print(f"The monitor aborted {minutes_early:.1f} simulated minutes before "
          f"the scheduled end; the diverted slice was 5% of traffic.")


if __name__ == "__main__":
    main()
