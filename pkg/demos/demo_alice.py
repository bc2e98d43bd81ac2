"""Walkthrough: an error-injection experiment on the gallery scenario.

Runs the bundled "alice" experiment twice: first against the gallery whose
GetGallery fallback serves a static default, then against the variant whose
fallback is broken. The healthy run degrades gracefully and reads resilient;
the broken run turns the same injection into user-visible failures and the
safety monitor pulls the plug.

Each run simulates 30 minutes of traffic at 120 req/s, so expect the whole
script to take about a minute.
"""

from chaoslab.cli import render_report_text
from chaoslab.orchestrator import load_experiment_spec
from chaoslab.runtime import Platform
from chaoslab.topology import load_scenario


def run(scenario: str) -> dict:
    platform = Platform(load_scenario(scenario))
    spec = load_experiment_spec("alice")
    print(f"--- {spec.id} on {scenario} "
          f"({platform.topology.traffic.rate_per_s:g} req/s, "
          f"{platform.topology.traffic.duration_s:g} s simulated) ---")
    _, report, summary = platform.run_experiment(spec)
    print(render_report_text(report))
    print(f"simulated {summary.requests_total} requests in "
          f"{platform.engine.events_processed} engine events")
    print()
    return report


def main() -> None:
    healthy = run("gallery")
    broken = run("gallery-broken")

    h, b = healthy["verdict"]["result"], broken["verdict"]["result"]
    print(f"same injection, same traffic, same seed: {h} with a working "
          f"fallback, {b} with a broken one.")
    print("The only difference between the two scenario files is what the "
          "GetGallery fallback does when the injected error arrives.")


if __name__ == "__main__":
    main()
