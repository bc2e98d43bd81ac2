/**
 * Model behind the experiment definition form.
 *
 * The form exposes exactly the fields of an experiment spec; submitting
 * it produces the same wire document the CLI submits for an equivalent
 * spec file. Injection point and tracked command choices are discovered
 * from the topology the control plane reports, never typed free-form.
 */
import { validateAgainstTopology, validateSpecDoc } from './validation.js';
/** Server-side policy defaults, pre-filled into the form. */
export const DEFAULT_SAFETY = {
    sps_drop_threshold: 0.05,
    fallback_failure_threshold: 0.02,
    evaluation_interval_s: 5,
    min_samples: 500,
};
export function edgeKey(p) {
    return `${p.caller}|${p.command}|${p.target}`;
}
/** Every call edge in the topology, in cluster order: the injection
 * points an experiment may pick from. */
export function discoverEdges(clusters) {
    const out = [];
    for (const c of clusters) {
        for (const d of c.dependencies) {
            const p = { caller: c.name, command: d.command, target: d.target };
            out.push({ ...p, key: edgeKey(p) });
        }
    }
    return out;
}
/** Distinct command names across the topology, for tracked-command choices. */
export function knownCommands(clusters) {
    const names = new Set();
    for (const c of clusters) {
        for (const d of c.dependencies)
            names.add(d.command);
    }
    return [...names].sort();
}
export class ExperimentFormModel {
    constructor() {
        this.id = '';
        this.targetCluster = '';
        this.injectionPoints = [];
        this.treatmentKind = 'error';
        this.addedLatencyMs = 100;
        this.divertedFraction = 0.01;
        this.durationMinutes = 30;
        this.trackedCommands = [];
        this.safety = { ...DEFAULT_SAFETY };
    }
    involvesLatency() {
        return this.treatmentKind === 'latency' || this.treatmentKind === 'error_and_latency';
    }
    /** The wire document this form defines. Latency is only carried for
     * treatments that add it, matching the canonical spec shape. */
    toSpecDoc() {
        const treatment = { kind: this.treatmentKind };
        if (this.involvesLatency()) {
            treatment.added_latency_ms = this.addedLatencyMs;
        }
        return {
            schema_version: 1,
            id: this.id,
            target_cluster: this.targetCluster,
            injection_points: this.injectionPoints.map((p) => ({ ...p })),
            treatment,
            diverted_fraction: this.divertedFraction,
            duration_minutes: this.durationMinutes,
            tracked_commands: [...this.trackedCommands],
            safety: { ...this.safety },
        };
    }
    /** Structural issues always; topology issues once the structure is
     * clean, matching the server's parse-then-validate split. */
    validate(topo, others = []) {
        const doc = this.toSpecDoc();
        const issues = validateSpecDoc(doc);
        if (issues.length === 0 && topo) {
            issues.push(...validateAgainstTopology(doc, topo, others));
        }
        return issues;
    }
}
