/**
 * Client-side experiment spec validation.
 *
 * Mirrors the control plane's checks code for code so a rejected form
 * almost never reaches the server: the structural pass matches spec
 * parsing, the topology pass matches pre-start validation. Messages are
 * kept close to the server's but only the codes are contractual.
 */

import type { ClusterDoc, ExperimentDoc, SpecDoc } from './types.js';
import { TREATMENT_KINDS } from './types.js';

export interface Issue {
  code: string;
  message: string;
}

const SAFETY_FIELDS = [
  'sps_drop_threshold',
  'fallback_failure_threshold',
  'evaluation_interval_s',
  'min_samples',
] as const;

/** Phases during which a cluster is considered occupied. */
const ACTIVE_PHASES = ['Provisioning', 'Running', 'Concluding'];

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === 'object' && value !== null && !Array.isArray(value);
}

function isNonEmptyString(value: unknown): value is string {
  return typeof value === 'string' && value.length > 0;
}

/** Numeric value of a coerced field (the server converts these with
 * float(), so numeric strings pass); NaN when unparseable. */
function num(value: unknown): number {
  if (typeof value === 'number') return value;
  if (typeof value === 'string' && value.trim() !== '') return Number(value);
  return NaN;
}

/** Numeric value of a strictly typed field (the server type-checks
 * these, so strings never pass); NaN otherwise. */
function strictNum(value: unknown): number {
  return typeof value === 'number' ? value : NaN;
}

function checkTreatment(raw: unknown, bad: (code: string, message: string) => void): void {
  if (!isRecord(raw)) {
    bad('bad_treatment', 'treatment must be a mapping with a kind');
    return;
  }
  const kind = raw.kind ?? '';
  const latency = 'added_latency_ms' in raw ? num(raw.added_latency_ms) : 0;
  const involvesLatency = kind === 'latency' || kind === 'error_and_latency';
  if (Number.isNaN(latency)) {
    bad('bad_treatment', 'added_latency_ms must be a number');
  } else if (!(TREATMENT_KINDS as readonly unknown[]).includes(kind)) {
    bad('bad_treatment', `unknown treatment kind ${JSON.stringify(kind)}`);
  } else if (involvesLatency && !(latency > 0)) {
    bad('bad_treatment', 'latency treatments need added_latency_ms > 0');
  } else if (!involvesLatency && latency !== 0) {
    bad('bad_treatment', 'error treatments must not carry added latency');
  }
}

function checkSafety(raw: unknown, bad: (code: string, message: string) => void): void {
  if (raw === undefined || raw === null) return;
  if (!isRecord(raw)) {
    bad('bad_safety', 'safety must be a mapping');
    return;
  }
  const unknown = Object.keys(raw).filter(
    (k) => !(SAFETY_FIELDS as readonly string[]).includes(k),
  );
  if (unknown.length) {
    const listed = unknown.sort().map((k) => `'${k}'`).join(', ');
    bad('bad_safety', `unknown safety fields: [${listed}]`);
    return;
  }
  // same order and bounds as the server's policy constructor; first
  // violated constraint wins
  const sps = 'sps_drop_threshold' in raw ? strictNum(raw.sps_drop_threshold) : 0.05;
  const ff = 'fallback_failure_threshold' in raw ? strictNum(raw.fallback_failure_threshold) : 0.02;
  const interval = 'evaluation_interval_s' in raw ? strictNum(raw.evaluation_interval_s) : 5;
  const samples = 'min_samples' in raw ? strictNum(raw.min_samples) : 500;
  if (!(sps > 0 && sps < 1)) {
    bad('bad_safety', 'sps_drop_threshold must be in (0,1)');
  } else if (!(ff > 0 && ff < 1)) {
    bad('bad_safety', 'fallback_failure_threshold must be in (0,1)');
  } else if (!(interval > 0)) {
    bad('bad_safety', 'evaluation_interval_s must be > 0');
  } else if (!(samples >= 1)) {
    bad('bad_safety', 'min_samples must be >= 1');
  }
}

/**
 * Structural checks on a candidate spec document. Collects every
 * problem instead of stopping at the first, in the same field order as
 * the server.
 */
export function validateSpecDoc(doc: unknown): Issue[] {
  if (!isRecord(doc)) {
    return [{ code: 'bad_schema', message: 'experiment spec must be a mapping' }];
  }
  const issues: Issue[] = [];
  const bad = (code: string, message: string) => issues.push({ code, message });

  if (doc.schema_version !== 1) {
    bad('bad_schema', `unsupported schema_version ${JSON.stringify(doc.schema_version)}`);
  }
  if (!isNonEmptyString(doc.id)) {
    bad('bad_id', 'id must be a non-empty string');
  }
  if (!isNonEmptyString(doc.target_cluster)) {
    bad('bad_target_cluster', 'target_cluster must be a non-empty string');
  }

  const points = doc.injection_points;
  if (!Array.isArray(points) || points.length === 0) {
    bad('bad_injection_points', 'injection_points must be a non-empty list');
  } else {
    points.forEach((p, i) => {
      const ok =
        isRecord(p) &&
        isNonEmptyString(p.caller) &&
        isNonEmptyString(p.command) &&
        isNonEmptyString(p.target);
      if (!ok) {
        bad('bad_injection_points', `injection_points[${i}] needs caller, command, target strings`);
      }
    });
  }

  checkTreatment(doc.treatment, bad);

  const fraction = strictNum(doc.diverted_fraction);
  if (!(fraction > 0 && fraction < 1)) {
    bad('bad_fraction', 'diverted_fraction must be a number in (0,1)');
  }
  const duration = strictNum(doc.duration_minutes);
  if (!(duration > 0)) {
    bad('bad_duration', 'duration_minutes must be a number > 0');
  }

  const tracked = doc.tracked_commands;
  if (!Array.isArray(tracked) || tracked.length === 0 || !tracked.every(isNonEmptyString)) {
    bad('bad_tracked_commands', 'tracked_commands must be a non-empty list of names');
  }

  checkSafety(doc.safety, bad);
  return issues;
}

export interface TopologyInfo {
  clusters: ClusterDoc[];
  maxDivert: number;
}

/**
 * Semantic checks against the live topology: same codes the server
 * raises when an experiment is started.
 */
export function validateAgainstTopology(
  spec: SpecDoc,
  topo: TopologyInfo,
  others: ExperimentDoc[] = [],
): Issue[] {
  const issues: Issue[] = [];
  const byName = new Map(topo.clusters.map((c) => [c.name, c]));

  if (!byName.has(spec.target_cluster)) {
    issues.push({
      code: 'unknown_cluster',
      message: `target_cluster '${spec.target_cluster}' not in topology`,
    });
  }
  for (const p of spec.injection_points) {
    const caller = byName.get(p.caller);
    const edge = caller?.dependencies.find((d) => d.command === p.command);
    if (!edge || edge.target !== p.target) {
      issues.push({
        code: 'point_unresolved',
        message: `no edge ${p.caller} --${p.command}--> ${p.target} in topology`,
      });
    }
  }
  const known = new Set<string>();
  for (const c of topo.clusters) {
    for (const d of c.dependencies) known.add(d.command);
  }
  for (const cmd of spec.tracked_commands) {
    if (!known.has(cmd)) {
      issues.push({
        code: 'tracked_command_unknown',
        message: `tracked command '${cmd}' not in topology`,
      });
    }
  }
  if (spec.diverted_fraction > topo.maxDivert) {
    issues.push({
      code: 'fraction_over_cap',
      message: `diverted_fraction ${spec.diverted_fraction} exceeds cap ${topo.maxDivert}`,
    });
  }
  for (const other of others) {
    if (
      other.id !== spec.id &&
      other.spec.target_cluster === spec.target_cluster &&
      ACTIVE_PHASES.includes(other.phase)
    ) {
      issues.push({
        code: 'cluster_busy',
        message: `experiment '${other.id}' is active on '${spec.target_cluster}'`,
      });
      break;
    }
  }
  return issues;
}
