/**
 * Wire document types for the /api/v1 control plane.
 *
 * Every document carries an explicit schema_version and all timestamps
 * are integer milliseconds. These shapes mirror the server's JSON
 * exactly; nothing here is derived or recomputed on the client.
 */

export const SCHEMA_VERSION = 1;

export type Phase =
  | 'Draft'
  | 'Validated'
  | 'Provisioning'
  | 'Running'
  | 'Concluding'
  | 'Completed'
  | 'Aborted';

export type TreatmentKind = 'error' | 'latency' | 'error_and_latency';

export const TREATMENT_KINDS: readonly TreatmentKind[] = [
  'error',
  'latency',
  'error_and_latency',
];

/** The three per-command outcomes the live view plots. */
export type PlotOutcome = 'success' | 'fallback_success' | 'fallback_failure';

export const PLOT_OUTCOMES: readonly PlotOutcome[] = [
  'success',
  'fallback_success',
  'fallback_failure',
];

// -- experiment spec -----------------------------------------------------------

export interface InjectionPointDoc {
  caller: string;
  command: string;
  target: string;
}

export interface TreatmentDoc {
  kind: TreatmentKind;
  added_latency_ms?: number;
}

export interface SafetyDoc {
  sps_drop_threshold: number;
  fallback_failure_threshold: number;
  evaluation_interval_s: number;
  min_samples: number;
}

export interface SpecDoc {
  schema_version: number;
  id: string;
  target_cluster: string;
  injection_points: InjectionPointDoc[];
  treatment: TreatmentDoc;
  diverted_fraction: number;
  duration_minutes: number;
  tracked_commands: string[];
  safety: SafetyDoc;
}

// -- topology ------------------------------------------------------------------

export interface DependencyDoc {
  command: string;
  target: string;
}

export interface ClusterDoc {
  name: string;
  entry: boolean;
  capacity: number;
  dependencies: DependencyDoc[];
  groups: string[];
}

export interface ClustersResponse {
  schema_version: number;
  scenario: string;
  clock_mode: string;
  max_divert: number;
  clusters: ClusterDoc[];
}

export interface RoutingEntryDoc {
  group: string;
  kind: 'baseline' | 'control' | 'experiment';
  weight: number;
}

export interface RoutingResponse {
  schema_version: number;
  cluster: string;
  experiment_id: string | null;
  salt: string | null;
  entries: RoutingEntryDoc[];
}

// -- experiment lifecycle --------------------------------------------------------

export interface TransitionDoc {
  from: Phase;
  to: Phase;
  at_ms: number;
}

export interface ExperimentDoc {
  schema_version: number;
  id: string;
  phase: Phase;
  started_at_ms: number | null;
  ends_at_ms: number | null;
  ended_at_ms: number | null;
  abort_reason: string | null;
  timeline: TransitionDoc[];
  spec: SpecDoc;
}

export interface ExperimentListResponse {
  schema_version: number;
  experiments: ExperimentDoc[];
}

export interface CreateResponse {
  schema_version: number;
  id: string;
}

// -- errors ----------------------------------------------------------------------

export interface ValidationIssueDoc {
  code: string;
  message: string;
}

export interface ApiErrorDoc {
  schema_version: number;
  code: string;
  message: string;
  details?: { issues?: ValidationIssueDoc[] } & Record<string, unknown>;
}

// -- observation -------------------------------------------------------------------

export interface GroupCounts {
  success: number;
  fallback_success: number;
  fallback_failure: number;
}

export interface SpsCounts {
  starts: number;
  requests: number;
}

/** One closed telemetry bucket, pushed over the stream. */
export interface BucketDoc {
  schema_version: number;
  kind: 'bucket';
  at_ms: number;
  bucket_ms: number;
  phase: Phase;
  remaining_ms: number | null;
  groups: { control: string; experiment: string };
  commands: Record<string, { control: GroupCounts; experiment: GroupCounts }>;
  sps: { control: SpsCounts; experiment: SpsCounts };
}

export interface SeriesDoc {
  group: string;
  command: string;
  outcome: string | null;
  points: [number, number][];
  total: number;
  exists: boolean;
}

export interface MetricsResponse {
  schema_version: number;
  bucket_ms: number;
  since_ms: number;
  until_ms: number;
  series: SeriesDoc[];
}

// -- report ------------------------------------------------------------------------

export interface VerdictReason {
  code: string;
  measured: number;
  threshold: number;
  message: string;
}

export interface VerdictDoc {
  result: 'resilient' | 'not_resilient' | 'inconclusive';
  reasons: VerdictReason[];
}

export interface CommandComparisonDoc {
  command: string;
  control: Record<string, number>;
  experiment: Record<string, number>;
  control_fractions: Record<string, number>;
  experiment_fractions: Record<string, number>;
  missing: boolean;
}

export interface ComparisonDoc {
  window: { since_ms: number; until_ms: number };
  groups: { control: string; experiment: string };
  requests: { control: number; experiment: number };
  stream_starts: { control: number; experiment: number };
  normalized_sps: {
    control: number;
    experiment: number;
    ratio: number;
    difference: number;
    z: number;
  };
  commands: CommandComparisonDoc[];
  missing_commands: string[];
}

export interface ExperimentStateDoc {
  phase: Phase;
  started_at_ms: number | null;
  ends_at_ms: number | null;
  ended_at_ms: number | null;
  abort_reason: string | null;
}

export interface ReportDoc {
  schema_version: number;
  report_kind: string;
  scenario: string;
  clock_mode: string;
  experiment: SpecDoc;
  state: ExperimentStateDoc;
  timeline: TransitionDoc[];
  groups: { baseline: string; control: string; experiment: string };
  thresholds: SafetyDoc;
  comparison: ComparisonDoc;
  verdict: VerdictDoc;
  teardown: { complete: boolean; issues: string[] };
  snapshot: unknown;
}
