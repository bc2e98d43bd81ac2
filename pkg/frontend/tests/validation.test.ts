/**
 * The client-side validators must raise the same issue codes the
 * control plane raises, for both the structural (parse) pass and the
 * topology (pre-start) pass.
 */

import { describe, expect, it } from 'vitest';
import aliceSpec from './fixtures/alice.json';
import { validateAgainstTopology, validateSpecDoc } from '../src/validation.js';
import type { TopologyInfo } from '../src/validation.js';
import type { ClusterDoc, ExperimentDoc, SpecDoc } from '../src/types.js';

function doc(overrides: Record<string, unknown> = {}): Record<string, unknown> {
  return { ...(aliceSpec as unknown as Record<string, unknown>), ...overrides };
}

function codes(issues: { code: string }[]): string[] {
  return issues.map((i) => i.code);
}

const GALLERY_CLUSTERS: ClusterDoc[] = [
  {
    name: 'api',
    entry: true,
    capacity: 200,
    dependencies: [
      { command: 'GetGallery', target: 'gallery' },
      { command: 'GetPlaylist', target: 'playlist' },
    ],
    groups: ['api'],
  },
  { name: 'gallery', entry: false, capacity: 120, dependencies: [], groups: ['gallery'] },
  { name: 'playlist', entry: false, capacity: 120, dependencies: [], groups: ['playlist'] },
];

const TOPO: TopologyInfo = { clusters: GALLERY_CLUSTERS, maxDivert: 0.05 };

function experiment(id: string, cluster: string, phase: ExperimentDoc['phase']): ExperimentDoc {
  return {
    schema_version: 1,
    id,
    phase,
    started_at_ms: null,
    ends_at_ms: null,
    ended_at_ms: null,
    abort_reason: null,
    timeline: [],
    spec: { ...(aliceSpec as unknown as SpecDoc), id, target_cluster: cluster },
  };
}

describe('structural validation', () => {
  it('accepts the canonical spec', () => {
    expect(validateSpecDoc(doc())).toEqual([]);
  });

  it('rejects a non-mapping document outright', () => {
    expect(codes(validateSpecDoc('nope'))).toEqual(['bad_schema']);
    expect(codes(validateSpecDoc(null))).toEqual(['bad_schema']);
    expect(codes(validateSpecDoc([1, 2])))
      .toEqual(['bad_schema']);
  });

  it.each([
    [{ schema_version: 2 }, 'bad_schema'],
    [{ id: '' }, 'bad_id'],
    [{ id: 7 }, 'bad_id'],
    [{ target_cluster: '' }, 'bad_target_cluster'],
    [{ injection_points: [] }, 'bad_injection_points'],
    [{ injection_points: [{ caller: 'api', command: 'GetGallery' }] }, 'bad_injection_points'],
    [{ treatment: 'error' }, 'bad_treatment'],
    [{ treatment: { kind: 'explode' } }, 'bad_treatment'],
    [{ treatment: { kind: 'latency' } }, 'bad_treatment'],
    [{ treatment: { kind: 'latency', added_latency_ms: 0 } }, 'bad_treatment'],
    [{ treatment: { kind: 'error', added_latency_ms: 50 } }, 'bad_treatment'],
    [{ treatment: { kind: 'latency', added_latency_ms: 'fast' } }, 'bad_treatment'],
    [{ diverted_fraction: 0 }, 'bad_fraction'],
    [{ diverted_fraction: 1 }, 'bad_fraction'],
    [{ diverted_fraction: 'some' }, 'bad_fraction'],
    [{ diverted_fraction: '0.5' }, 'bad_fraction'],
    [{ duration_minutes: 0 }, 'bad_duration'],
    [{ duration_minutes: -5 }, 'bad_duration'],
    [{ duration_minutes: '30' }, 'bad_duration'],
    [{ safety: { min_samples: '500' } }, 'bad_safety'],
    [{ tracked_commands: [] }, 'bad_tracked_commands'],
    [{ tracked_commands: ['GetGallery', ''] }, 'bad_tracked_commands'],
    [{ safety: 'strict' }, 'bad_safety'],
    [{ safety: { max_errors: 3 } }, 'bad_safety'],
    [{ safety: { sps_drop_threshold: 1.5 } }, 'bad_safety'],
    [{ safety: { fallback_failure_threshold: 0 } }, 'bad_safety'],
    [{ safety: { evaluation_interval_s: -1 } }, 'bad_safety'],
    [{ safety: { min_samples: 0 } }, 'bad_safety'],
  ])('flags %o as %s', (override, code) => {
    expect(codes(validateSpecDoc(doc(override as Record<string, unknown>)))).toEqual([code]);
  });

  it('accepts latency treatments with positive added latency', () => {
    expect(
      validateSpecDoc(doc({ treatment: { kind: 'error_and_latency', added_latency_ms: 250 } })),
    ).toEqual([]);
    // the server coerces this one field with float(), so a numeric
    // string is fine here even though typed fields reject strings
    expect(
      validateSpecDoc(doc({ treatment: { kind: 'latency', added_latency_ms: '250' } })),
    ).toEqual([]);
  });

  it('collects every problem in one pass, in field order', () => {
    const issues = validateSpecDoc(
      doc({ id: '', diverted_fraction: 2, tracked_commands: [] }),
    );
    expect(codes(issues)).toEqual(['bad_id', 'bad_fraction', 'bad_tracked_commands']);
  });
});

describe('topology validation', () => {
  const spec = aliceSpec as unknown as SpecDoc;

  it('accepts the canonical spec against its topology', () => {
    expect(validateAgainstTopology(spec, TOPO)).toEqual([]);
  });

  it('flags an unknown target cluster', () => {
    const s = { ...spec, target_cluster: 'nowhere' };
    expect(codes(validateAgainstTopology(s, TOPO))).toContain('unknown_cluster');
  });

  it('flags an injection point with no matching call edge', () => {
    const s = {
      ...spec,
      injection_points: [{ caller: 'api', command: 'GetGallery', target: 'playlist' }],
    };
    expect(codes(validateAgainstTopology(s, TOPO))).toEqual(['point_unresolved']);
  });

  it('flags a tracked command nothing in the topology issues', () => {
    const s = { ...spec, tracked_commands: ['GetGallery', 'GetNothing'] };
    expect(codes(validateAgainstTopology(s, TOPO))).toEqual(['tracked_command_unknown']);
  });

  it('flags a diverted fraction above the configured cap', () => {
    const s = { ...spec, diverted_fraction: 0.06 };
    expect(codes(validateAgainstTopology(s, TOPO))).toEqual(['fraction_over_cap']);
  });

  it('flags the cluster as busy only while another run is active on it', () => {
    const busy = [experiment('other', 'api', 'Running')];
    expect(codes(validateAgainstTopology(spec, TOPO, busy))).toEqual(['cluster_busy']);

    const done = [experiment('other', 'api', 'Completed')];
    expect(validateAgainstTopology(spec, TOPO, done)).toEqual([]);

    const elsewhere = [experiment('other', 'gallery', 'Running')];
    expect(validateAgainstTopology(spec, TOPO, elsewhere)).toEqual([]);

    const itself = [experiment(spec.id, 'api', 'Running')];
    expect(validateAgainstTopology(spec, TOPO, itself)).toEqual([]);
  });
});
