/**
 * The plot model must carry stream numbers through verbatim: one point
 * per bucket per series, values untouched, replays dropped. The SVG
 * helpers only map those values into pixel space.
 */

import { describe, expect, it } from 'vitest';
import {
  commandLines,
  linePath,
  LivePlotModel,
  renderPlot,
  spsLines,
} from '../src/plots.js';
import type { BucketDoc, GroupCounts, SpsCounts } from '../src/types.js';

function bucket(
  at_ms: number,
  control: GroupCounts,
  experiment: GroupCounts,
  sps: { control: SpsCounts; experiment: SpsCounts },
  phase: BucketDoc['phase'] = 'Running',
): BucketDoc {
  return {
    schema_version: 1,
    kind: 'bucket',
    at_ms,
    bucket_ms: 1000,
    phase,
    remaining_ms: 60000 - at_ms,
    groups: { control: 'api-chap-control', experiment: 'api-chap-experiment' },
    commands: { GetGallery: { control, experiment } },
    sps,
  };
}

const B1 = bucket(
  1000,
  { success: 5, fallback_success: 0, fallback_failure: 0 },
  { success: 0, fallback_success: 6, fallback_failure: 1 },
  { control: { starts: 5, requests: 5 }, experiment: { starts: 6, requests: 7 } },
);
const B2 = bucket(
  2000,
  { success: 4, fallback_success: 0, fallback_failure: 0 },
  { success: 0, fallback_success: 3, fallback_failure: 2 },
  { control: { starts: 4, requests: 4 }, experiment: { starts: 3, requests: 5 } },
);

describe('LivePlotModel', () => {
  it('accumulates buckets verbatim, per command and group', () => {
    const model = new LivePlotModel(['GetGallery']);
    expect(model.ingest(B1)).toBe(true);
    expect(model.ingest(B2)).toBe(true);

    const rows = model.commands.get('GetGallery')!;
    expect(rows.control.map((p) => p.at_ms)).toEqual([1000, 2000]);
    expect(rows.control.map((p) => p.counts.success)).toEqual([5, 4]);
    expect(rows.experiment.map((p) => p.counts.fallback_success)).toEqual([6, 3]);
    expect(rows.experiment.map((p) => p.counts.fallback_failure)).toEqual([1, 2]);

    expect(model.sps.control.map((p) => p.counts.starts)).toEqual([5, 4]);
    expect(model.sps.experiment.map((p) => p.counts.requests)).toEqual([7, 5]);
    expect(model.phase).toBe('Running');
    expect(model.remainingMs).toBe(58000);
    expect(model.groups).toEqual({
      control: 'api-chap-control',
      experiment: 'api-chap-experiment',
    });
  });

  it('drops replayed buckets so a reconnect cannot double-count', () => {
    const model = new LivePlotModel(['GetGallery']);
    model.ingest(B1);
    model.ingest(B2);
    expect(model.ingest(B1)).toBe(false);

    const rows = model.commands.get('GetGallery')!;
    expect(rows.control).toHaveLength(2);
    expect(model.sps.experiment).toHaveLength(2);
  });

  it('pre-seeds tracked commands and reports latest counts', () => {
    const model = new LivePlotModel(['GetGallery']);
    expect(model.commands.has('GetGallery')).toBe(true);
    expect(model.latest('GetGallery', 'control')).toBeNull();

    model.ingest(B1);
    model.ingest(B2);
    expect(model.latest('GetGallery', 'experiment')).toEqual({
      success: 0,
      fallback_success: 3,
      fallback_failure: 2,
    });
    expect(model.latestSps('control')).toEqual({ starts: 4, requests: 4 });
  });
});

describe('series derivation', () => {
  it('splits command points into the three outcome lines, values untouched', () => {
    const model = new LivePlotModel(['GetGallery']);
    model.ingest(B1);
    model.ingest(B2);
    const lines = commandLines(model.commands.get('GetGallery')!.experiment);
    expect(lines.map((l) => l.label)).toEqual([
      'success',
      'fallback_success',
      'fallback_failure',
    ]);
    expect(lines[0].points).toEqual([[1000, 0], [2000, 0]]);
    expect(lines[1].points).toEqual([[1000, 6], [2000, 3]]);
    expect(lines[2].points).toEqual([[1000, 1], [2000, 2]]);
  });

  it('plots stream starts per group straight from the bucket counts', () => {
    const model = new LivePlotModel(['GetGallery']);
    model.ingest(B1);
    model.ingest(B2);
    const lines = spsLines(model);
    expect(lines.map((l) => l.label)).toEqual(['control', 'experiment']);
    expect(lines[0].points).toEqual([[1000, 5], [2000, 4]]);
    expect(lines[1].points).toEqual([[1000, 6], [2000, 3]]);
  });
});

describe('SVG rendering', () => {
  it('scales points into the plot box linearly', () => {
    // box 100x50, pad 0: x spans 0..100, y spans 50 (bottom) to 0 (top)
    const path = linePath([[0, 0], [500, 5], [1000, 10]], 0, 1000, 10, 100, 50, 0);
    expect(path).toBe('M0,50 L50,25 L100,0');
  });

  it('marks a single bucket instead of vanishing', () => {
    const path = linePath([[1000, 3]], 1000, 1000, 3, 100, 50, 0);
    expect(path.startsWith('M')).toBe(true);
    expect(path).toContain('l2,0');
  });

  it('renders one path per non-empty series plus the peak label', () => {
    const svg = renderPlot('experiment', [
      { label: 'success', color: '#2e7d32', points: [[0, 1], [1000, 2]] },
      { label: 'fallback_failure', color: '#c62828', points: [[0, 0], [1000, 1]] },
      { label: 'empty', color: '#000000', points: [] },
    ]);
    expect(svg.match(/<path /g)).toHaveLength(2);
    expect(svg).toContain('<figcaption>experiment</figcaption>');
    expect(svg).toContain('>2</text>');
    expect(svg).toContain('viewBox="0 0 320 96"');
  });

  it('escapes labels it interpolates', () => {
    const svg = renderPlot('<script>alert(1)</script>', []);
    expect(svg).not.toContain('<script>');
    expect(svg).toContain('&lt;script&gt;');
  });
});
