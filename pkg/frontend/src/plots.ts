/**
 * Live plot state and SVG rendering.
 *
 * The model folds stream buckets into per-command, per-group series;
 * every plotted number is carried verbatim from a bucket document. The
 * only arithmetic here maps values to pixels. Buckets are keyed by
 * timestamp so the replay a reconnect triggers is idempotent.
 */

import type { BucketDoc, GroupCounts, Phase, SpsCounts } from './types.js';
import { PLOT_OUTCOMES } from './types.js';

export type GroupLabel = 'control' | 'experiment';

export const GROUP_LABELS: readonly GroupLabel[] = ['control', 'experiment'];

export interface CommandPoint {
  at_ms: number;
  counts: GroupCounts;
}

export interface SpsPoint {
  at_ms: number;
  counts: SpsCounts;
}

export class LivePlotModel {
  readonly commands = new Map<string, Record<GroupLabel, CommandPoint[]>>();
  readonly sps: Record<GroupLabel, SpsPoint[]> = { control: [], experiment: [] };
  phase: Phase | null = null;
  remainingMs: number | null = null;
  groups: { control: string; experiment: string } | null = null;
  bucketMs = 0;
  private readonly seen = new Set<number>();

  constructor(tracked: string[]) {
    for (const cmd of tracked) {
      this.commands.set(cmd, { control: [], experiment: [] });
    }
  }

  /** Fold one bucket in; false means the bucket was already seen. */
  ingest(doc: BucketDoc): boolean {
    this.phase = doc.phase;
    this.remainingMs = doc.remaining_ms;
    this.groups = doc.groups;
    this.bucketMs = doc.bucket_ms;
    if (this.seen.has(doc.at_ms)) return false;
    this.seen.add(doc.at_ms);
    for (const [cmd, perGroup] of Object.entries(doc.commands)) {
      let rows = this.commands.get(cmd);
      if (!rows) {
        rows = { control: [], experiment: [] };
        this.commands.set(cmd, rows);
      }
      for (const g of GROUP_LABELS) {
        rows[g].push({ at_ms: doc.at_ms, counts: perGroup[g] });
      }
    }
    for (const g of GROUP_LABELS) {
      this.sps[g].push({ at_ms: doc.at_ms, counts: doc.sps[g] });
    }
    return true;
  }

  latest(cmd: string, group: GroupLabel): GroupCounts | null {
    const rows = this.commands.get(cmd);
    if (!rows || rows[group].length === 0) return null;
    return rows[group][rows[group].length - 1].counts;
  }

  latestSps(group: GroupLabel): SpsCounts | null {
    const rows = this.sps[group];
    return rows.length ? rows[rows.length - 1].counts : null;
  }
}

// -- rendering -------------------------------------------------------------------

export interface SeriesLine {
  label: string;
  color: string;
  points: [number, number][];
}

export const OUTCOME_COLORS: Record<string, string> = {
  success: '#2e7d32',
  fallback_success: '#f9a825',
  fallback_failure: '#c62828',
};

export const GROUP_COLORS: Record<GroupLabel, string> = {
  control: '#1565c0',
  experiment: '#ef6c00',
};

const WIDTH = 320;
const HEIGHT = 96;
const PAD = 6;

/** The three outcome series of one group's command points. */
export function commandLines(points: CommandPoint[]): SeriesLine[] {
  return PLOT_OUTCOMES.map((outcome) => ({
    label: outcome,
    color: OUTCOME_COLORS[outcome],
    points: points.map((p) => [p.at_ms, p.counts[outcome]] as [number, number]),
  }));
}

/** Stream starts per bucket for both groups (buckets are one second wide,
 * so the raw counts already read as per-second rates). */
export function spsLines(model: LivePlotModel): SeriesLine[] {
  return GROUP_LABELS.map((g) => ({
    label: g,
    color: GROUP_COLORS[g],
    points: model.sps[g].map((p) => [p.at_ms, p.counts.starts] as [number, number]),
  }));
}

/** SVG path for one series scaled into the plot box. */
export function linePath(
  points: [number, number][],
  x0: number,
  x1: number,
  yMax: number,
  width: number = WIDTH,
  height: number = HEIGHT,
  pad: number = PAD,
): string {
  if (points.length === 0) return '';
  const spanX = Math.max(x1 - x0, 1);
  const spanY = Math.max(yMax, 1);
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  const coords = points.map(([t, v]) => {
    const x = pad + ((t - x0) / spanX) * innerW;
    const y = height - pad - (v / spanY) * innerH;
    return `${round2(x)},${round2(y)}`;
  });
  if (coords.length === 1) {
    // a single bucket still deserves a visible mark
    return `M${coords[0]} l2,0`;
  }
  return `M${coords[0]} L${coords.slice(1).join(' L')}`;
}

function round2(x: number): number {
  return Math.round(x * 100) / 100;
}

function esc(text: string): string {
  return text.replace(/[&<>"']/g, (c) => (
    { '&': '&amp;', '<': '&lt;', '>': '&gt;', '"': '&quot;', "'": '&#39;' }[c] as string
  ));
}

/** One plot panel: shared domain across its lines, y scaled to the peak. */
export function renderPlot(title: string, lines: SeriesLine[]): string {
  const all = lines.flatMap((l) => l.points);
  const x0 = all.length ? Math.min(...all.map((p) => p[0])) : 0;
  const x1 = all.length ? Math.max(...all.map((p) => p[0])) : 1;
  const yMax = all.length ? Math.max(...all.map((p) => p[1])) : 1;
  const paths = lines
    .filter((l) => l.points.length > 0)
    .map(
      (l) =>
        `<path d="${linePath(l.points, x0, x1, yMax)}" fill="none" ` +
        `stroke="${l.color}" stroke-width="1.5"><title>${esc(l.label)}</title></path>`,
    )
    .join('');
  return (
    `<figure class="plot"><figcaption>${esc(title)}</figcaption>` +
    `<svg viewBox="0 0 ${WIDTH} ${HEIGHT}" role="img" aria-label="${esc(title)}">` +
    `<rect x="0" y="0" width="${WIDTH}" height="${HEIGHT}" class="plot-bg"/>` +
    paths +
    `<text x="${WIDTH - PAD}" y="${PAD + 8}" text-anchor="end" class="plot-max">` +
    `${yMax}</text>` +
    `</svg></figure>`
  );
}
