/**
 * Page rendering and event wiring for the two dashboard views.
 *
 * The define view builds an experiment spec from discovered topology
 * choices, validates it client-side, and submits it; the live view
 * subscribes to the bucket stream and redraws the per-command and SPS
 * plots as buckets arrive. Every action a view performs maps onto one
 * control plane endpoint, and every displayed number is server-provided.
 */

import { ApiClient, ApiRequestError } from './api.js';
import {
  DEFAULT_SAFETY,
  discoverEdges,
  ExperimentFormModel,
  knownCommands,
} from './form.js';
import type { EdgeChoice } from './form.js';
import { BucketStream } from './stream.js';
import {
  commandLines,
  GROUP_LABELS,
  LivePlotModel,
  renderPlot,
  spsLines,
} from './plots.js';
import type {
  ClustersResponse,
  ExperimentDoc,
  Phase,
  ReportDoc,
  TreatmentKind,
  ValidationIssueDoc,
} from './types.js';
import { PLOT_OUTCOMES, TREATMENT_KINDS } from './types.js';

type Cleanup = () => void;

/** Which form field an issue code belongs against; unmapped codes go to
 * the form-wide banner. */
const ISSUE_FIELDS: Record<string, string> = {
  bad_id: 'f-id',
  bad_target_cluster: 'f-cluster',
  unknown_cluster: 'f-cluster',
  cluster_busy: 'f-cluster',
  duplicate_experiment: 'f-id',
  bad_injection_points: 'f-points',
  point_unresolved: 'f-points',
  bad_treatment: 'f-treatment',
  bad_fraction: 'f-fraction',
  fraction_over_cap: 'f-fraction',
  bad_duration: 'f-duration',
  bad_tracked_commands: 'f-tracked',
  tracked_command_unknown: 'f-tracked',
  bad_safety: 'f-safety',
};

function esc(text: string): string {
  return text.replace(/[&<>"']/g, (c) => (
    { '&': '&amp;', '<': '&lt;', '>': '&gt;', '"': '&quot;', "'": '&#39;' }[c] as string
  ));
}

function fmtNum(x: number): string {
  if (Number.isInteger(x)) return String(x);
  return x.toFixed(4).replace(/0+$/, '').replace(/\.$/, '.0');
}

function fmtMs(ms: number): string {
  const total = Math.round(ms / 1000);
  const m = Math.floor(total / 60);
  const s = total % 60;
  return `${m}m ${String(s).padStart(2, '0')}s`;
}

function phaseBadge(phase: Phase): string {
  return `<span class="badge phase-${phase.toLowerCase()}">${esc(phase)}</span>`;
}

function errorBlock(err: unknown): string {
  const message =
    err instanceof ApiRequestError ? `${err.code}: ${err.message}` : String(err);
  return (
    `<div class="banner error">${esc(message)}</div>` +
    `<p><a href="#/">back to experiments</a></p>`
  );
}

/** Hash-based routing over the dashboard pages; returns the view's
 * cleanup hook so a navigation can drop its stream subscription. */
export function route(api: ApiClient, root: HTMLElement, hash: string): Cleanup {
  const report = hash.match(/^#\/experiments\/([^/]+)\/report$/);
  if (report) return renderReportView(api, root, decodeURIComponent(report[1]));
  const live = hash.match(/^#\/experiments\/([^/]+)$/);
  if (live) return renderLiveView(api, root, decodeURIComponent(live[1]));
  return renderDefineView(api, root);
}

// -- define & start ----------------------------------------------------------------

function choiceBox(name: string, value: string, label: string): string {
  return (
    `<label class="choice"><input type="checkbox" name="${name}" ` +
    `value="${esc(value)}"> ${esc(label)}</label>`
  );
}

function safetyInput(id: string, label: string, value: number, step: string): string {
  return (
    `<label class="inline" for="${id}">${esc(label)}</label>` +
    `<input id="${id}" type="number" step="${step}" value="${value}">`
  );
}

function defineHtml(topo: ClustersResponse, edges: EdgeChoice[], commands: string[]): string {
  const clusterOptions = topo.clusters
    .map((c) => `<option value="${esc(c.name)}">${esc(c.name)}${c.entry ? ' (entry)' : ''}</option>`)
    .join('');
  const kindOptions = TREATMENT_KINDS
    .map((k) => `<option value="${k}">${k}</option>`)
    .join('');
  const pointBoxes = edges
    .map((e) => choiceBox('point', e.key, `${e.caller} → ${e.command} → ${e.target}`))
    .join('');
  const commandBoxes = commands.map((c) => choiceBox('tracked', c, c)).join('');
  return `
<header>
  <h1>chaoslab</h1>
  <p class="subtitle">scenario <strong>${esc(topo.scenario)}</strong>
    &middot; ${esc(topo.clock_mode)} clock
    &middot; divert cap ${fmtNum(topo.max_divert)} per group</p>
</header>
<form id="define-form" novalidate>
  <h2>define an experiment</h2>
  <div class="banner error" id="form-banner" hidden></div>
  <div class="field" id="f-id">
    <label for="in-id">experiment id</label>
    <input id="in-id" type="text" placeholder="my-experiment">
  </div>
  <div class="field" id="f-cluster">
    <label for="in-cluster">target cluster</label>
    <select id="in-cluster">${clusterOptions}</select>
  </div>
  <div class="field" id="f-points">
    <label>injection points</label>
    <div class="choices">${pointBoxes}</div>
  </div>
  <div class="field" id="f-treatment">
    <label for="in-kind">treatment</label>
    <select id="in-kind">${kindOptions}</select>
    <label class="inline" for="in-latency">added latency (ms)</label>
    <input id="in-latency" type="number" step="any" value="100" disabled>
  </div>
  <div class="field" id="f-fraction">
    <label for="in-fraction">diverted fraction (per group)</label>
    <input id="in-fraction" type="number" step="any" value="0.01">
  </div>
  <div class="field" id="f-duration">
    <label for="in-duration">duration (minutes)</label>
    <input id="in-duration" type="number" step="any" value="30">
  </div>
  <div class="field" id="f-tracked">
    <label>tracked commands</label>
    <div class="choices">${commandBoxes}</div>
  </div>
  <div class="field" id="f-safety">
    <label>safety policy</label>
    <div class="safety-grid">
      ${safetyInput('in-sps-drop', 'max SPS drop', DEFAULT_SAFETY.sps_drop_threshold, 'any')}
      ${safetyInput('in-ff', 'max failed-fallback fraction', DEFAULT_SAFETY.fallback_failure_threshold, 'any')}
      ${safetyInput('in-interval', 'evaluation interval (s)', DEFAULT_SAFETY.evaluation_interval_s, 'any')}
      ${safetyInput('in-samples', 'min samples per group', DEFAULT_SAFETY.min_samples, '1')}
    </div>
  </div>
  <button type="submit" id="submit-btn">define &amp; start</button>
</form>
<section id="existing">
  <h2>experiments</h2>
  <ul id="experiment-list" class="experiment-list"></ul>
</section>`;
}

function renderDefineView(api: ApiClient, root: HTMLElement): Cleanup {
  let stopped = false;
  root.innerHTML = '<p class="loading">loading topology…</p>';

  void (async () => {
    let topo: ClustersResponse;
    let experiments: ExperimentDoc[];
    try {
      topo = await api.clusters();
      experiments = (await api.listExperiments()).experiments;
    } catch (err) {
      if (!stopped) root.innerHTML = errorBlock(err);
      return;
    }
    if (stopped) return;

    const edges = discoverEdges(topo.clusters);
    const edgesByKey = new Map(edges.map((e) => [e.key, e]));
    root.innerHTML = defineHtml(topo, edges, knownCommands(topo.clusters));

    const form = root.querySelector<HTMLFormElement>('#define-form')!;
    const banner = root.querySelector<HTMLDivElement>('#form-banner')!;
    const kindSelect = root.querySelector<HTMLSelectElement>('#in-kind')!;
    const latencyInput = root.querySelector<HTMLInputElement>('#in-latency')!;
    const listEl = root.querySelector<HTMLUListElement>('#experiment-list')!;

    const renderList = (docs: ExperimentDoc[]) => {
      listEl.innerHTML = docs.length
        ? docs
            .map(
              (d) =>
                `<li><a href="#/experiments/${encodeURIComponent(d.id)}">${esc(d.id)}</a> ` +
                `${phaseBadge(d.phase)} on ${esc(d.spec.target_cluster)}</li>`,
            )
            .join('')
        : '<li class="empty">none defined yet</li>';
    };
    renderList(experiments);

    kindSelect.addEventListener('change', () => {
      const kind = kindSelect.value as TreatmentKind;
      latencyInput.disabled = kind === 'error';
    });

    const input = (sel: string) => root.querySelector<HTMLInputElement>(sel)!;
    const numValue = (sel: string) => Number(input(sel).value);
    const checkedValues = (name: string) =>
      [...root.querySelectorAll<HTMLInputElement>(`input[name="${name}"]:checked`)].map(
        (el) => el.value,
      );

    const readModel = (): ExperimentFormModel => {
      const model = new ExperimentFormModel();
      model.id = input('#in-id').value.trim();
      model.targetCluster = root.querySelector<HTMLSelectElement>('#in-cluster')!.value;
      model.injectionPoints = checkedValues('point')
        .map((key) => edgesByKey.get(key))
        .filter((e): e is EdgeChoice => e !== undefined)
        .map(({ caller, command, target }) => ({ caller, command, target }));
      model.treatmentKind = kindSelect.value as TreatmentKind;
      model.addedLatencyMs = numValue('#in-latency');
      model.divertedFraction = numValue('#in-fraction');
      model.durationMinutes = numValue('#in-duration');
      model.trackedCommands = checkedValues('tracked');
      model.safety = {
        sps_drop_threshold: numValue('#in-sps-drop'),
        fallback_failure_threshold: numValue('#in-ff'),
        evaluation_interval_s: numValue('#in-interval'),
        min_samples: numValue('#in-samples'),
      };
      return model;
    };

    const clearIssues = () => {
      banner.hidden = true;
      banner.textContent = '';
      for (const ul of root.querySelectorAll('ul.issues')) ul.remove();
    };

    const renderIssues = (issues: ValidationIssueDoc[]) => {
      const general: string[] = [];
      const byField = new Map<string, ValidationIssueDoc[]>();
      for (const issue of issues) {
        const field = ISSUE_FIELDS[issue.code];
        if (field && root.querySelector(`#${field}`)) {
          const bucket = byField.get(field) ?? [];
          bucket.push(issue);
          byField.set(field, bucket);
        } else {
          general.push(`${issue.code}: ${issue.message}`);
        }
      }
      for (const [field, fieldIssues] of byField) {
        const ul = document.createElement('ul');
        ul.className = 'issues';
        ul.innerHTML = fieldIssues
          .map((i) => `<li><code>${esc(i.code)}</code> ${esc(i.message)}</li>`)
          .join('');
        root.querySelector(`#${field}`)!.appendChild(ul);
      }
      if (general.length) {
        banner.textContent = general.join('; ');
        banner.hidden = false;
      }
    };

    const submit = async () => {
      clearIssues();
      const model = readModel();
      const issues = model.validate(
        { clusters: topo.clusters, maxDivert: topo.max_divert },
        experiments,
      );
      if (issues.length) {
        renderIssues(issues);
        return;
      }
      const doc = model.toSpecDoc();
      try {
        await api.createExperiment(doc);
        await api.startExperiment(doc.id);
      } catch (err) {
        if (err instanceof ApiRequestError) {
          const serverIssues = err.issues();
          if (serverIssues.length) {
            renderIssues(serverIssues);
          } else {
            renderIssues([{ code: err.code, message: err.message }]);
          }
          experiments = (await api.listExperiments()).experiments;
          renderList(experiments);
          return;
        }
        throw err;
      }
      location.hash = `#/experiments/${encodeURIComponent(doc.id)}`;
    };

    form.addEventListener('submit', (ev) => {
      ev.preventDefault();
      void submit();
    });
  })();

  return () => {
    stopped = true;
  };
}

// -- live view ---------------------------------------------------------------------

function liveHtml(exp: ExperimentDoc): string {
  const rows = exp.spec.tracked_commands
    .map(
      (cmd, i) => `
  <section class="command-row">
    <h3>${esc(cmd)}</h3>
    <div class="panels">
      <div id="plot-${i}-control"></div>
      <div id="plot-${i}-experiment"></div>
    </div>
  </section>`,
    )
    .join('');
  const legend = PLOT_OUTCOMES.map(
    (o) => `<span class="key key-${o}">${o}</span>`,
  ).join(' ');
  return `
<header>
  <h1><a href="#/">chaoslab</a> / ${esc(exp.id)}</h1>
  <p class="statusline">
    <span id="phase">${phaseBadge(exp.phase)}</span>
    <span id="remaining"></span>
    <span id="stale" class="live-dot">live</span>
    <button id="abort-btn" type="button">abort</button>
    <a id="report-link" href="#/experiments/${encodeURIComponent(exp.id)}/report" hidden>
      view report</a>
  </p>
  <div class="banner error" id="live-banner" hidden></div>
  <p class="legend">${legend}</p>
</header>
${rows}
<section class="command-row">
  <h3>stream starts per second</h3>
  <div class="panels"><div id="plot-sps"></div></div>
</section>
<section>
  <h3>latest bucket</h3>
  <table class="readout" id="readout"><tbody></tbody></table>
</section>`;
}

function renderLiveView(api: ApiClient, root: HTMLElement, id: string): Cleanup {
  let stopped = false;
  let stream: BucketStream | null = null;
  root.innerHTML = `<p class="loading">loading experiment ${esc(id)}…</p>`;

  void (async () => {
    let exp: ExperimentDoc;
    try {
      exp = await api.getExperiment(id);
    } catch (err) {
      if (!stopped) root.innerHTML = errorBlock(err);
      return;
    }
    if (stopped) return;

    const tracked = exp.spec.tracked_commands;
    const model = new LivePlotModel(tracked);
    root.innerHTML = liveHtml(exp);

    const phaseEl = root.querySelector<HTMLSpanElement>('#phase')!;
    const remainingEl = root.querySelector<HTMLSpanElement>('#remaining')!;
    const staleEl = root.querySelector<HTMLSpanElement>('#stale')!;
    const abortBtn = root.querySelector<HTMLButtonElement>('#abort-btn')!;
    const reportLink = root.querySelector<HTMLAnchorElement>('#report-link')!;
    const bannerEl = root.querySelector<HTMLDivElement>('#live-banner')!;
    const readoutBody = root.querySelector<HTMLTableSectionElement>('#readout tbody')!;

    const applyDoc = (doc: ExperimentDoc) => {
      phaseEl.innerHTML = phaseBadge(doc.phase);
      const terminal = doc.phase === 'Completed' || doc.phase === 'Aborted';
      abortBtn.hidden = terminal;
      reportLink.hidden = !terminal;
      if (doc.phase === 'Aborted' && doc.abort_reason) {
        bannerEl.textContent = `aborted: ${doc.abort_reason}`;
        bannerEl.hidden = false;
      }
      if (terminal && doc.ended_at_ms !== null) {
        remainingEl.textContent = `ended at ${fmtMs(doc.ended_at_ms)}`;
      }
    };

    const redraw = () => {
      tracked.forEach((cmd, i) => {
        const rows = model.commands.get(cmd)!;
        for (const g of GROUP_LABELS) {
          const panel = root.querySelector<HTMLDivElement>(`#plot-${i}-${g}`)!;
          panel.innerHTML = renderPlot(g, commandLines(rows[g]));
        }
      });
      root.querySelector<HTMLDivElement>('#plot-sps')!.innerHTML = renderPlot(
        'starts per bucket',
        spsLines(model),
      );
      if (model.phase) {
        phaseEl.innerHTML = phaseBadge(model.phase);
      }
      if (model.remainingMs !== null) {
        remainingEl.textContent = `${fmtMs(model.remainingMs)} remaining`;
      }
      const cells: string[] = [];
      for (const cmd of tracked) {
        for (const g of GROUP_LABELS) {
          const counts = model.latest(cmd, g);
          if (!counts) continue;
          cells.push(
            `<tr><th>${esc(cmd)} / ${g}</th>` +
              PLOT_OUTCOMES.map((o) => `<td class="num">${counts[o]}</td>`).join('') +
              `</tr>`,
          );
        }
      }
      for (const g of GROUP_LABELS) {
        const sps = model.latestSps(g);
        if (!sps) continue;
        cells.push(
          `<tr><th>sps / ${g}</th><td class="num">${sps.starts} starts</td>` +
            `<td class="num" colspan="2">${sps.requests} requests</td></tr>`,
        );
      }
      readoutBody.innerHTML = cells.join('');
    };

    applyDoc(exp);
    redraw();

    abortBtn.addEventListener('click', () => {
      abortBtn.disabled = true;
      void (async () => {
        try {
          const doc = await api.abortExperiment(id);
          applyDoc(doc);
        } catch (err) {
          bannerEl.textContent =
            err instanceof ApiRequestError ? `${err.code}: ${err.message}` : String(err);
          bannerEl.hidden = false;
          abortBtn.disabled = false;
        }
      })();
    });

    stream = new BucketStream(api.streamUrl(id), {
      onBucket: (doc) => {
        model.ingest(doc);
        redraw();
      },
      onEnd: (doc) => {
        applyDoc(doc);
        staleEl.textContent = 'stream closed';
        staleEl.classList.remove('stale');
      },
      onStale: (stale) => {
        staleEl.classList.toggle('stale', stale);
        staleEl.textContent = stale ? 'stream stale – reconnecting…' : 'live';
      },
    });
    if (exp.phase !== 'Draft' && exp.phase !== 'Validated') {
      stream.start();
    } else {
      staleEl.textContent = 'not started';
    }
  })();

  return () => {
    stopped = true;
    stream?.stop();
  };
}

// -- report view -------------------------------------------------------------------

function countsTable(entry: {
  control: Record<string, number>;
  experiment: Record<string, number>;
  control_fractions: Record<string, number>;
  experiment_fractions: Record<string, number>;
}): string {
  const outcomes = [...new Set([...Object.keys(entry.control), ...Object.keys(entry.experiment)])].sort();
  const rows = outcomes
    .map((o) => {
      const c = entry.control[o] ?? 0;
      const e = entry.experiment[o] ?? 0;
      const cf = entry.control_fractions[o];
      const ef = entry.experiment_fractions[o];
      return (
        `<tr><th>${esc(o)}</th>` +
        `<td class="num">${c}${cf !== undefined ? ` (${fmtNum(cf)})` : ''}</td>` +
        `<td class="num">${e}${ef !== undefined ? ` (${fmtNum(ef)})` : ''}</td></tr>`
      );
    })
    .join('');
  return (
    `<table class="report-table"><thead><tr><th>outcome</th>` +
    `<th>control</th><th>experiment</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

function reportHtml(rep: ReportDoc, id: string): string {
  const v = rep.verdict;
  const reasons = v.reasons
    .map(
      (r) =>
        `<li><code>${esc(r.code)}</code> ${esc(r.message)} ` +
        `(measured ${fmtNum(r.measured)}, threshold ${fmtNum(r.threshold)})</li>`,
    )
    .join('');
  const cmp = rep.comparison;
  const commands = cmp.commands
    .map(
      (c) => `
  <section class="command-row">
    <h3>${esc(c.command)}${c.missing ? ' <span class="badge phase-aborted">missing</span>' : ''}</h3>
    ${countsTable(c)}
  </section>`,
    )
    .join('');
  const timeline = rep.timeline
    .map((t) => `<li>${esc(t.from)} → ${esc(t.to)} at ${fmtMs(t.at_ms)}</li>`)
    .join('');
  const teardown = rep.teardown.complete
    ? '<p>teardown complete: baseline routing and injection fully restored.</p>'
    : `<ul class="issues">${rep.teardown.issues
        .map((i) => `<li>${esc(i)}</li>`)
        .join('')}</ul>`;
  return `
<header>
  <h1><a href="#/">chaoslab</a> / <a href="#/experiments/${encodeURIComponent(id)}">${esc(
    id,
  )}</a> / report</h1>
  <p class="subtitle">scenario <strong>${esc(rep.scenario)}</strong>
    &middot; ${esc(rep.clock_mode)} clock
    &middot; ${phaseBadge(rep.state.phase)}
    ${rep.state.abort_reason ? `&middot; ${esc(rep.state.abort_reason)}` : ''}</p>
</header>
<div class="verdict verdict-${v.result}">
  <strong>${esc(v.result)}</strong>
  ${reasons ? `<ul>${reasons}</ul>` : ''}
</div>
<section>
  <h3>groups</h3>
  <table class="report-table"><tbody>
    <tr><th>baseline</th><td>${esc(rep.groups.baseline)}</td></tr>
    <tr><th>control</th><td>${esc(rep.groups.control)}</td></tr>
    <tr><th>experiment</th><td>${esc(rep.groups.experiment)}</td></tr>
  </tbody></table>
</section>
<section>
  <h3>stream starts per second</h3>
  <table class="report-table"><thead>
    <tr><th></th><th>control</th><th>experiment</th></tr></thead><tbody>
    <tr><th>requests</th><td class="num">${cmp.requests.control}</td>
        <td class="num">${cmp.requests.experiment}</td></tr>
    <tr><th>stream starts</th><td class="num">${cmp.stream_starts.control}</td>
        <td class="num">${cmp.stream_starts.experiment}</td></tr>
    <tr><th>normalized SPS</th><td class="num">${fmtNum(cmp.normalized_sps.control)}</td>
        <td class="num">${fmtNum(cmp.normalized_sps.experiment)}</td></tr>
  </tbody></table>
  <p class="subtitle">ratio ${fmtNum(cmp.normalized_sps.ratio)}
    &middot; difference ${fmtNum(cmp.normalized_sps.difference)}
    &middot; z ${fmtNum(cmp.normalized_sps.z)}</p>
</section>
${commands}
<section>
  <h3>timeline</h3>
  <ol class="timeline">${timeline}</ol>
</section>
<section>
  <h3>teardown</h3>
  ${teardown}
</section>`;
}

function renderReportView(api: ApiClient, root: HTMLElement, id: string): Cleanup {
  let stopped = false;
  root.innerHTML = `<p class="loading">loading report for ${esc(id)}…</p>`;

  void (async () => {
    try {
      const rep = await api.report(id);
      if (!stopped) root.innerHTML = reportHtml(rep, id);
    } catch (err) {
      if (stopped) return;
      if (err instanceof ApiRequestError && err.code === 'no_report') {
        root.innerHTML =
          `<div class="banner">${esc(err.message)}</div>` +
          `<p><a href="#/experiments/${encodeURIComponent(id)}">back to the live view</a></p>`;
      } else {
        root.innerHTML = errorBlock(err);
      }
    }
  })();

  return () => {
    stopped = true;
  };
}
