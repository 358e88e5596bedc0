/** Dashboard entry point: tab navigation and DOM wiring for the wizard,
 * the what-if explorer, and live run charts. All state lives in the
 * imported view classes; this file only renders and forwards events. */

import { ApiClient, ServiceError } from './api.js';
import { RunCharts, chartSvg, METRICS } from './charts.js';
import type { FeasibilityCell, PlanResponse } from './types.js';
import { WhatifPanel, baseFromConfig } from './whatif.js';
import { Wizard } from './wizard.js';

const api = new ApiClient('');

function esc(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

// ------------------------------------------------------------------ wizard

const wizard = new Wizard(api);
let lastPlan: PlanResponse | null = null;

function verdictBadge(feasible: boolean): string {
  return feasible
    ? '<span class="badge badge-ok">feasible</span>'
    : '<span class="badge badge-bad">infeasible</span>';
}

function renderPlan(plan: PlanResponse): string {
  const cfg = plan.config;
  const v = plan.verdict;
  const needs = v.required_layouts.join(' or ');
  const rationale = plan.rationale.map((line) => `<li>${esc(line)}</li>`).join('');
  const launch = plan.launch
    ? `<h3>Launch</h3><pre class="launch">${esc(plan.launch)}</pre>`
    : '';
  const downloads = [
    `<button id="dl-args" class="secondary">Download ARGS.json</button>`,
    plan.readme ? `<button id="dl-readme" class="secondary">Download Readme.md</button>` : '',
  ].join(' ');
  return `
  <div class="plan-head">
    <h2>${esc(cfg.model)} · ${esc(cfg.method)}</h2>
    ${verdictBadge(v.feasible)}
  </div>
  <table class="kv">
    <tr><td>dataset</td><td>${esc(cfg.dataset)}</td></tr>
    <tr><td>world</td><td>${cfg.world.count} × ${Math.round(cfg.world.per_device_mem / 2 ** 30)} GB</td></tr>
    <tr><td>needs</td><td>${esc(needs)}</td></tr>
    <tr><td>epochs / lr</td><td>${cfg.epochs} / ${cfg.lr}</td></tr>
  </table>
  <h3>Rationale</h3>
  <ul class="rationale">${rationale}</ul>
  ${launch}
  <div class="downloads">${downloads}</div>
  <p class="note">Requested overrides (epochs, learning rate, tracker) are applied when the
  run is launched; the plan above is the service's answer verbatim.</p>`;
}

function download(name: string, text: string): void {
  const url = URL.createObjectURL(new Blob([text], { type: 'text/plain' }));
  const a = document.createElement('a');
  a.href = url;
  a.download = name;
  a.click();
  URL.revokeObjectURL(url);
}

function renderWizard(): void {
  const view = wizard.view();
  const root = el('wizard');
  if (view.plan) {
    lastPlan = view.plan;
    root.innerHTML = renderPlan(view.plan);
    const args = document.getElementById('dl-args');
    args?.addEventListener('click', () =>
      download('ARGS.json', JSON.stringify(view.plan!.config, null, 2) + '\n'));
    const readme = document.getElementById('dl-readme');
    readme?.addEventListener('click', () => download('Readme.md', view.plan!.readme!));
    el('whatif-open').removeAttribute('disabled');
    return;
  }
  const q = view.question;
  if (!q) {
    const banner = view.error
      ? `<div class="error-banner">${esc(view.error)}</div>`
      : '<div class="error-banner">no plan yet</div>';
    root.innerHTML = `${banner}<button id="wiz-back" class="secondary">Back</button>`;
    document.getElementById('wiz-back')?.addEventListener('click', () => {
      wizard.back();
      renderWizard();
    });
    return;
  }
  const choices = q.choices
    ? `<div class="choices">${q.choices
        .map((c) => `<button class="choice" data-value="${esc(c)}">${esc(c)}</button>`)
        .join('')}</div>`
    : '';
  const error = view.error ? `<div class="inline-error">${esc(view.error)}</div>` : '';
  root.innerHTML = `
  <div class="progress">${view.index}/${view.total}</div>
  <h2 class="prompt">${q.number}. ${esc(q.prompt)}</h2>
  ${error}
  <form id="wiz-form" class="answer-row">
    <input id="wiz-input" autocomplete="off" placeholder="${esc(q.default)}" value="${esc(
      view.answers[q.key] ?? '',
    )}">
    <button type="submit">Next</button>
    ${view.index > 0 ? '<button type="button" id="wiz-back" class="secondary">Back</button>' : ''}
  </form>
  ${choices}`;
  const input = el('wiz-input') as HTMLInputElement;
  input.focus();
  el('wiz-form').addEventListener('submit', (e) => {
    e.preventDefault();
    void wizard.answer(input.value).then(renderWizard, showFatal);
  });
  document.getElementById('wiz-back')?.addEventListener('click', () => {
    wizard.back();
    renderWizard();
  });
  root.querySelectorAll<HTMLButtonElement>('.choice').forEach((btn) =>
    btn.addEventListener('click', () => {
      void wizard.answer(btn.dataset.value!).then(renderWizard, showFatal);
    }),
  );
}

// ------------------------------------------------------------------ what-if

let panel: WhatifPanel | null = null;

function renderCell(cell: FeasibilityCell[]): string {
  return cell
    .map((c) => (c.count === 1 ? `${c.per_device_gib}` : `${c.count}x${c.per_device_gib}`))
    .join(' | ');
}

async function renderMatrix(): Promise<void> {
  const { table, methods } = await api.feasibility();
  const buckets = Object.keys(table);
  const head = methods.map((m) => `<th>${esc(m)}</th>`).join('');
  const rows = buckets
    .map((b) => {
      const cells = methods.map((m) => `<td>${renderCell(table[b][m])}</td>`).join('');
      return `<tr><th>${esc(b)}</th>${cells}</tr>`;
    })
    .join('');
  el('matrix').innerHTML = `<table class="matrix"><tr><th>GB needed</th>${head}</tr>${rows}</table>`;
}

function renderWhatif(): void {
  const root = el('whatif-panel');
  if (!panel) {
    root.innerHTML = '<p class="note">Finish the wizard to seed a scenario, or edit the fields after loading one.</p>';
    return;
  }
  const r = panel.result;
  const merged = { ...panel.base, ...panel.overrides };
  const verdict = r
    ? `<div class="plan-head"><h3>${esc(r.model)} (${esc(r.size_bucket)}) · ${esc(r.method)} on ${esc(
        r.gpus,
      )}</h3>${verdictBadge(r.verdict.feasible)}</div>
      <p>needs ${esc(r.verdict.required_layouts.join(' or '))}${
        r.verdict.satisfied_layout ? `; satisfied by ${esc(r.verdict.satisfied_layout)}` : ''
      }</p>
      ${
        Object.keys(r.diff).length
          ? `<p class="diff">${Object.entries(r.diff)
              .map(([k, d]) => `${esc(k)}: ${esc(String(d.from))} → ${esc(d.to)}`)
              .join('; ')}</p>`
          : '<p class="diff">no edits</p>'
      }`
    : panel.error
      ? `<div class="inline-error">${esc(panel.error)}</div>`
      : '';
  root.innerHTML = `
  <div class="whatif-form">
    ${(['model', 'method', 'gpus'] as const)
      .map(
        (key) => `<label>${key}
      <input data-key="${key}" value="${esc(merged[key] ?? '')}" placeholder="${esc(
        panel!.base[key] ?? '',
      )}"></label>`,
      )
      .join('')}
    <button id="whatif-apply">Check</button>
    <button id="whatif-revert" class="secondary" ${panel.dirty ? '' : 'disabled'}>Revert</button>
  </div>
  <div class="verdict">${verdict}</div>`;
  el('whatif-apply').addEventListener('click', () => {
    root.querySelectorAll<HTMLInputElement>('input[data-key]').forEach((input) => {
      panel!.edit(input.dataset.key as 'model' | 'method' | 'gpus', input.value);
    });
    void panel!.refresh().then(renderWhatif, showFatal);
  });
  el('whatif-revert').addEventListener('click', () => {
    void panel!.revert().then(renderWhatif, showFatal);
  });
}

function openWhatif(): void {
  if (lastPlan) {
    panel = new WhatifPanel(api, baseFromConfig(lastPlan.config));
    void panel.refresh().then(renderWhatif, showFatal);
  }
  renderWhatif();
}

// ------------------------------------------------------------------ runs

let charts: RunCharts | null = null;
let streamHandle: { abort: () => void } | null = null;

function renderCharts(): void {
  if (!charts) return;
  el('charts').innerHTML = METRICS.map(
    (m) => `<div class="chart-card">${chartSvg(charts!.series[m])}</div>`,
  ).join('');
}

async function watchRun(runId: string): Promise<void> {
  streamHandle?.abort();
  charts = new RunCharts(runId);
  renderCharts();
  el('run-error').textContent = '';
  let pending = false;
  const handle = api.stream(runId, (record) => {
    charts!.push(record);
    if (!pending) {
      pending = true;
      requestAnimationFrame(() => {
        pending = false;
        renderCharts();
      });
    }
  });
  streamHandle = handle;
  try {
    await handle.done;
    renderCharts();
  } catch (e) {
    el('run-error').textContent =
      e instanceof ServiceError ? e.message : `stream failed: ${String(e)}`;
  }
}

async function renderRuns(): Promise<void> {
  const runs = await api.runs();
  const list = el('run-list');
  if (runs.length === 0) {
    list.innerHTML = '<p class="note">No runs yet. Start one with the CLI dry-run command.</p>';
    return;
  }
  list.innerHTML = runs
    .map((r) => `<button class="run-link" data-run="${esc(r)}">${esc(r)}</button>`)
    .join('');
  list.querySelectorAll<HTMLButtonElement>('.run-link').forEach((btn) =>
    btn.addEventListener('click', () => void watchRun(btn.dataset.run!)),
  );
}

// ------------------------------------------------------------------ shell

function showFatal(e: unknown): void {
  el('fatal').textContent = e instanceof Error ? e.message : String(e);
}

function showTab(name: string): void {
  document.querySelectorAll<HTMLElement>('.page').forEach((page) => {
    page.classList.toggle('show', page.id === `page-${name}`);
  });
  document.querySelectorAll<HTMLButtonElement>('.nav button').forEach((btn) => {
    btn.classList.toggle('active', btn.dataset.tab === name);
  });
  if (name === 'whatif') {
    void renderMatrix().catch(showFatal);
    renderWhatif();
  }
  if (name === 'runs') void renderRuns().catch(showFatal);
}

function init(): void {
  document.querySelectorAll<HTMLButtonElement>('.nav button').forEach((btn) =>
    btn.addEventListener('click', () => showTab(btn.dataset.tab!)),
  );
  el('whatif-open').addEventListener('click', () => {
    showTab('whatif');
    openWhatif();
  });
  void wizard.load().then(renderWizard, showFatal);
  showTab('wizard');
}

init();
