// Reasoning panels: one collapsible <details> per executed pipeline step,
// in pipeline order, collapsed by default so the chart stays on top.

import type { StepTrace } from './api.js';

const STEP_TITLES: Record<string, string> = {
  reiterate: 'Reiteration',
  decompose: 'Data analysis',
  attr_filter: 'Attribute filter',
  sql_transform: 'SQL transformation',
  charting_filter: 'Charting attribute filter',
  datatype: 'Datatype classification',
  chart_select: 'Chart selection',
  encode: 'Chart encoding',
};

function esc(s: string): string {
  return s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function summarizeArtifacts(step: StepTrace): string {
  const parts: string[] = [];
  const a = step.artifacts;
  if (typeof a['sql'] === 'string') parts.push(`<pre class="mv-sql">${esc(a['sql'])}</pre>`);
  if (Array.isArray(a['selected'])) {
    parts.push(`<p>Selected: <code>${esc((a['selected'] as string[]).join(', '))}</code></p>`);
  }
  if (Array.isArray(a['feasible'])) {
    parts.push(`<p>Feasible charts: <code>${esc((a['feasible'] as string[]).join(', ') || 'none')}</code></p>`);
  }
  if (typeof a['command'] === 'string') parts.push(`<p>Command: ${esc(a['command'])}</p>`);
  if (a['datatypes'] && typeof a['datatypes'] === 'object') {
    const entries = Object.entries(a['datatypes'] as Record<string, string>)
      .map(([k, v]) => `${k}: ${v}`)
      .join(', ');
    parts.push(`<p>Datatypes: <code>${esc(entries)}</code></p>`);
  }
  if (a['assignments'] && typeof a['assignments'] === 'object') {
    const entries = Object.entries(a['assignments'] as Record<string, string>)
      .map(([k, v]) => `${k} ← ${v}`)
      .join(', ');
    parts.push(`<p>Encoding: <code>${esc(entries)}</code></p>`);
  }
  return parts.join('');
}

export function renderTracePanels(trace: StepTrace[]): string {
  const panels = trace.map((step) => {
    const title = STEP_TITLES[step.step_id] ?? step.step_id;
    const badges: string[] = [];
    if (step.attempts > 1) badges.push(`${step.attempts} attempts`);
    if (step.fell_back) badges.push('fell back');
    const badge = badges.length
      ? ` <span class="mv-badge">${esc(badges.join(', '))}</span>`
      : '';
    const reasoning = step.reasoning
      ? `<p class="mv-reasoning">${esc(step.reasoning)}</p>`
      : '<p class="mv-reasoning mv-muted">No reasoning recorded.</p>';
    return (
      `<details class="mv-step" data-step="${esc(step.step_id)}">` +
      `<summary>${esc(title)}${badge}</summary>` +
      reasoning +
      summarizeArtifacts(step) +
      `</details>`
    );
  });
  return `<div class="mv-trace">${panels.join('')}</div>`;
}
