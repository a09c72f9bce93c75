// Pure view builders for a pipeline response: chart tabs or a table,
// followed by the reasoning panels. app.ts only wires events around the
// HTML these produce.

import type { VisualizeResponse } from './api.js';
import { parseCsv, type DataTable } from './csv.js';
import { renderChart } from './renderers.js';
import { renderTracePanels } from './trace.js';

function esc(s: string): string {
  return s
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function renderDataTable(table: DataTable, maxRows = 50): string {
  const head = table.header.map((h) => `<th>${esc(h)}</th>`).join('');
  const body = table.rows
    .slice(0, maxRows)
    .map((row) => `<tr>${row.map((c) => `<td>${esc(c)}</td>`).join('')}</tr>`)
    .join('');
  const note =
    table.rows.length > maxRows
      ? `<p class="mv-muted">Showing ${maxRows} of ${table.rows.length} rows.</p>`
      : '';
  return `<table class="mv-table"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>${note}`;
}

// full result view: chart tabs (feasible mode) or single chart, or the
// tabular view for kind=table; reasoning panels always follow
export function renderResult(response: VisualizeResponse): string {
  const table = parseCsv(response.dataset_csv);
  let main: string;
  if (response.kind === 'table') {
    main = `<div class="mv-result-table">${renderDataTable(table)}</div>`;
  } else if (response.charts.length === 1) {
    const spec = response.charts[0]!;
    main = `<div class="mv-chart-wrap" data-template="${esc(spec.template_id)}">${renderChart(spec, table)}</div>`;
  } else {
    const tabs = response.charts
      .map(
        (spec, i) =>
          `<button class="mv-tab${i === 0 ? ' mv-tab-active' : ''}" data-tab="${i}">${esc(spec.template_id)}</button>`,
      )
      .join('');
    const panes = response.charts
      .map(
        (spec, i) =>
          `<div class="mv-pane${i === 0 ? '' : ' mv-hidden'}" data-pane="${i}" data-template="${esc(spec.template_id)}">${renderChart(spec, table)}</div>`,
      )
      .join('');
    main = `<div class="mv-tabs">${tabs}</div>${panes}`;
  }
  return main + renderTracePanels(response.trace);
}
