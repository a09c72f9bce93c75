// Page wiring: upload a CSV, type questions, toggle feasible/recommended,
// read reasoning, keep a session history. At most one request in flight.

import { ApiClient, encodeCsvBase64, type VisualizeResponse } from './api.js';
import { parseCsv } from './csv.js';
import { assertRendererCoverage } from './renderers.js';
import { renderDataTable, renderResult } from './views.js';

interface HistoryEntry {
  prompt: string;
  mode: 'recommend' | 'feasible';
  response: VisualizeResponse;
}

const api = new ApiClient('');

let csvText: string | null = null;
let csvName = '';
let busy = false;
const history: HistoryEntry[] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setStatus(text: string, isError = false): void {
  const status = el<HTMLParagraphElement>('status');
  status.textContent = text;
  status.className = isError ? 'mv-status mv-error' : 'mv-status';
}

function showPreview(): void {
  if (csvText === null) return;
  const table = parseCsv(csvText);
  el('dataset-name').textContent = `${csvName}: ${table.rows.length} rows, ${table.header.length} columns`;
  el('preview').innerHTML = renderDataTable(table, 5);
}

async function submitQuery(): Promise<void> {
  if (busy) return;
  if (csvText === null) {
    setStatus('Upload a CSV first.', true);
    return;
  }
  const prompt = el<HTMLInputElement>('prompt').value.trim();
  if (!prompt) {
    setStatus('Type a question about the data.', true);
    return;
  }
  const mode = el<HTMLSelectElement>('mode').value === 'feasible' ? 'feasible' : 'recommend';
  busy = true;
  setStatus('Thinking…');
  el<HTMLButtonElement>('ask').disabled = true;
  try {
    const response = await api.visualize(encodeCsvBase64(csvText), prompt, mode);
    history.push({ prompt, mode, response });
    renderHistory();
    setStatus('');
  } catch (err) {
    // API errors surface inline; the session (dataset, history) is kept
    setStatus(err instanceof Error ? err.message : String(err), true);
  } finally {
    busy = false;
    el<HTMLButtonElement>('ask').disabled = false;
  }
}

function renderHistory(): void {
  const container = el('results');
  container.innerHTML = history
    .map((entry, i) => {
      const kindNote = entry.response.kind === 'table' ? ', table' : '';
      return (
        `<section class="mv-entry" data-entry="${i}">` +
        `<h3>${escapeHtml(entry.prompt)}<span class="mv-muted"> (${entry.mode}${kindNote})</span></h3>` +
        renderResult(entry.response) +
        `<button class="mv-use-result" data-use="${i}">Explore this result as the dataset</button>` +
        `</section>`
      );
    })
    .reverse()
    .join('');
  bindResultEvents(container);
}

function escapeHtml(s: string): string {
  return s.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

function bindResultEvents(container: HTMLElement): void {
  container.querySelectorAll<HTMLButtonElement>('.mv-tab').forEach((tab) => {
    tab.addEventListener('click', () => {
      const section = tab.closest('.mv-entry');
      if (!section) return;
      section.querySelectorAll('.mv-tab').forEach((t) => t.classList.remove('mv-tab-active'));
      tab.classList.add('mv-tab-active');
      section.querySelectorAll<HTMLElement>('[data-pane]').forEach((pane) => {
        pane.classList.toggle('mv-hidden', pane.dataset['pane'] !== tab.dataset['tab']);
      });
    });
  });
  // each answer can feed the next query: adopt a response's dataset
  container.querySelectorAll<HTMLButtonElement>('.mv-use-result').forEach((btn) => {
    btn.addEventListener('click', () => {
      const entry = history[Number(btn.dataset['use'])];
      if (!entry) return;
      csvText = entry.response.dataset_csv;
      csvName = `result of "${entry.prompt}"`;
      showPreview();
      setStatus('Dataset replaced with the transformed result.');
    });
  });
}

async function init(): Promise<void> {
  try {
    const catalog = await api.charts();
    assertRendererCoverage(catalog.templates.map((t) => t.id));
    setStatus(`Connected; ${catalog.templates.length} chart templates available.`);
  } catch (err) {
    setStatus(`API unreachable or renderer mismatch: ${err instanceof Error ? err.message : err}`, true);
  }

  el<HTMLInputElement>('file').addEventListener('change', async (event) => {
    const input = event.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) return;
    csvText = await file.text();
    csvName = file.name;
    showPreview();
    setStatus('');
  });
  el<HTMLButtonElement>('ask').addEventListener('click', () => void submitQuery());
  el<HTMLInputElement>('prompt').addEventListener('keydown', (event) => {
    if ((event as KeyboardEvent).key === 'Enter') void submitQuery();
  });
}

document.addEventListener('DOMContentLoaded', () => void init());
