// Typed client for the visualize HTTP API. The frontend performs no
// analytics of its own: everything rendered traces back to the fields
// returned here.

export interface ChartSpec {
  template_id: string;
  assignments: Record<string, string>;
  options: Record<string, unknown>;
  reasoning: string;
}

export interface StepTrace {
  step_id: string;
  reasoning: string;
  attempts: number;
  fell_back: boolean;
  elapsed: number;
  artifacts: Record<string, unknown>;
}

export interface VisualizeResponse {
  kind: 'charts' | 'table';
  charts: ChartSpec[];
  dataset_csv: string;
  trace: StepTrace[];
}

export interface RequestOptions {
  reiteration?: boolean;
  attr_filter?: boolean;
  sql_suggestions?: boolean;
  chart_preference?: 'user_first' | 'model_first';
}

export interface CatalogSlot {
  slot_id: string;
  allowed: string[];
  required: boolean;
}

export interface CatalogTemplate {
  id: string;
  display_name: string;
  taxonomy_category: string;
  renders_as: string;
  second_method: boolean;
  slots: CatalogSlot[];
  [key: string]: unknown;
}

export interface CatalogDoc {
  templates: CatalogTemplate[];
  [key: string]: unknown;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function readError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const doc = (await resp.json()) as { error?: string };
    if (doc.error) detail = doc.error;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(readonly baseUrl: string = '') {}

  async health(): Promise<boolean> {
    const resp = await fetch(`${this.baseUrl}/v1/health`);
    return resp.ok;
  }

  async charts(): Promise<CatalogDoc> {
    const resp = await fetch(`${this.baseUrl}/v1/charts`);
    if (!resp.ok) throw await readError(resp);
    return (await resp.json()) as CatalogDoc;
  }

  async visualize(
    csvBase64: string,
    prompt: string,
    mode: 'recommend' | 'feasible',
    options: RequestOptions = {},
  ): Promise<VisualizeResponse> {
    const resp = await fetch(`${this.baseUrl}/v1/visualize`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ csv_base64: csvBase64, prompt, mode, options }),
    });
    if (!resp.ok) throw await readError(resp);
    return (await resp.json()) as VisualizeResponse;
  }
}

export function encodeCsvBase64(text: string): string {
  const bytes = new TextEncoder().encode(text);
  let binary = '';
  for (const b of bytes) binary += String.fromCharCode(b);
  return btoa(binary);
}
