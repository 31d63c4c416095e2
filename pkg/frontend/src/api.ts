/**
 * Fetch client for the tuning service. Pixels only ever arrive as PNGs
 * rendered server-side; nothing in the browser computes image data.
 */

/** Default server upload cap; oversized files never leave the browser. */
export const MAX_UPLOAD = 1 << 20;

export interface ApiError {
  status: number;
  message: string;
  field?: string;
}

export class RequestFailed extends Error {
  constructor(readonly err: ApiError) {
    super(err.message);
    this.name = "RequestFailed";
  }
}

async function fail(resp: Response): Promise<never> {
  let message = `${resp.status} ${resp.statusText}`;
  let field: string | undefined;
  try {
    const body = await resp.json();
    const detail = body?.detail;
    if (typeof detail === "string") {
      message = detail;
    } else if (detail && typeof detail.message === "string") {
      message = detail.message;
      field = typeof detail.field === "string" ? detail.field : undefined;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new RequestFailed({ status: resp.status, message, field });
}

async function okJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) await fail(resp);
  return resp.json() as Promise<T>;
}

export interface SessionInfo {
  id: string;
  step: number;
  width: number;
  height: number;
  channels: number;
  has_reference: boolean;
  created_at: string;
}

export async function createSession(
  base: string,
  file: File,
  step: number,
  reference?: File,
): Promise<SessionInfo> {
  const form = new FormData();
  form.append("file", file);
  form.append("step", String(step));
  if (reference) form.append("reference", reference);
  return okJson(await fetch(`${base}/sessions`, { method: "POST", body: form }));
}

export async function fetchPreview(base: string, sid: string): Promise<Blob> {
  const resp = await fetch(`${base}/sessions/${sid}/preview`, { cache: "no-store" });
  if (!resp.ok) await fail(resp);
  return resp.blob();
}

export async function fetchPipeline(base: string, sid: string): Promise<string> {
  const resp = await fetch(`${base}/sessions/${sid}/pipeline`, { cache: "no-store" });
  if (!resp.ok) await fail(resp);
  return resp.text();
}

export async function putPipeline(
  base: string,
  sid: string,
  text: string,
): Promise<{ stages: number }> {
  return okJson(
    await fetch(`${base}/sessions/${sid}/pipeline`, {
      method: "PUT",
      headers: { "Content-Type": "text/plain; charset=utf-8" },
      body: text,
    }),
  );
}

export async function appendStage(
  base: string,
  sid: string,
  body: Record<string, unknown>,
): Promise<{ stages: number; text: string }> {
  return okJson(
    await fetch(`${base}/sessions/${sid}/pipeline/stages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    }),
  );
}

export interface SweepCell {
  L: number;
  theta: number;
  png: string; // base64 PNG
  objective: number | null;
}

export interface SweepManifest {
  L: string;
  theta: string;
  gamma: number;
  amount: number;
  source: string;
  noise: string;
  cell_width: number;
  cell_height: number;
  cells: SweepCell[];
}

export async function fetchSweep(
  base: string,
  sid: string,
  query: string,
): Promise<SweepManifest> {
  return okJson(await fetch(`${base}/sessions/${sid}/sweep?${query}`, { cache: "no-store" }));
}

export async function listPresets(base: string): Promise<string[]> {
  const body = await okJson<{ presets: string[] }>(await fetch(`${base}/presets`));
  return body.presets;
}

export async function fetchPreset(
  base: string,
  name: string,
): Promise<{ name: string; text: string; stages: number }> {
  return okJson(await fetch(`${base}/presets/${name}`));
}

export interface TraceRow {
  iteration: number;
  fidelity: number | null;
  regularizer: number | null;
  total: number | null;
}

export interface RunStatus {
  status: "running" | "done" | "error";
  trace: TraceRow[];
  spec: string;
  error?: string;
}

export async function startSearch(
  base: string,
  sid: string,
  config: Record<string, unknown>,
): Promise<string> {
  const body = await okJson<{ run_id: string }>(
    await fetch(`${base}/sessions/${sid}/search`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    }),
  );
  return body.run_id;
}

export async function fetchRun(base: string, runId: string): Promise<RunStatus> {
  return okJson(await fetch(`${base}/runs/${runId}`, { cache: "no-store" }));
}
