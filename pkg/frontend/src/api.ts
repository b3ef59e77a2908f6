/** Typed client for the annotation service REST surface. */

export interface Scale {
  min: number;
  max: number;
}

export interface SessionView {
  phase: number;
  phase_count: number;
  status: "awaiting_annotation" | "ready_to_select" | "complete";
  pending: number;
  pending_total: number;
  selected_total: number;
  budget: number;
  aspects: string[];
  scale: Scale;
}

export interface BatchItem {
  sample_id: string;
  source: string;
  references: string[];
  /** Keyed by blinded label ("System 1", ...); real system ids never reach the client. */
  outputs: Record<string, string>;
  scored: boolean;
}

export interface BatchView {
  phase: number;
  items: BatchItem[];
  aspects: string[];
  scale: Scale;
}

export interface ScoreEntry {
  sample_id: string;
  blinded_label: string;
  scores: Record<string, number>;
}

export class ApiError extends Error {
  constructor(
    message: string,
    public readonly status: number,
  ) {
    super(message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(detail, response.status);
  }
  return (await response.json()) as T;
}

export function getSession(): Promise<SessionView> {
  return request<SessionView>("/api/session");
}

export function getBatch(): Promise<BatchView> {
  return request<BatchView>("/api/batch");
}

export function postScores(entries: ScoreEntry[]): Promise<SessionView> {
  return request<SessionView>("/api/scores", {
    method: "POST",
    body: JSON.stringify({ entries }),
  });
}

export function advancePhase(): Promise<SessionView> {
  return request<SessionView>("/api/phase/advance", { method: "POST" });
}
