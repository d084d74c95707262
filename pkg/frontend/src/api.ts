// Typed client for the review service's HTTP+JSON API.  The fetch function
// is injectable so tests can point the client at a spawned server.

export type QueueRow = {
  utterance_id: string;
  status: "pending" | "done";
  max_gap: number;
  text: string;
  evidence_types: string[];
};

export type Span = { entity_type: string; start: number; end: number };

export type Evidence = { span: Span; p_tag: string; g_tag: string; gap: number };

export type Decision = {
  utterance_id: string;
  verdict: string;
  annotator_id: string;
  timestamp: number;
  new_tags: string[] | null;
};

export type ReviewItem = {
  utterance_id: string;
  tokens: string[];
  current_tags: string[];
  evidence: Evidence[];
  status: "pending" | "done";
  decision: Decision | null;
};

export type TagSet = { entity_types: string[]; labels: string[] };

export type Stats = {
  pending: number;
  done: number;
  corrected: number;
  accepted: number;
  flag_fraction_of_train: number;
};

export type MergeResult = {
  output: string;
  utterances: number;
  decisions_applied: number;
  corrected: number;
  accepted: number;
};

export type DecisionBody = {
  verdict: "correct_as_is" | "corrected";
  annotator_id: string;
  new_tags?: string[];
};

// Server-rejected request: status and the detail message, shown verbatim.
export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

function detailToMessage(body: unknown): string {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    if (typeof detail === "string") return detail;
    return JSON.stringify(detail);
  }
  return JSON.stringify(body);
}

export type Api = ReturnType<typeof makeApi>;

export function makeApi(base = "", fetchFn: typeof fetch = fetch) {
  async function request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetchFn(base + path, init);
    const body = await response.json();
    if (!response.ok) {
      throw new ApiError(response.status, detailToMessage(body));
    }
    return body as T;
  }

  function post<T>(path: string, payload: unknown): Promise<T> {
    return request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  return {
    tagset: () => request<TagSet>("/api/tagset"),
    queue: (status?: "pending" | "done") =>
      request<QueueRow[]>(
        "/api/queue" + (status ? `?status=${status}` : "")
      ),
    item: (id: string) =>
      request<ReviewItem>(`/api/items/${encodeURIComponent(id)}`),
    decide: (id: string, body: DecisionBody) =>
      post<ReviewItem>(`/api/items/${encodeURIComponent(id)}/decision`, body),
    stats: () => request<Stats>("/api/stats"),
    merge: (output?: string) =>
      post<MergeResult>("/api/merge", output ? { output } : {}),
  };
}
