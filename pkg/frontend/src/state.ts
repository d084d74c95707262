// Review session state and transitions, free of DOM concerns so the flow is
// unit-testable.  One controller per browser tab; the server's decision log
// is the arbiter across sessions.

import { Api, ApiError, QueueRow, ReviewItem, Stats, TagSet } from "./api.js";
import { bioError } from "./bio.js";

export type PendingDecision = {
  utteranceId: string;
  verdict: "correct_as_is" | "corrected";
  newTags: string[] | null;
};

export type Submission =
  | { kind: "idle" }
  | { kind: "saving" }
  | { kind: "rejected"; message: string }
  | { kind: "offline"; retained: PendingDecision };

export type ReviewState = {
  phase: "loading" | "ready" | "failed";
  loadError: string | null;
  annotatorId: string;
  tagset: TagSet | null;
  queue: QueueRow[];
  stats: Stats | null;
  active: ReviewItem | null;
  draft: string[] | null;
  draftError: string | null;
  submission: Submission;
};

function freshState(annotatorId: string): ReviewState {
  return {
    phase: "loading",
    loadError: null,
    annotatorId,
    tagset: null,
    queue: [],
    stats: null,
    active: null,
    draft: null,
    draftError: null,
    submission: { kind: "idle" },
  };
}

export class ReviewController {
  readonly state: ReviewState;
  private listeners: Array<() => void> = [];

  constructor(private api: Api, annotatorId: string) {
    this.state = freshState(annotatorId);
  }

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) listener();
  }

  // Load the tag set, queue page, and stats; called at startup and by the
  // retry affordance after a failure.
  async load(): Promise<void> {
    const s = this.state;
    s.phase = "loading";
    s.loadError = null;
    this.notify();
    try {
      const [tagset, queue, stats] = await Promise.all([
        this.api.tagset(),
        this.api.queue(),
        this.api.stats(),
      ]);
      s.tagset = tagset;
      s.queue = queue; // rendered in server order, never re-sorted
      s.stats = stats;
      s.phase = "ready";
      this.notify();
      const first = queue.find((row) => row.status === "pending");
      if (first) await this.open(first.utterance_id);
    } catch (error) {
      s.phase = "failed";
      s.loadError = String(error instanceof Error ? error.message : error);
      this.notify();
    }
  }

  async open(utteranceId: string): Promise<void> {
    const s = this.state;
    try {
      s.active = await this.api.item(utteranceId);
      s.draft = null;
      s.draftError = null;
      s.submission = { kind: "idle" };
    } catch (error) {
      s.phase = "failed";
      s.loadError = String(error instanceof Error ? error.message : error);
    }
    this.notify();
  }

  nextPendingId(afterId?: string): string | null {
    const rows = this.state.queue;
    const start = afterId
      ? rows.findIndex((row) => row.utterance_id === afterId) + 1
      : 0;
    for (let i = 0; i < rows.length; i++) {
      const row = rows[(start + i) % rows.length];
      if (row.status === "pending") return row.utterance_id;
    }
    return null;
  }

  async openNextPending(): Promise<void> {
    const next = this.nextPendingId(this.state.active?.utterance_id);
    if (next) {
      await this.open(next);
    } else {
      this.state.active = null;
      this.state.draft = null;
      this.notify();
    }
  }

  beginEdit(): void {
    const s = this.state;
    if (!s.active || s.active.status === "done") return;
    s.draft = [...s.active.current_tags];
    s.draftError = this.validateDraft(s.draft);
    s.submission = { kind: "idle" };
    this.notify();
  }

  cancelEdit(): void {
    this.state.draft = null;
    this.state.draftError = null;
    this.notify();
  }

  setDraftTag(position: number, label: string): void {
    const s = this.state;
    if (!s.draft || position < 0 || position >= s.draft.length) return;
    s.draft[position] = label;
    s.draftError = this.validateDraft(s.draft);
    this.notify();
  }

  private validateDraft(draft: string[]): string | null {
    const s = this.state;
    if (!s.tagset || !s.active) return "not ready";
    return bioError(draft, s.tagset.labels, s.active.tokens.length);
  }

  canSubmitDraft(): boolean {
    return this.state.draft !== null && this.state.draftError === null;
  }

  async accept(): Promise<void> {
    const active = this.state.active;
    if (!active || active.status === "done") return;
    await this.submit({
      utteranceId: active.utterance_id,
      verdict: "correct_as_is",
      newTags: null,
    });
  }

  async submitDraft(): Promise<void> {
    const s = this.state;
    if (!s.active || !this.canSubmitDraft()) return;
    await this.submit({
      utteranceId: s.active.utterance_id,
      verdict: "corrected",
      newTags: [...s.draft!],
    });
  }

  // Retry the decision retained after a network failure.
  async retrySubmission(): Promise<void> {
    const submission = this.state.submission;
    if (submission.kind !== "offline") return;
    await this.submit(submission.retained);
  }

  private async submit(decision: PendingDecision): Promise<void> {
    const s = this.state;
    s.submission = { kind: "saving" };
    this.notify();
    try {
      const updated = await this.api.decide(decision.utteranceId, {
        verdict: decision.verdict,
        annotator_id: s.annotatorId,
        ...(decision.newTags ? { new_tags: decision.newTags } : {}),
      });
      const row = s.queue.find(
        (r) => r.utterance_id === updated.utterance_id
      );
      if (row) row.status = updated.status;
      if (s.active?.utterance_id === updated.utterance_id) {
        s.active = updated;
      }
      s.draft = null;
      s.draftError = null;
      s.submission = { kind: "idle" };
      this.notify();
      await this.refreshStats();
      await this.openNextPending();
    } catch (error) {
      if (error instanceof ApiError) {
        s.submission = { kind: "rejected", message: error.message };
      } else {
        s.submission = { kind: "offline", retained: decision };
      }
      this.notify();
    }
  }

  async refreshStats(): Promise<void> {
    try {
      this.state.stats = await this.api.stats();
      this.notify();
    } catch {
      // stats are cosmetic; the next decision refreshes them
    }
  }
}
