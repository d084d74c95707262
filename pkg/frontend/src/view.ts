// DOM rendering for the review session.  The whole view re-renders on every
// state change; queues are small (a few percent of a training set) so this
// stays well under a frame.

import { Evidence, QueueRow, ReviewItem } from "./api.js";
import { ReviewController } from "./state.js";

function el(
  tag: string,
  attrs: Record<string, string> = {},
  children: Array<Node | string> = []
): HTMLElement {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) {
    node.setAttribute(key, value);
  }
  for (const child of children) node.append(child);
  return node;
}

function statsBar(controller: ReviewController): HTMLElement {
  const stats = controller.state.stats;
  if (!stats) return el("div", { class: "stats" });
  const chip = (label: string, value: string) =>
    el("span", { class: "chip" }, [`${label} ${value}`]);
  return el("div", { class: "stats", id: "stats" }, [
    chip("pending", String(stats.pending)),
    chip("done", String(stats.done)),
    chip("corrected", String(stats.corrected)),
    chip("accepted", String(stats.accepted)),
    chip("flagged", `${(stats.flag_fraction_of_train * 100).toFixed(1)}%`),
  ]);
}

function queueRow(row: QueueRow, controller: ReviewController): HTMLElement {
  const active = controller.state.active?.utterance_id === row.utterance_id;
  const node = el(
    "li",
    {
      class: `queue-row ${row.status}${active ? " active" : ""}`,
      "data-id": row.utterance_id,
      "data-status": row.status,
    },
    [
      el("span", { class: "gap" }, [row.max_gap.toFixed(2)]),
      el("span", { class: "types" }, [row.evidence_types.join(" ")]),
      el("span", { class: "text" }, [row.text]),
      el("span", { class: "status" }, [row.status]),
    ]
  );
  node.addEventListener("click", () => void controller.open(row.utterance_id));
  return node;
}

// Rows render in the exact order the server returned them.
function queuePanel(controller: ReviewController): HTMLElement {
  return el("ul", { id: "queue", class: "queue" },
    controller.state.queue.map((row) => queueRow(row, controller)));
}

function evidenceCard(evidence: Evidence): HTMLElement {
  const { span, p_tag, g_tag, gap } = evidence;
  return el("div", { class: "evidence-card", "data-type": span.entity_type }, [
    el("span", { class: "span-pos" }, [`tokens ${span.start}..${span.end - 1}`]),
    el("span", { class: "p-tag" }, [`model ${p_tag}`]),
    el("span", { class: "g-tag" }, [`gold ${g_tag}`]),
    el("span", { class: "gap" }, [`gap ${gap.toFixed(2)}`]),
  ]);
}

function flaggedPositions(item: ReviewItem): Set<number> {
  const flagged = new Set<number>();
  for (const evidence of item.evidence) {
    for (let pos = evidence.span.start; pos < evidence.span.end; pos++) {
      flagged.add(pos);
    }
  }
  return flagged;
}

function tokenChip(
  controller: ReviewController,
  item: ReviewItem,
  position: number,
  flagged: boolean
): HTMLElement {
  const state = controller.state;
  const editing = state.draft !== null;
  const tag = editing ? state.draft![position] : item.current_tags[position];
  const children: Array<Node | string> = [
    el("span", { class: "word" }, [item.tokens[position]]),
  ];
  if (editing) {
    const picker = el("select", {
      class: "tag-pick",
      "data-pos": String(position),
    }) as HTMLSelectElement;
    for (const label of state.tagset?.labels ?? []) {
      const option = el("option", { value: label }, [label]) as HTMLOptionElement;
      option.selected = label === tag;
      picker.append(option);
    }
    picker.addEventListener("change", () =>
      controller.setDraftTag(position, picker.value)
    );
    children.push(picker);
  } else {
    children.push(el("span", { class: `tag ${tag === "O" ? "o" : "ent"}` }, [tag]));
  }
  return el(
    "span",
    { class: `token${flagged ? " flagged" : ""}`, "data-pos": String(position) },
    children
  );
}

function submissionLine(controller: ReviewController): HTMLElement {
  const submission = controller.state.submission;
  switch (submission.kind) {
    case "idle":
      return el("div", { class: "submission idle" });
    case "saving":
      return el("div", { class: "submission saving" }, ["saving..."]);
    case "rejected":
      return el("div", { class: "submission rejected", id: "server-error" }, [
        submission.message,
      ]);
    case "offline": {
      const retry = el("button", { id: "retry-submit" }, ["retry"]);
      retry.addEventListener("click", () => void controller.retrySubmission());
      return el("div", { class: "submission offline" }, [
        "could not reach the server; decision kept locally ",
        retry,
      ]);
    }
  }
}

function itemPanel(controller: ReviewController): HTMLElement {
  const state = controller.state;
  const item = state.active;
  if (!item) {
    const empty = state.queue.some((row) => row.status === "pending")
      ? "select an utterance"
      : "queue drained, nothing pending";
    return el("section", { id: "item", class: "item" }, [
      el("p", { class: "empty" }, [empty]),
    ]);
  }
  const editing = state.draft !== null;
  const flagged = flaggedPositions(item);
  const tokens = el(
    "div",
    { class: "tokens" },
    item.tokens.map((_, pos) => tokenChip(controller, item, pos, flagged.has(pos)))
  );
  const evidence = el(
    "div",
    { class: "evidence" },
    item.evidence.map(evidenceCard)
  );

  const controls = el("div", { class: "controls" });
  if (item.status === "pending" && !editing) {
    const accept = el("button", { id: "accept" }, ["accept (a)"]);
    accept.addEventListener("click", () => void controller.accept());
    const edit = el("button", { id: "edit" }, ["edit tags (e)"]);
    edit.addEventListener("click", () => controller.beginEdit());
    controls.append(accept, edit);
  }
  if (editing) {
    const submit = el("button", { id: "submit" }, [
      "submit correction (enter)",
    ]) as HTMLButtonElement;
    submit.disabled = !controller.canSubmitDraft();
    submit.addEventListener("click", () => void controller.submitDraft());
    const cancel = el("button", { id: "cancel" }, ["cancel (esc)"]);
    cancel.addEventListener("click", () => controller.cancelEdit());
    controls.append(submit, cancel);
  }
  const next = el("button", { id: "next" }, ["next pending (n)"]);
  next.addEventListener("click", () => void controller.openNextPending());
  controls.append(next);

  const parts: Array<Node | string> = [
    el("header", { class: "item-head" }, [
      el("span", { class: "uid" }, [item.utterance_id]),
      el("span", { class: `status ${item.status}` }, [item.status]),
      item.decision
        ? el("span", { class: "verdict" }, [item.decision.verdict])
        : "",
    ]),
    tokens,
    evidence,
  ];
  if (editing && state.draftError) {
    parts.push(
      el("div", { class: "draft-error", id: "draft-error" }, [state.draftError])
    );
  }
  parts.push(controls, submissionLine(controller));
  return el("section", { id: "item", class: "item" }, parts);
}

export function render(root: HTMLElement, controller: ReviewController): void {
  const state = controller.state;
  root.replaceChildren();
  if (state.phase === "failed") {
    const retry = el("button", { id: "retry-load" }, ["retry"]);
    retry.addEventListener("click", () => void controller.load());
    root.append(
      el("div", { class: "load-error" }, [
        `could not load the queue: ${state.loadError ?? "unknown error"} `,
        retry,
      ])
    );
    return;
  }
  if (state.phase === "loading") {
    root.append(el("div", { class: "loading" }, ["loading queue..."]));
    return;
  }
  root.append(
    el("header", { class: "top" }, [
      el("h1", {}, ["review queue"]),
      statsBar(controller),
    ]),
    el("main", { class: "layout" }, [queuePanel(controller), itemPanel(controller)])
  );
}

// Keyboard-first flow: accept / edit / next / submit / cancel.
export function bindKeys(
  doc: Document,
  controller: ReviewController
): (event: KeyboardEvent) => void {
  const handler = (event: KeyboardEvent) => {
    const target = event.target as HTMLElement | null;
    const inPicker = target?.tagName === "SELECT";
    const editing = controller.state.draft !== null;
    if (event.key === "Enter" && editing) {
      void controller.submitDraft();
    } else if (event.key === "Escape" && editing) {
      controller.cancelEdit();
    } else if (!inPicker && !editing) {
      if (event.key === "a") void controller.accept();
      else if (event.key === "e") controller.beginEdit();
      else if (event.key === "n") void controller.openNextPending();
    }
  };
  doc.addEventListener("keydown", handler);
  return handler;
}
