// Entry point: wire the API client, session state, and view together.
// Exported as a function so tests can boot the app against any server.

import { makeApi } from "./api.js";
import { ReviewController } from "./state.js";
import { bindKeys, render } from "./view.js";

export function startApp(
  root: HTMLElement,
  options: {
    base?: string;
    fetchFn?: typeof fetch;
    annotatorId?: string;
    doc?: Document;
  } = {}
): ReviewController {
  const doc = options.doc ?? document;
  const api = makeApi(
    options.base ?? "",
    options.fetchFn ?? fetch.bind(globalThis)
  );
  const annotator = options.annotatorId ?? "annotator";
  const controller = new ReviewController(api, annotator);
  controller.onChange(() => render(root, controller));
  bindKeys(doc, controller);
  void controller.load();
  return controller;
}

declare global {
  interface Window {
    relabelReview?: ReviewController;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  window.relabelReview = startApp(document.getElementById("app")!);
}
