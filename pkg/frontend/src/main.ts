import { ApiClient } from "./api.js";
import { SessionController, ViewState } from "./controller.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function render(view: ViewState): void {
  el<HTMLSpanElement>("progress").textContent = view.progressText;
  el<HTMLParagraphElement>("message").textContent = view.message;

  const image = el<HTMLImageElement>("study-image");
  if (view.imageUrl) {
    image.src = view.imageUrl;
    image.hidden = false;
  } else {
    image.hidden = true;
  }

  const yes = el<HTMLButtonElement>("btn-realistic");
  const no = el<HTMLButtonElement>("btn-not-realistic");
  yes.disabled = no.disabled = !view.controlsEnabled;

  el<HTMLDivElement>("complete-screen").hidden = view.phase !== "complete";
  el<HTMLButtonElement>("btn-retry").hidden = view.phase !== "error" && view.phase !== "idle";
}

export function bootstrap(baseUrl: string): SessionController {
  const controller = new SessionController(new ApiClient(baseUrl), render);
  el<HTMLButtonElement>("btn-realistic").addEventListener("click", () => {
    void controller.submit(true);
  });
  el<HTMLButtonElement>("btn-not-realistic").addEventListener("click", () => {
    void controller.submit(false);
  });
  el<HTMLButtonElement>("btn-retry").addEventListener("click", () => {
    void controller.start();
  });
  // keyboard shortcuts for fast pre-attentive judgments
  document.addEventListener("keydown", (event) => {
    if (event.key === "f" || event.key === "ArrowLeft") void controller.submit(true);
    if (event.key === "j" || event.key === "ArrowRight") void controller.submit(false);
  });
  void controller.start();
  return controller;
}

declare global {
  interface Window {
    bootstrapStudy: typeof bootstrap;
  }
}

if (typeof window !== "undefined") {
  window.bootstrapStudy = bootstrap;
}
