/**
 * DOM view for a rating session.
 *
 * Renders one image at a time with a 1-4 realism control and a
 * real/generated toggle. The markup only ever contains opaque tokens and
 * progress counters; keyboard shortcuts 1-4, R, G, and Enter keep a
 * 480-image session fast.
 */

import { StudyApi } from "./api.js";
import { canSubmit, SessionController, UiSessionState } from "./state.js";

const REALISM_LABELS: ReadonlyArray<[number, string]> = [
  [1, "1 - not realistic"],
  [2, "2"],
  [3, "3"],
  [4, "4 - most realistic"],
];

export function mountApp(root: HTMLElement, api: StudyApi): SessionController {
  const controller = new SessionController(api);

  root.innerHTML = `
    <main class="rating-app">
      <header>
        <h1>Image rating session</h1>
        <p id="progress" role="status"></p>
      </header>
      <section id="viewer" hidden>
        <img id="scan" alt="scan under review" />
        <fieldset id="realism-group">
          <legend>How realistic does this image look?</legend>
          ${REALISM_LABELS.map(
            ([value, label]) =>
              `<button type="button" class="realism" data-value="${value}">${label}</button>`
          ).join("")}
        </fieldset>
        <fieldset id="judgment-group">
          <legend>Is this a real scan?</legend>
          <button type="button" class="judgment" data-value="real">Real (R)</button>
          <button type="button" class="judgment" data-value="generated">Generated (G)</button>
        </fieldset>
        <button id="submit" type="button" disabled>Submit rating</button>
      </section>
      <section id="error-banner" hidden>
        <p id="error-text" role="alert"></p>
        <button id="retry" type="button">Retry</button>
      </section>
      <section id="done-screen" hidden>
        <p>Session complete. Thank you for rating every image.</p>
      </section>
    </main>`;

  const progress = root.querySelector<HTMLElement>("#progress")!;
  const viewer = root.querySelector<HTMLElement>("#viewer")!;
  const scan = root.querySelector<HTMLImageElement>("#scan")!;
  const submit = root.querySelector<HTMLButtonElement>("#submit")!;
  const errorBanner = root.querySelector<HTMLElement>("#error-banner")!;
  const errorText = root.querySelector<HTMLElement>("#error-text")!;
  const retry = root.querySelector<HTMLButtonElement>("#retry")!;
  const doneScreen = root.querySelector<HTMLElement>("#done-screen")!;
  const realismButtons = Array.from(root.querySelectorAll<HTMLButtonElement>(".realism"));
  const judgmentButtons = Array.from(root.querySelectorAll<HTMLButtonElement>(".judgment"));

  let shownToken: string | null = null;

  function render(state: UiSessionState): void {
    viewer.hidden = !(state.phase === "rating" || state.phase === "submitting");
    errorBanner.hidden = state.phase !== "error";
    doneScreen.hidden = state.phase !== "done";

    if (state.phase === "loading") {
      progress.textContent = "Loading...";
    } else if (state.phase === "done") {
      progress.textContent = "All images rated";
    } else if (state.token !== null) {
      progress.textContent = `Image ${state.index} of ${state.total}`;
    }

    if (state.phase === "error") {
      errorText.textContent = state.errorMessage ?? "request failed";
    }

    if (state.token !== null && state.token !== shownToken) {
      shownToken = state.token;
      scan.src = api.imageUrl(state.token);
    }

    for (const button of realismButtons) {
      const selected = Number(button.dataset.value) === state.realism;
      button.classList.toggle("selected", selected);
      button.disabled = state.phase !== "rating";
    }
    for (const button of judgmentButtons) {
      const selected =
        state.judgedReal !== null &&
        (button.dataset.value === "real") === state.judgedReal;
      button.classList.toggle("selected", selected);
      button.disabled = state.phase !== "rating";
    }
    submit.disabled = !canSubmit(state);
  }

  controller.subscribe(render);

  for (const button of realismButtons) {
    button.addEventListener("click", () =>
      controller.selectRealism(Number(button.dataset.value))
    );
  }
  for (const button of judgmentButtons) {
    button.addEventListener("click", () =>
      controller.selectJudgment(button.dataset.value === "real")
    );
  }
  submit.addEventListener("click", () => void controller.submit());
  retry.addEventListener("click", () => void controller.retry());
  scan.addEventListener("error", () => controller.imageFailed());

  root.ownerDocument.addEventListener("keydown", (event: KeyboardEvent) => {
    if (event.key >= "1" && event.key <= "4") {
      controller.selectRealism(Number(event.key));
    } else if (event.key === "r" || event.key === "R") {
      controller.selectJudgment(true);
    } else if (event.key === "g" || event.key === "G") {
      controller.selectJudgment(false);
    } else if (event.key === "Enter") {
      void controller.submit();
    }
  });

  return controller;
}
