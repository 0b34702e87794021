/**
 * Session state machine, independent of the DOM.
 *
 * Holds only what the rater may see: the current token, progress counters,
 * and the pending selection. Ratings are never cached client-side; the
 * service event log is the single source of truth, so a refresh resumes
 * cleanly from /api/item/next.
 */

import { ApiError, isDone, StudyApi } from "./api.js";

export type Phase = "loading" | "rating" | "submitting" | "done" | "error";

export interface UiSessionState {
  sessionId: string;
  phase: Phase;
  token: string | null;
  index: number;
  total: number;
  realism: number | null;
  judgedReal: boolean | null;
  errorMessage: string | null;
}

export type Listener = (state: UiSessionState) => void;

export function canSubmit(state: UiSessionState): boolean {
  return state.phase === "rating" && state.realism !== null && state.judgedReal !== null;
}

export class SessionController {
  private state: UiSessionState = {
    sessionId: "",
    phase: "loading",
    token: null,
    index: 0,
    total: 0,
    realism: null,
    judgedReal: null,
    errorMessage: null,
  };

  private listeners: Listener[] = [];

  constructor(private readonly api: StudyApi) {}

  subscribe(listener: Listener): void {
    this.listeners.push(listener);
    listener(this.snapshot());
  }

  snapshot(): UiSessionState {
    return { ...this.state };
  }

  private update(patch: Partial<UiSessionState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) {
      listener(this.snapshot());
    }
  }

  async start(): Promise<void> {
    this.update({ phase: "loading", errorMessage: null });
    try {
      const session = await this.api.getSession();
      this.update({ sessionId: session.session_id, total: session.total });
      await this.advance();
    } catch (err) {
      this.fail(err);
    }
  }

  /** Fetch the next unrated item; never advances past a failure. */
  private async advance(): Promise<void> {
    const item = await this.api.getNextItem();
    if (isDone(item)) {
      this.update({ phase: "done", token: null, realism: null, judgedReal: null });
      return;
    }
    this.update({
      phase: "rating",
      token: item.token,
      index: item.index,
      total: item.total,
      realism: null,
      judgedReal: null,
      errorMessage: null,
    });
  }

  selectRealism(value: number): void {
    if (this.state.phase !== "rating" || value < 1 || value > 4) {
      return;
    }
    this.update({ realism: Math.trunc(value) });
  }

  selectJudgment(judgedReal: boolean): void {
    if (this.state.phase !== "rating") {
      return;
    }
    this.update({ judgedReal });
  }

  /** Report that the displayed image failed to load (e.g. 404 on token). */
  imageFailed(): void {
    if (this.state.phase === "rating") {
      this.update({ phase: "error", errorMessage: "image failed to load" });
    }
  }

  async submit(): Promise<void> {
    if (!canSubmit(this.state) || this.state.token === null) {
      return; // guarded by the disabled control; ignore stray calls
    }
    const { token, realism, judgedReal } = this.state;
    this.update({ phase: "submitting" });
    try {
      await this.api.submitRating(token, {
        realism: realism as number,
        judged_real: judgedReal as boolean,
      });
      await this.advance();
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // already rated (e.g. double click racing a reload): skip forward
        console.warn(`token ${token} already rated; advancing`);
        try {
          await this.advance();
        } catch (advanceErr) {
          this.fail(advanceErr);
        }
        return;
      }
      this.fail(err);
    }
  }

  /** Re-fetch the current position after a failure; selection is reset. */
  async retry(): Promise<void> {
    this.update({ phase: "loading", errorMessage: null });
    try {
      if (this.state.total === 0) {
        const session = await this.api.getSession();
        this.update({ sessionId: session.session_id, total: session.total });
      }
      await this.advance();
    } catch (err) {
      this.fail(err);
    }
  }

  private fail(err: unknown): void {
    const message = err instanceof Error ? err.message : String(err);
    this.update({ phase: "error", errorMessage: message });
  }
}
