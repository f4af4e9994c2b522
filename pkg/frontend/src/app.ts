/**
 * Annotation controller: the query -> label -> refresh loop.
 *
 * Keeps one ViewState, always rebuilt from the latest service snapshot
 * (optimistic updates are deliberately absent). Rendering is a callback so
 * the same controller runs under the browser UI and under headless tests.
 */

import { ApiError, SessionApi } from "./api.js";
import type { CreateSessionRequest, Label } from "./types.js";
import { canLabel, viewFromSnapshot, withError, withPendingQuery, type ViewState } from "./state.js";

export interface AppOptions {
  autoAdvance: boolean; // fetch the next query right after each label
}

export class AnnotatorApp {
  view: ViewState | null = null;
  readonly options: AppOptions;
  private renderFn: (view: ViewState) => void;

  constructor(
    private readonly api: SessionApi,
    options: Partial<AppOptions> = {},
    render: (view: ViewState) => void = () => {},
  ) {
    this.options = { autoAdvance: true, ...options };
    this.renderFn = render;
  }

  private async refresh(sessionId: string): Promise<ViewState> {
    const snap = await this.api.getState(sessionId);
    this.view = viewFromSnapshot(snap);
    this.renderFn(this.view);
    return this.view;
  }

  async start(req: CreateSessionRequest): Promise<ViewState> {
    const created = await this.api.createSession(req);
    await this.refresh(created.id);
    return this.requestQuery();
  }

  async attach(sessionId: string): Promise<ViewState> {
    const view = await this.refresh(sessionId);
    if (view.pending === null && !view.completed) {
      return this.requestQuery();
    }
    return view;
  }

  /** Ask the service for the next query and highlight it. */
  async requestQuery(): Promise<ViewState> {
    if (!this.view) throw new Error("no session attached");
    const id = this.view.sessionId;
    try {
      const q = await this.api.nextQuery(id);
      this.view = withPendingQuery(this.view, q);
    } catch (err) {
      const message = this.describe(err);
      await this.refresh(id); // conflict means our view was stale
      this.view = withError(this.view!, message);
      this.renderFn(this.view);
      return this.view;
    }
    this.renderFn(this.view);
    return this.view;
  }

  /** Submit a label for the pending query, then refresh (and auto-advance). */
  async submitLabel(label: Label): Promise<ViewState> {
    if (!this.view) throw new Error("no session attached");
    if (!canLabel(this.view)) {
      this.view = withError(this.view, "no pending query to label");
      this.renderFn(this.view);
      return this.view;
    }
    const id = this.view.sessionId;
    const index = this.view.pending!;
    try {
      await this.api.submitLabel(id, index, label);
    } catch (err) {
      this.view = withError(await this.refresh(id), this.describe(err));
      this.renderFn(this.view);
      return this.view;
    }
    await this.refresh(id);
    if (this.options.autoAdvance && !this.view!.completed) {
      return this.requestQuery();
    }
    return this.view!;
  }

  private describe(err: unknown): string {
    if (err instanceof ApiError) return `${err.code}: ${err.message}`;
    return String(err);
  }
}
