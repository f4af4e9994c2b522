/**
 * View state derived from service snapshots.
 *
 * The view never invents values: every point, star, probability, and
 * sparkline entry is copied from the latest service response. Rebuilding the
 * whole ViewState from a snapshot (rather than patching) keeps the "view ==
 * last snapshot" invariant trivial.
 */

import type { QueryResponse, StateResponse } from "./types.js";

export interface PointView {
  index: number;
  x: number;
  y: number;
  predicted: number;
  probability: number;
  labeled: boolean;
  queried: boolean; // star glyph: this node was chosen by the learner
}

export interface ViewState {
  sessionId: string;
  datasetName: string;
  points: PointView[];
  pending: number | null;
  pendingImage: string | null;
  history: { step: number; index: number; label: number }[];
  accuracySparkline: number[];
  acquisition: string;
  model: string;
  completed: boolean;
  lastError: string | null;
}

export function viewFromSnapshot(snap: StateResponse): ViewState {
  const coords = snap.dataset.display_coords;
  const queried = new Set(snap.history.map((h) => h.index));
  const labeled = new Set(snap.labeled_indices);
  const points: PointView[] = [];
  if (coords) {
    for (let i = 0; i < snap.dataset.n; i++) {
      points.push({
        index: i,
        x: coords[i][0],
        y: coords[i][1],
        predicted: snap.predictions[i],
        probability: snap.probabilities[i],
        labeled: labeled.has(i),
        queried: queried.has(i),
      });
    }
  }
  return {
    sessionId: snap.id,
    datasetName: snap.dataset.name,
    points,
    pending: snap.pending,
    pendingImage: null,
    history: snap.history.map(({ step, index, label }) => ({ step, index, label })),
    accuracySparkline: [...snap.accuracy_curve],
    acquisition: snap.acquisition,
    model: snap.model,
    completed: snap.completed,
    lastError: null,
  };
}

/** Fold a fresh query proposal into the view (pending highlight + image). */
export function withPendingQuery(view: ViewState, query: QueryResponse): ViewState {
  if (query.completed) {
    return { ...view, pending: null, pendingImage: null, completed: true };
  }
  return {
    ...view,
    pending: query.index,
    pendingImage: query.image_b64 ?? null,
    lastError: null,
  };
}

export function withError(view: ViewState, message: string): ViewState {
  return { ...view, lastError: message };
}

/** True when the +1/-1 label buttons should accept clicks. */
export function canLabel(view: ViewState): boolean {
  return view.pending !== null && !view.completed;
}
