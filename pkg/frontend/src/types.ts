/**
 * Payload shapes of the session service JSON API.
 */

export type Label = 1 | -1;

export interface DatasetSpec {
  name: string;
  n?: number;
  grid?: number;
  seed?: number;
  csv?: string;
}

export interface SessionSettings {
  update_mode?: string;
  tau?: number;
  gamma?: number;
  length_scale?: number;
  graph?: string;
  laplacian_kind?: string;
  free_labeling?: boolean;
  snapshot_every?: number;
  seed?: number;
}

export interface CreateSessionRequest {
  dataset: DatasetSpec;
  model: string;
  acquisition: string;
  config?: SessionSettings;
  seed_labels?: { per_class?: number; seed?: number; indices?: number[]; labels?: number[] };
}

export interface CreateSessionResponse {
  id: string;
  n_nodes: number;
  dataset_name: string;
  display_coords: number[][] | null;
  accuracy: number | null;
}

export interface ScoreEntry {
  index: number;
  score: number;
}

export interface QueryResponse {
  completed: boolean;
  index: number | null;
  coords?: number[] | null;
  image_b64?: string | null;
  scores_top10?: ScoreEntry[];
  predictions?: number[];
  probabilities?: number[];
}

export interface LabelResponse {
  step: number;
  accuracy: number | null;
  changed: number;
  completed: boolean;
}

export interface HistoryEntry {
  step: number;
  index: number;
  label: number;
  ts: number;
}

export interface StateResponse {
  id: string;
  dataset: { name: string; n: number; display_coords: number[][] | null };
  model: string;
  acquisition: string;
  update_mode: string;
  step: number;
  pending: number | null;
  history: HistoryEntry[];
  accuracy_curve: number[];
  predictions: number[];
  probabilities: number[];
  labeled_indices: number[];
  labeled_labels: number[];
  completed: boolean;
}

export interface ErrorBody {
  code: string;
  message: string;
}
