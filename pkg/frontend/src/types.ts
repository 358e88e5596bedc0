/** Shapes of the service's JSON responses. Field names mirror the wire
 * format exactly; the dashboard never invents keys of its own. */

export interface Question {
  number: number;
  key: string;
  prompt: string;
  default: string;
  choices: string[] | null;
}

export interface Verdict {
  feasible: boolean;
  satisfied_layout: string | null;
  required_layouts: string[];
}

export interface ConfigDocument {
  schema_version: number;
  model: string;
  method: string;
  seed: number;
  epochs: number;
  lr: number;
  optimizer: string;
  lora_rank: number;
  lora_alpha: number;
  quant_bits: number;
  zero_stage: number;
  dataset: string;
  data_mode: string;
  persona_name: string | null;
  max_length: number;
  rope: Record<string, unknown>;
  world: { count: number; per_device_mem: number };
  wandb: boolean;
  output_dir: string;
}

export interface PlanResponse {
  config: ConfigDocument;
  verdict: Verdict;
  rationale: string[];
  launch: string | null;
  readme: string | null;
}

/** Body of POST /plan; keys match the service's requirements schema. */
export interface PlanRequest {
  domain?: string;
  language?: string;
  quality_vs_memory?: string;
  model_choice?: string | null;
  dataset_choice?: string | null;
  train_here?: boolean;
  persona_name?: string | null;
  context_target?: number | null;
}

export interface WhatifParams {
  model?: string;
  method?: string;
  gpus?: string;
}

export interface WhatifResponse {
  model: string;
  size_bucket: string;
  method: string;
  gpus: string;
  verdict: Verdict;
  diff: Record<string, { from: string | null; to: string }>;
}

export interface FeasibilityCell {
  count: number;
  per_device_gib: number;
}

/** bucket label -> method -> layout alternatives */
export type FeasibilityTable = Record<string, Record<string, FeasibilityCell[]>>;

export interface TelemetryRecord {
  step: number;
  loss: number;
  lr: number;
  tokens: number;
}

export interface ModelInfo {
  name: string;
  family: string;
  param_count: number;
  default_context: number;
  languages: string[];
  size_bucket: string;
}

export interface ApiError {
  error: string;
}
