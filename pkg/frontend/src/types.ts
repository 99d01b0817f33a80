// Payload shapes mirroring the service JSON API; the dashboard never
// recomputes analysis results client-side.

export type JobState = 'pending' | 'running' | 'done' | 'failed';

export interface Decision {
  record_index: number;
  action: 'accept' | 'override' | 'reject';
  note: string;
  recorded_at?: string;
}

export interface KernelLines {
  path: string;
  language: string;
  lines: Array<[number, string]>;
}

export interface Job {
  id: string;
  state: JobState;
  inputs: {
    code: string;
    sources: string[];
    profiles: Record<string, string>;
    arch: string;
    input_config: string;
    seed: number;
    backend_mode: string;
  };
  outputs: Record<string, string>;
  error: { stage: string; type: string; message: string } | null;
  timings: Record<string, number>;
  created_at: string;
  decisions?: Decision[];
  kernel?: KernelLines;
}

export interface OptimizationRecord {
  lines: number[];
  reason: string;
  applied: boolean;
  out_of_range: boolean;
}

export interface GenerationResult {
  optimized_code: string;
  applied: OptimizationRecord[];
  deferred: OptimizationRecord[];
  completion_ref: string | null;
}

export interface KeywordEntry {
  phrase: string;
  raw_belief: number;
  scaled_score: number;
  span: [number, number];
  count: number;
}

export interface HistogramBin {
  lo: number;
  hi: number;
  count: number;
}

export interface BeliefReport {
  keywords: KeywordEntry[];
  histogram: HistogramBin[];
}

export interface SubmitForm {
  code: Blob;
  codeName: string;
  sources: string[];
  arch: string;
  inputConfig: string;
  seed?: number;
  pc?: Blob;
  roofline?: Blob;
  counters?: Blob;
  counterDict?: Blob;
}
