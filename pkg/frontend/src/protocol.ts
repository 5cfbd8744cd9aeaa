// Message schema shared with the daemon. Payloads arrive one JSON object
// per WebSocket text frame; unknown extra fields are ignored.

export const PROTOCOL_VERSION = 1;

export interface BreakdownNodeMsg {
  kind: "module" | "operation";
  display_name: string;
  file: string;
  line: number;
  run_time_ms: number;
  weight_bytes: number;
  activation_bytes: number;
  leaf_count: number;
  path: number[];
  children: BreakdownNodeMsg[];
}

export interface InlineMarkerMsg {
  file: string;
  line: number;
  run_time_ms: number;
  weight_bytes: number;
  activation_bytes: number;
  scoped: boolean;
}

export interface KeyMetricsMsg {
  type: "key_metrics";
  batch_size: number;
  throughput_samples_per_s: number;
  max_throughput_samples_per_s?: number;
  peak_memory_bytes: number;
  capacity_bytes: number;
  untracked_run_time_ms?: number;
  untracked_memory_bytes?: number;
  run_time_model?: { a_ms: number; b_ms: number } | null;
  memory_model?: { c_bytes: number; d_bytes: number } | null;
  batch_span?: { line: number; byte_start: number; byte_end: number } | null;
  models_disabled_reason?: string;
}

export interface SessionMsg {
  type: "session";
  session_id: string;
  entry_file: string;
  capabilities: string[];
}

export interface BreakdownMsg {
  type: "breakdown";
  path: number[];
  sort_key: "run_time" | "memory";
  nodes: BreakdownNodeMsg[];
}

export interface InlineMarkersMsg {
  type: "inline_markers";
  markers: InlineMarkerMsg[];
}

export interface SourceMutatedMsg {
  type: "source_mutated";
  new_batch_size: number;
  line: number;
}

export interface AnalysisErrorMsg {
  type: "analysis_error";
  code: string;
  message: string;
}

export type DaemonMessage =
  | SessionMsg
  | { type: "analysis_begin" }
  | KeyMetricsMsg
  | BreakdownMsg
  | InlineMarkersMsg
  | SourceMutatedMsg
  | AnalysisErrorMsg;

export type ClientMessage =
  | { type: "hello"; protocol_version: number }
  | { type: "analyze"; trigger: "save" | "manual" }
  | { type: "set_batch_size"; batch_size: number }
  | { type: "get_breakdown"; path: number[]; sort_key: "run_time" | "memory" };

export function parseDaemonMessage(raw: string): DaemonMessage {
  const msg = JSON.parse(raw);
  if (typeof msg !== "object" || msg === null || typeof msg.type !== "string") {
    throw new Error("malformed daemon message");
  }
  return msg as DaemonMessage;
}
