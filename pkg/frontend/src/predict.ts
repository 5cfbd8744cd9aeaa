// Client-side evaluation of the daemon's linear models, so drag previews
// never wait on the network. Run time is a_ms*x + b_ms per iteration,
// memory is c_bytes*x + d_bytes; throughput is 1000*x/(a*x+b) samples/s.

export interface RunTimeModel {
  a_ms: number;
  b_ms: number;
}

export interface MemoryModel {
  c_bytes: number;
  d_bytes: number;
}

export function throughputAt(model: RunTimeModel, batch: number): number {
  return (1000.0 * batch) / (model.a_ms * batch + model.b_ms);
}

export function maxThroughput(model: RunTimeModel): number {
  return 1000.0 / model.a_ms;
}

export function memoryAt(model: MemoryModel, batch: number): number {
  return model.c_bytes * batch + model.d_bytes;
}

// Matches the daemon's tolerance for float slop near integer batches.
const INVERSE_EPS = 1e-6;

export function batchFromMemory(model: MemoryModel, targetBytes: number): number {
  const raw = (targetBytes - model.d_bytes) / model.c_bytes;
  return Math.max(1, Math.floor(raw + INVERSE_EPS));
}

export function batchFromThroughput(model: RunTimeModel, targetSamplesPerS: number): number {
  const t = targetSamplesPerS / 1000.0; // samples per ms
  const raw = (t * model.b_ms) / (1.0 - t * model.a_ms);
  return Math.max(1, Math.floor(raw + 0.5)); // round half up, like the daemon
}

// Drags must stay strictly below the asymptote; 99% is the UI's clamp.
export const THROUGHPUT_DRAG_LIMIT = 0.99;

export function clampThroughputTarget(model: RunTimeModel, target: number): number {
  const ceiling = maxThroughput(model) * THROUGHPUT_DRAG_LIMIT;
  return Math.min(Math.max(target, throughputAt(model, 1)), ceiling);
}

export function clampMemoryTarget(model: MemoryModel, target: number, capacityBytes: number): number {
  const floor = memoryAt(model, 1);
  return Math.min(Math.max(target, floor), capacityBytes);
}
