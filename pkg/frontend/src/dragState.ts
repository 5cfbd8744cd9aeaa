// Drag interaction for the two key-metric bars. While a drag is live the
// preview batch is computed locally from the shipped coefficients; on
// release exactly one set_batch_size is sent. When the daemon ships no
// coefficients, dragging is disabled entirely.

import {
  MemoryModel,
  RunTimeModel,
  batchFromMemory,
  batchFromThroughput,
  clampMemoryTarget,
  clampThroughputTarget,
  memoryAt,
  throughputAt,
} from "./predict.js";

export type Metric = "throughput" | "memory";

export interface DragPreview {
  metric: Metric;
  liveValue: number; // clamped value under the cursor, samples/s or bytes
  batch: number; // predicted batch for that value
  throughput: number; // both bars re-render from these during the drag
  memoryBytes: number;
}

export interface DragModels {
  runTime: RunTimeModel | null;
  memory: MemoryModel | null;
  capacityBytes: number;
}

export class DragController {
  private models: DragModels | null = null;
  private active: Metric | null = null;
  private preview: DragPreview | null = null;
  private sendBatch: (batch: number) => void;

  constructor(sendBatch: (batch: number) => void) {
    this.sendBatch = sendBatch;
  }

  setModels(models: DragModels | null): void {
    this.models = models;
    this.active = null;
    this.preview = null;
  }

  get enabled(): boolean {
    return this.models !== null && this.models.runTime !== null && this.models.memory !== null;
  }

  get dragging(): boolean {
    return this.active !== null;
  }

  get current(): DragPreview | null {
    return this.preview;
  }

  begin(metric: Metric): boolean {
    if (!this.enabled) return false;
    this.active = metric;
    return true;
  }

  moveTo(value: number): DragPreview | null {
    if (this.active === null || !this.models) return null;
    const runTime = this.models.runTime!;
    const memory = this.models.memory!;
    let batch: number;
    let live: number;
    if (this.active === "throughput") {
      live = clampThroughputTarget(runTime, value);
      batch = batchFromThroughput(runTime, live);
      // a committed batch must also fit in memory; cap at the largest
      // batch the capacity admits and pull the live value back with it
      const largestFitting = batchFromMemory(memory, this.models.capacityBytes);
      if (batch > largestFitting) {
        batch = largestFitting;
        live = throughputAt(runTime, batch);
      }
    } else {
      live = clampMemoryTarget(memory, value, this.models.capacityBytes);
      batch = batchFromMemory(memory, live);
    }
    this.preview = {
      metric: this.active,
      liveValue: live,
      batch,
      throughput: throughputAt(runTime, batch),
      memoryBytes: memoryAt(memory, batch),
    };
    return this.preview;
  }

  release(): DragPreview | null {
    if (this.active === null) return null;
    const committed = this.preview;
    this.active = null;
    this.preview = null;
    if (committed !== null) {
      this.sendBatch(committed.batch);
    }
    return committed;
  }

  cancel(): void {
    this.active = null;
    this.preview = null;
  }
}
