// Wires the daemon connection to the widgets: key-metric gauges with drag
// prediction, breakdown drill-down with linked inline markers, and the
// read-only code pane.

import { BarGauge } from "./barGauge.js";
import { BreakdownView } from "./breakdownView.js";
import { CodePane } from "./codePane.js";
import { Connection, SocketLike } from "./connection.js";
import { DragController } from "./dragState.js";
import { formatBytes, formatThroughput } from "./format.js";
import { memoryAt, throughputAt } from "./predict.js";
import { BreakdownNodeMsg, DaemonMessage, KeyMetricsMsg } from "./protocol.js";

export class App {
  readonly connection: Connection;
  readonly drag: DragController;
  readonly throughputGauge: BarGauge;
  readonly memoryGauge: BarGauge;
  readonly breakdown: BreakdownView;
  readonly codePane: CodePane;
  readonly status: HTMLElement;
  metrics: KeyMetricsMsg | null = null;
  private sortKey: "run_time" | "memory" = "run_time";
  private path: number[] = [];

  constructor(doc: Document, root: HTMLElement, socket: SocketLike) {
    this.connection = new Connection(socket, (msg) => this.receive(msg));
    this.drag = new DragController((batch) => this.connection.setBatchSize(batch));

    this.status = doc.createElement("div");
    this.status.className = "status";
    const gauges = doc.createElement("div");
    gauges.className = "gauges";
    this.throughputGauge = new BarGauge(doc, "throughput", "Training throughput", this.drag, () =>
      this.renderGauges(),
    );
    this.memoryGauge = new BarGauge(doc, "memory", "Peak memory", this.drag, () => this.renderGauges());
    gauges.append(this.throughputGauge.root, this.memoryGauge.root);

    this.breakdown = new BreakdownView(doc, {
      drill: (path) => {
        this.path = path;
        this.connection.getBreakdown(path, this.sortKey);
      },
      up: () => {
        this.path = this.path.slice(0, -1);
        this.connection.getBreakdown(this.path, this.sortKey);
      },
      top: () => {
        this.path = [];
        this.connection.getBreakdown([], this.sortKey);
      },
      hover: (node: BreakdownNodeMsg | null) => {
        this.codePane.highlight(node ? node.line : null);
      },
    });
    this.codePane = new CodePane(doc);
    root.append(this.status, gauges, this.breakdown.root, this.codePane.root);
  }

  receive(msg: DaemonMessage): void {
    switch (msg.type) {
      case "session":
        this.status.textContent = `session ${msg.session_id} · ${msg.entry_file}`;
        this.connection.analyze("manual");
        break;
      case "analysis_begin":
        this.status.textContent = "profiling…";
        break;
      case "key_metrics":
        this.metrics = msg;
        this.drag.setModels(
          msg.run_time_model && msg.memory_model
            ? {
                runTime: msg.run_time_model,
                memory: msg.memory_model,
                capacityBytes: msg.capacity_bytes,
              }
            : null,
        );
        this.status.textContent = this.drag.enabled
          ? `batch size ${msg.batch_size}`
          : `batch size ${msg.batch_size} · prediction disabled`;
        this.renderGauges();
        break;
      case "breakdown":
        this.breakdown.render(msg);
        break;
      case "inline_markers":
        this.codePane.setMarkers(msg.markers);
        break;
      case "source_mutated":
        this.codePane.applyMutation(msg.line, msg.new_batch_size);
        this.status.textContent = `batch size set to ${msg.new_batch_size}`;
        break;
      case "analysis_error":
        this.status.textContent = `error (${msg.code}): ${msg.message}`;
        break;
    }
  }

  renderGauges(): void {
    const metrics = this.metrics;
    if (!metrics) return;
    const preview = this.drag.current;
    const throughput = preview ? preview.throughput : metrics.throughput_samples_per_s;
    const memory = preview ? preview.memoryBytes : metrics.peak_memory_bytes;
    const batch = preview ? preview.batch : metrics.batch_size;
    const maxT = metrics.max_throughput_samples_per_s ?? throughput;
    this.throughputGauge.render({
      value: throughput,
      scaleMax: maxT,
      label: `${formatThroughput(throughput)} @ batch ${batch}`,
      scaleLabel: `max ${formatThroughput(maxT)}`,
      preview: Boolean(preview),
    });
    this.memoryGauge.render({
      value: memory,
      scaleMax: metrics.capacity_bytes,
      label: `${formatBytes(memory)} @ batch ${batch}`,
      scaleLabel: `capacity ${formatBytes(metrics.capacity_bytes)}`,
      preview: Boolean(preview),
    });
  }

  // Convenience used by tests to drive a preview without pointer events.
  previewFromModels(batch: number): { throughput: number; memoryBytes: number } | null {
    if (!this.metrics?.run_time_model || !this.metrics?.memory_model) return null;
    return {
      throughput: throughputAt(this.metrics.run_time_model, batch),
      memoryBytes: memoryAt(this.metrics.memory_model, batch),
    };
  }
}

export function createApp(doc: Document, root: HTMLElement, socket: SocketLike): App {
  return new App(doc, root, socket);
}
