// Stacked run-time and memory breakdown bars for one module's children.
// Hovering a segment highlights its twin in the other chart and the source
// line behind it; double-clicking a module drills into it.

import { BreakdownMsg, BreakdownNodeMsg } from "./protocol.js";

export interface BreakdownEvents {
  drill(path: number[]): void; // double-click on a module segment
  up(): void;
  top(): void;
  hover(node: BreakdownNodeMsg | null): void;
}

function memoryOf(node: BreakdownNodeMsg): number {
  return node.weight_bytes + node.activation_bytes;
}

export class BreakdownView {
  readonly root: HTMLElement;
  private runColumn: HTMLElement;
  private memColumn: HTMLElement;
  private crumb: HTMLElement;
  private events: BreakdownEvents;
  private doc: Document;
  current: BreakdownMsg | null = null;

  constructor(doc: Document, events: BreakdownEvents) {
    this.doc = doc;
    this.events = events;
    this.root = doc.createElement("div");
    this.root.className = "breakdown";

    const controls = doc.createElement("div");
    controls.className = "breakdown-controls";
    const up = doc.createElement("button");
    up.textContent = "up";
    up.className = "breakdown-up";
    up.addEventListener("click", () => this.events.up());
    const top = doc.createElement("button");
    top.textContent = "top";
    top.className = "breakdown-top";
    top.addEventListener("click", () => this.events.top());
    this.crumb = doc.createElement("span");
    this.crumb.className = "breakdown-crumb";
    controls.append(up, top, this.crumb);

    const charts = doc.createElement("div");
    charts.className = "breakdown-charts";
    this.runColumn = doc.createElement("div");
    this.runColumn.className = "breakdown-column run-time";
    this.memColumn = doc.createElement("div");
    this.memColumn.className = "breakdown-column memory";
    charts.append(this.runColumn, this.memColumn);
    this.root.append(controls, charts);
  }

  render(msg: BreakdownMsg): void {
    this.current = msg;
    this.crumb.textContent = msg.path.length === 0 ? "top-level module" : `depth ${msg.path.length}`;
    this.renderColumn(this.runColumn, msg.nodes, (n) => n.run_time_ms);
    this.renderColumn(this.memColumn, msg.nodes, memoryOf);
  }

  segment(column: "run-time" | "memory", index: number): HTMLElement {
    const host = column === "run-time" ? this.runColumn : this.memColumn;
    return host.children[index] as HTMLElement;
  }

  private renderColumn(host: HTMLElement, nodes: BreakdownNodeMsg[], value: (n: BreakdownNodeMsg) => number): void {
    host.textContent = "";
    const total = nodes.reduce((acc, n) => acc + value(n), 0) || 1;
    nodes.forEach((node, index) => {
      const seg = this.doc.createElement("div");
      seg.className = `bar-segment ${node.kind}`;
      seg.style.flexGrow = String(value(node) / total);
      seg.dataset.index = String(index);
      seg.dataset.path = JSON.stringify(node.path);
      seg.title = `${node.display_name} (${node.file}:${node.line})`;
      const label = this.doc.createElement("span");
      label.textContent = node.display_name;
      seg.appendChild(label);

      seg.addEventListener("mouseenter", () => {
        this.setLinked(index, true);
        this.events.hover(node);
      });
      seg.addEventListener("mouseleave", () => {
        this.setLinked(index, false);
        this.events.hover(null);
      });
      if (node.kind === "module") {
        seg.addEventListener("dblclick", () => this.events.drill(node.path));
      }
      host.appendChild(seg);
    });
  }

  private setLinked(index: number, on: boolean): void {
    for (const column of [this.runColumn, this.memColumn]) {
      const twin = column.children[index] as HTMLElement | undefined;
      twin?.classList.toggle("linked", on);
    }
  }
}
