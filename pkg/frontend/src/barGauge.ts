// One vertical key-metric bar (throughput or memory) with a drag handle.
// The whole bar is the drag surface and the drag follows the pointer even
// when it leaves the chart, so manipulation never stalls at the edges.

import { DragController, Metric } from "./dragState.js";

export interface GaugeRender {
  value: number;
  scaleMax: number;
  label: string;
  scaleLabel: string;
  preview?: boolean;
}

export class BarGauge {
  readonly root: HTMLElement;
  private fill: HTMLElement;
  private valueLabel: HTMLElement;
  private scaleLabelEl: HTMLElement;
  private track: HTMLElement;
  private metric: Metric;
  private controller: DragController;
  private onPreview: () => void;
  private scaleMax = 1;
  private detachPointer: (() => void) | null = null;

  constructor(
    doc: Document,
    metric: Metric,
    title: string,
    controller: DragController,
    onPreview: () => void,
  ) {
    this.metric = metric;
    this.controller = controller;
    this.onPreview = onPreview;
    this.root = doc.createElement("div");
    this.root.className = `gauge gauge-${metric}`;
    const heading = doc.createElement("div");
    heading.className = "gauge-title";
    heading.textContent = title;
    this.track = doc.createElement("div");
    this.track.className = "gauge-track";
    this.fill = doc.createElement("div");
    this.fill.className = "gauge-fill";
    this.track.appendChild(this.fill);
    this.valueLabel = doc.createElement("div");
    this.valueLabel.className = "gauge-value";
    this.scaleLabelEl = doc.createElement("div");
    this.scaleLabelEl.className = "gauge-scale";
    this.root.append(heading, this.track, this.valueLabel, this.scaleLabelEl);

    this.track.addEventListener("pointerdown", (event) => this.beginDrag(event as PointerEvent, doc));
  }

  render(state: GaugeRender): void {
    this.scaleMax = state.scaleMax;
    const fraction = state.scaleMax > 0 ? Math.max(0, Math.min(1, state.value / state.scaleMax)) : 0;
    this.fill.style.height = `${(fraction * 100).toFixed(2)}%`;
    this.fill.classList.toggle("preview", Boolean(state.preview));
    this.valueLabel.textContent = state.label;
    this.scaleLabelEl.textContent = state.scaleLabel;
    this.root.classList.toggle("disabled", !this.controller.enabled);
  }

  valueAt(clientY: number): number {
    const rect = this.track.getBoundingClientRect();
    const height = rect.height || 1;
    const fraction = Math.max(0, Math.min(1, (rect.bottom - clientY) / height));
    return fraction * this.scaleMax;
  }

  private beginDrag(event: PointerEvent, doc: Document): void {
    if (!this.controller.begin(this.metric)) return;
    event.preventDefault();
    const move = (ev: Event) => {
      this.controller.moveTo(this.valueAt((ev as PointerEvent).clientY));
      this.onPreview();
    };
    const up = () => {
      this.endDrag();
      this.controller.release();
      this.onPreview();
    };
    doc.defaultView?.addEventListener("pointermove", move);
    doc.defaultView?.addEventListener("pointerup", up);
    this.detachPointer = () => {
      doc.defaultView?.removeEventListener("pointermove", move);
      doc.defaultView?.removeEventListener("pointerup", up);
    };
    this.controller.moveTo(this.valueAt(event.clientY));
    this.onPreview();
  }

  private endDrag(): void {
    this.detachPointer?.();
    this.detachPointer = null;
  }
}
