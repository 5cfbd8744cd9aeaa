// Read-only source view with gutter markers and line highlighting. Editing
// stays in the user's editor; this pane only reflects daemon-side mutations.

import { InlineMarkerMsg } from "./protocol.js";
import { formatBytes, formatMs } from "./format.js";

const BATCH_LITERAL = /(batch_size\s*(?::[^=,)]*)?=\s*)(\d[\d_]*)/;

export class CodePane {
  readonly root: HTMLElement;
  private doc: Document;
  private lines: string[] = [];
  private fileName = "";
  private markers = new Map<number, InlineMarkerMsg>();
  private highlighted: number | null = null;

  constructor(doc: Document) {
    this.doc = doc;
    this.root = doc.createElement("div");
    this.root.className = "code-pane";
  }

  setSource(fileName: string, text: string): void {
    this.fileName = fileName;
    this.lines = text.split("\n");
    this.render();
  }

  lineText(line: number): string {
    return this.lines[line - 1] ?? "";
  }

  setMarkers(markers: InlineMarkerMsg[]): void {
    this.markers.clear();
    for (const marker of markers) {
      if (marker.file === this.fileName) {
        this.markers.set(marker.line, marker);
      }
    }
    this.render();
  }

  highlight(line: number | null): void {
    this.highlighted = line;
    for (const el of Array.from(this.root.querySelectorAll(".code-line"))) {
      const ln = Number((el as HTMLElement).dataset.line);
      el.classList.toggle("highlighted", line !== null && ln === line);
    }
  }

  applyMutation(line: number, newBatchSize: number): boolean {
    const text = this.lines[line - 1];
    if (text === undefined) return false;
    const updated = text.replace(BATCH_LITERAL, (_m, head: string) => `${head}${newBatchSize}`);
    if (updated === text && !BATCH_LITERAL.test(text)) return false;
    this.lines[line - 1] = updated;
    this.render();
    this.highlight(line);
    return true;
  }

  private render(): void {
    this.root.textContent = "";
    this.lines.forEach((text, i) => {
      const line = i + 1;
      const row = this.doc.createElement("div");
      row.className = "code-line";
      row.dataset.line = String(line);
      if (line === this.highlighted) row.classList.add("highlighted");

      const gutter = this.doc.createElement("span");
      gutter.className = "gutter";
      const marker = this.markers.get(line);
      if (marker) {
        gutter.classList.add("marked");
        gutter.title =
          `${formatMs(marker.run_time_ms)} · activations ${formatBytes(marker.activation_bytes)}` +
          ` · weights ${formatBytes(marker.weight_bytes)}` +
          (marker.scoped ? " (current module only)" : "");
      }
      const number = this.doc.createElement("span");
      number.className = "lineno";
      number.textContent = String(line);
      const code = this.doc.createElement("code");
      code.textContent = text;
      row.append(gutter, number, code);
      this.root.appendChild(row);
    });
  }
}
