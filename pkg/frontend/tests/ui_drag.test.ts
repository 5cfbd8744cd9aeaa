// @vitest-environment jsdom
//
// Drag acceptance flow: a session on a noiseless profile, a pointer drag of
// the memory bar to a target, exactly one set_batch_size on release, and
// the code pane picking up the daemon's mutation. The expected batch (120
// for an 8 GiB target) is what the daemon's own inversion prints for the
// same coefficients, so preview and daemon must agree within +/-1.

import { beforeEach, describe, expect, it } from "vitest";

import { App, createApp } from "../src/app.js";
import { FakeSocket } from "./fakeSocket.js";

const GIB = 1 << 30;
const DAEMON_INVERSION_AT_8GIB = 120; // `iterscope predict --target-memory 8589934592`

const KEY_METRICS = {
  type: "key_metrics",
  batch_size: 32,
  throughput_samples_per_s: 941.1764705882352,
  max_throughput_samples_per_s: 1000.0,
  peak_memory_bytes: 2684354560,
  capacity_bytes: 8 * GIB,
  run_time_model: { a_ms: 1.0, b_ms: 2.0 },
  memory_model: { c_bytes: 67108864.0, d_bytes: 536870912.0 },
  batch_span: { line: 1, byte_start: 30, byte_end: 32 },
};

const BREAKDOWN = {
  type: "breakdown",
  path: [],
  sort_key: "run_time",
  nodes: [
    {
      kind: "module",
      display_name: "train.py:5",
      file: "train.py",
      line: 5,
      run_time_ms: 30.6,
      weight_bytes: 483183820,
      activation_bytes: 1932735284,
      leaf_count: 3,
      path: [],
      children: [],
    },
  ],
};

const MARKERS = {
  type: "inline_markers",
  markers: [
    { file: "train.py", line: 1, run_time_ms: 30.6, weight_bytes: 0, activation_bytes: 1932735284, scoped: false },
  ],
};

function trackRect(el: HTMLElement, top: number, height: number): void {
  el.getBoundingClientRect = () =>
    ({ top, bottom: top + height, height, left: 0, right: 40, width: 40, x: 0, y: top, toJSON: () => ({}) }) as DOMRect;
}

function pointer(type: string, clientY: number): MouseEvent {
  return new MouseEvent(type, { bubbles: true, clientY });
}

describe("memory bar drag", () => {
  let app: App;
  let socket: FakeSocket;
  let track: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = '<div id="app"></div>';
    socket = new FakeSocket();
    app = createApp(document, document.getElementById("app")!, socket);
    socket.open();
    socket.deliver({ type: "session", session_id: "s1", entry_file: "train.py", capabilities: ["mutation"] });
    socket.deliver({ type: "analysis_begin" });
    socket.deliver(KEY_METRICS);
    socket.deliver(BREAKDOWN);
    socket.deliver(MARKERS);
    app.codePane.setSource("train.py", "def input_provider(batch_size=32):\n    return load()\n");
    track = app.memoryGauge.root.querySelector(".gauge-track") as HTMLElement;
    trackRect(track, 0, 180); // jsdom has no layout; pin the geometry
  });

  it("hello then analyze were sent during setup", () => {
    expect(socket.sentOfType("hello").length).toBe(1);
    expect(socket.sentOfType("analyze").length).toBe(1);
  });

  it("previews the daemon's inversion within one batch and sends exactly one set_batch_size", () => {
    track.dispatchEvent(pointer("pointerdown", 90)); // mid-bar, drag begins
    window.dispatchEvent(pointer("pointermove", 45));
    window.dispatchEvent(pointer("pointermove", 0)); // top of the track = 8 GiB target
    const preview = app.drag.current!;
    expect(Math.abs(preview.batch - DAEMON_INVERSION_AT_8GIB)).toBeLessThanOrEqual(1);
    expect(preview.memoryBytes).toBeLessThanOrEqual(8 * GIB);

    window.dispatchEvent(pointer("pointerup", 0));
    const sets = socket.sentOfType("set_batch_size");
    expect(sets.length).toBe(1);
    expect(Math.abs(sets[0].batch_size - DAEMON_INVERSION_AT_8GIB)).toBeLessThanOrEqual(1);

    // further pointer traffic after release must not send again
    window.dispatchEvent(pointer("pointermove", 20));
    window.dispatchEvent(pointer("pointerup", 20));
    expect(socket.sentOfType("set_batch_size").length).toBe(1);
  });

  it("updates both bars live during the drag", () => {
    track.dispatchEvent(pointer("pointerdown", 0));
    const preview = app.drag.current!;
    const tLabel = app.throughputGauge.root.querySelector(".gauge-value")!.textContent!;
    expect(tLabel).toContain(`batch ${preview.batch}`);
    window.dispatchEvent(pointer("pointerup", 0));
  });

  it("shows the new literal after source_mutated", () => {
    track.dispatchEvent(pointer("pointerdown", 0));
    window.dispatchEvent(pointer("pointerup", 0));
    const committed = socket.sentOfType("set_batch_size")[0].batch_size;
    socket.deliver({ type: "source_mutated", new_batch_size: committed, line: 1 });
    expect(app.codePane.lineText(1)).toBe(`def input_provider(batch_size=${committed}):`);
  });

  it("never sends a memory target above capacity or a throughput target at the asymptote", () => {
    trackRect(track, 100, 180);
    track.dispatchEvent(pointer("pointerdown", -500)); // way above the chart
    const preview = app.drag.current!;
    expect(preview.memoryBytes).toBeLessThanOrEqual(8 * GIB);
    window.dispatchEvent(pointer("pointerup", -500));

    const tTrack = app.throughputGauge.root.querySelector(".gauge-track") as HTMLElement;
    trackRect(tTrack, 0, 180);
    tTrack.dispatchEvent(pointer("pointerdown", -9999));
    window.dispatchEvent(pointer("pointerup", -9999));
    for (const sent of socket.sentOfType("set_batch_size")) {
      const t = (1000 * sent.batch_size) / (1.0 * sent.batch_size + 2.0);
      expect(t).toBeLessThan(1000.0);
      expect(67108864 * sent.batch_size + 536870912).toBeLessThanOrEqual(8 * GIB);
    }
  });

  it("renders bars without drag handles when coefficients are absent", () => {
    socket.deliver({
      type: "key_metrics",
      batch_size: 32,
      throughput_samples_per_s: 941.18,
      peak_memory_bytes: 2684354560,
      capacity_bytes: 8 * GIB,
      models_disabled_reason: "fewer than 3 feasible batch sizes",
    });
    expect(app.drag.enabled).toBe(false);
    expect(app.memoryGauge.root.classList.contains("disabled")).toBe(true);
    track.dispatchEvent(pointer("pointerdown", 0));
    window.dispatchEvent(pointer("pointerup", 0));
    expect(socket.sentOfType("set_batch_size").length).toBe(0);
    expect(app.status.textContent).toContain("prediction disabled");
  });
});

describe("breakdown drill-down requests", () => {
  it("double-click issues get_breakdown with the child path and markers re-scope", () => {
    document.body.innerHTML = '<div id="app"></div>';
    const socket = new FakeSocket();
    const app = createApp(document, document.getElementById("app")!, socket);
    socket.open();
    socket.deliver({ type: "session", session_id: "s1", entry_file: "train.py", capabilities: [] });
    socket.deliver(KEY_METRICS);
    socket.deliver({
      ...BREAKDOWN,
      nodes: [{ ...BREAKDOWN.nodes[0], path: [0], kind: "module", display_name: "encoder" }],
    });
    app.breakdown.segment("run-time", 0).dispatchEvent(new MouseEvent("dblclick", { bubbles: true }));
    const gets = socket.sentOfType("get_breakdown");
    expect(gets).toEqual([{ type: "get_breakdown", path: [0], sort_key: "run_time" }]);

    // scoped markers land in the pane against the current file
    app.codePane.setSource("train.py", "a\nb\n");
    socket.deliver({
      type: "inline_markers",
      markers: [{ file: "train.py", line: 2, run_time_ms: 1, weight_bytes: 0, activation_bytes: 1, scoped: true }],
    });
    expect(app.codePane.root.querySelectorAll(".gutter.marked").length).toBe(1);
  });
});
