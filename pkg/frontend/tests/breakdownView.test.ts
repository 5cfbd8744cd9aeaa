// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest";

import { BreakdownView } from "../src/breakdownView.js";
import type { BreakdownMsg, BreakdownNodeMsg } from "../src/protocol.js";

function node(partial: Partial<BreakdownNodeMsg> & { display_name: string }): BreakdownNodeMsg {
  return {
    kind: "module",
    file: "model.py",
    line: 1,
    run_time_ms: 1,
    weight_bytes: 0,
    activation_bytes: 0,
    leaf_count: 1,
    path: [0],
    children: [],
    ...partial,
  };
}

const MSG: BreakdownMsg = {
  type: "breakdown",
  path: [],
  sort_key: "run_time",
  nodes: [
    node({ display_name: "encoder", line: 10, run_time_ms: 15.3, activation_bytes: 900, path: [0] }),
    node({ display_name: "head", kind: "operation", line: 20, run_time_ms: 5.1, activation_bytes: 300, path: [1] }),
  ],
};

describe("BreakdownView", () => {
  let view: BreakdownView;
  let drilled: number[][];
  let hovered: (string | null)[];
  let ups: number;
  let tops: number;

  beforeEach(() => {
    drilled = [];
    hovered = [];
    ups = 0;
    tops = 0;
    view = new BreakdownView(document, {
      drill: (path) => drilled.push(path),
      up: () => (ups += 1),
      top: () => (tops += 1),
      hover: (n) => hovered.push(n ? n.display_name : null),
    });
    document.body.appendChild(view.root);
    view.render(MSG);
  });

  it("renders run-time segments proportional to their share", () => {
    const first = view.segment("run-time", 0);
    const second = view.segment("run-time", 1);
    expect(Number(first.style.flexGrow)).toBeCloseTo(15.3 / 20.4, 5);
    expect(Number(second.style.flexGrow)).toBeCloseTo(5.1 / 20.4, 5);
    expect(first.textContent).toBe("encoder");
  });

  it("double-clicking a module drills with its path; operations do not drill", () => {
    view.segment("run-time", 0).dispatchEvent(new MouseEvent("dblclick", { bubbles: true }));
    expect(drilled).toEqual([[0]]);
    view.segment("run-time", 1).dispatchEvent(new MouseEvent("dblclick", { bubbles: true }));
    expect(drilled).toEqual([[0]]); // leaf: unchanged
  });

  it("hover links the twin bar in the other chart and reports the node", () => {
    const seg = view.segment("memory", 0);
    seg.dispatchEvent(new MouseEvent("mouseenter"));
    expect(view.segment("run-time", 0).classList.contains("linked")).toBe(true);
    expect(hovered).toEqual(["encoder"]);
    seg.dispatchEvent(new MouseEvent("mouseleave"));
    expect(view.segment("run-time", 0).classList.contains("linked")).toBe(false);
    expect(hovered).toEqual(["encoder", null]);
  });

  it("up and top buttons fire their callbacks", () => {
    (view.root.querySelector(".breakdown-up") as HTMLButtonElement).click();
    (view.root.querySelector(".breakdown-top") as HTMLButtonElement).click();
    expect(ups).toBe(1);
    expect(tops).toBe(1);
  });
});
