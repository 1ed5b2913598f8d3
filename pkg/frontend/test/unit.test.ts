import { describe, expect, it, vi } from "vitest";

import { AutoSyncTimer } from "../src/autosync.js";
import {
  commitSolution, editOutput, gotSolutions, hoverPreview, initialState,
  ranProgram, revert, status, typeCode,
} from "../src/editorState.js";
import { markColor, markedLines, parseSummary } from "../src/highlight.js";
import type { HtmlNode } from "../src/protocol.js";
import { serializeTree, setText, textPaths } from "../src/valueTree.js";

const table: HtmlNode = {
  tag: "table",
  attrs: [],
  children: [
    {
      tag: "tr",
      attrs: [["style", "background-color:lightgray"]],
      children: [{ text: "Montgomery, AL?" }],
    },
  ],
};

describe("valueTree", () => {
  it("serializes the html encoding as a value literal", () => {
    expect(serializeTree({ text: 'say "hi"' })).toBe(
      '["TEXT", "say \\"hi\\""]',
    );
    expect(serializeTree(table)).toBe(
      '["table", [], [["tr", [["style", "background-color:lightgray"]], ' +
        '[["TEXT", "Montgomery, AL?"]]]]]',
    );
  });

  it("edits text nodes by path without mutating the original", () => {
    const paths = textPaths(table);
    expect(paths).toEqual([[0, 0]]);
    const edited = setText(table, [0, 0], "Montgomery, AL");
    expect(serializeTree(edited)).toContain("Montgomery, AL");
    expect(serializeTree(table)).toContain("Montgomery, AL?");
  });
});

describe("editorState", () => {
  const ran = ranProgram(
    { ...initialState(), code: "main = 1" },
    { kind: "html", tree: table },
  );

  it("is in sync after running, dirty after an output edit", () => {
    expect(status(ran)).toBe("in-sync");
    const edited = editOutput(ran, {
      kind: "html",
      tree: setText(table, [0, 0], "Montgomery, AL"),
    });
    expect(status(edited)).toBe("dirty");
    // editing the output never touches the code pane
    expect(edited.code).toBe(ran.code);
  });

  it("previewing requires solutions; committing swaps the code", () => {
    const edited = editOutput(ran, { kind: "text", literal: "x" });
    expect(hoverPreview(edited, 0)).toBe(edited); // no solutions yet
    const withSols = gotSolutions(edited, [
      {
        code: "main = 2",
        summary: "L1 Replaced [1] by [2]",
        outputPreview: "2",
      },
    ]);
    const previewing = hoverPreview(withSols, 0);
    expect(status(previewing)).toBe("previewing");
    const committed = commitSolution(previewing, 0);
    expect(committed.code).toBe("main = 2");
    expect(status(committed)).toBe("in-sync");
  });

  it("revert restores the exact pre-edit output", () => {
    const edited = editOutput(ran, { kind: "text", literal: "zzz" });
    const back = revert(edited);
    expect(status(back)).toBe("in-sync");
    expect(back.currentOutput).toBe(ran.lastSyncedOutput);
  });

  it("typing in the code pane drops stale solutions", () => {
    const withSols = gotSolutions(ran, [
      { code: "x", summary: "", outputPreview: "" },
    ]);
    expect(typeCode(withSols, "main = 3").solutions).toBeNull();
  });
});

describe("autosync", () => {
  it("fires once after the quiet period", async () => {
    vi.useFakeTimers();
    const calls: number[] = [];
    const timer = new AutoSyncTimer(
      { reconcile: async () => void calls.push(Date.now()) },
      1000,
    );
    timer.poke();
    vi.advanceTimersByTime(500);
    timer.poke(); // rapid edits supersede the pending run
    vi.advanceTimersByTime(999);
    expect(calls.length).toBe(0);
    vi.advanceTimersByTime(1);
    await vi.runAllTimersAsync();
    expect(calls.length).toBe(1);
    vi.useRealTimers();
  });

  it("toggling off cancels the pending timer", () => {
    vi.useFakeTimers();
    const calls: number[] = [];
    const timer = new AutoSyncTimer(
      { reconcile: async () => void calls.push(1) },
      1000,
    );
    timer.poke();
    expect(timer.pending).toBe(true);
    timer.cancel();
    expect(timer.pending).toBe(false);
    vi.advanceTimersByTime(5000);
    expect(calls.length).toBe(0);
    vi.useRealTimers();
  });
});

describe("highlight", () => {
  it("parses removal and replacement summaries", () => {
    const marks = parseSummary("L2 Removed [?] L3 Replaced [L?] by [K]");
    expect(marks).toEqual([
      { line: 2, kind: "removed", fragment: "?" },
      { line: 3, kind: "replaced", fragment: "L?", replacement: "K" },
    ]);
    expect(markColor(marks[0].kind)).toBe("red");
    expect(markColor(marks[1].kind)).toBe("orange");
    expect([...markedLines(marks)].sort()).toEqual([2, 3]);
  });

  it("parses insertions", () => {
    const marks = parseSummary(
      'L4 Replaced [R?", "?] by [Z", "] L14 Inserted [Phoenix]',
    );
    expect(marks[1]).toEqual({
      line: 14,
      kind: "inserted",
      fragment: "Phoenix",
    });
  });
});
