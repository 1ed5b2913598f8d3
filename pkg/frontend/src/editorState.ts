// Editor state machine: the code pane, the last synchronized output, the
// output as currently edited, and the reconciliation lifecycle.
//
// Invariants:
//  - status is "dirty" exactly when currentOutput differs from
//    lastSyncedOutput;
//  - "previewing" implies a non-empty solutions list;
//  - `code` changes only through typeCode / commitSolution.

import type { HtmlNode, SolutionEntry } from "./protocol.js";
import { serializeTree, treesEqual } from "./valueTree.js";

export type Output =
  | { kind: "html"; tree: HtmlNode }
  | { kind: "text"; literal: string };

export type SyncStatus = "in-sync" | "dirty" | "previewing";

export interface EditorState {
  code: string;
  lastSyncedOutput: Output | null;
  currentOutput: Output | null;
  solutions: SolutionEntry[] | null;
  previewIndex: number | null;
  autoSync: boolean;
  debounceMs: number;
}

export function initialState(): EditorState {
  return {
    code: "",
    lastSyncedOutput: null,
    currentOutput: null,
    solutions: null,
    previewIndex: null,
    autoSync: false,
    debounceMs: 1000,
  };
}

export function outputsEqual(a: Output | null, b: Output | null): boolean {
  if (a === null || b === null) return a === b;
  if (a.kind === "html" && b.kind === "html") return treesEqual(a.tree, b.tree);
  if (a.kind === "text" && b.kind === "text") return a.literal === b.literal;
  return false;
}

export function status(state: EditorState): SyncStatus {
  if (state.previewIndex !== null) return "previewing";
  return outputsEqual(state.currentOutput, state.lastSyncedOutput)
    ? "in-sync"
    : "dirty";
}

export function serializeOutput(out: Output): string {
  return out.kind === "html" ? serializeTree(out.tree) : out.literal;
}

export function typeCode(state: EditorState, code: string): EditorState {
  return { ...state, code, solutions: null, previewIndex: null };
}

export function ranProgram(state: EditorState, output: Output): EditorState {
  return {
    ...state,
    lastSyncedOutput: output,
    currentOutput: output,
    solutions: null,
    previewIndex: null,
  };
}

export function editOutput(state: EditorState, output: Output): EditorState {
  // output edits never touch the code pane
  return { ...state, currentOutput: output, solutions: null, previewIndex: null };
}

export function gotSolutions(
  state: EditorState,
  solutions: SolutionEntry[],
): EditorState {
  return { ...state, solutions, previewIndex: null };
}

export function hoverPreview(state: EditorState, index: number): EditorState {
  if (!state.solutions || !state.solutions.length) return state;
  if (index < 0 || index >= state.solutions.length) return state;
  return { ...state, previewIndex: index };
}

export function leavePreview(state: EditorState): EditorState {
  return { ...state, previewIndex: null };
}

export function commitSolution(state: EditorState, index: number): EditorState {
  const solutions = state.solutions ?? [];
  const sol = solutions[index];
  if (!sol) return state;
  const output: Output = sol.previewTree
    ? { kind: "html", tree: sol.previewTree }
    : { kind: "text", literal: sol.outputPreview };
  return {
    ...state,
    code: sol.code,
    lastSyncedOutput: output,
    currentOutput: output,
    solutions: null,
    previewIndex: null,
  };
}

export function revert(state: EditorState): EditorState {
  return {
    ...state,
    currentOutput: state.lastSyncedOutput,
    solutions: null,
    previewIndex: null,
  };
}

export function setAutoSync(state: EditorState, on: boolean): EditorState {
  return { ...state, autoSync: on };
}
