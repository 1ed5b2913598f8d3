// Playground wiring: code pane on the left, rendered output on the right,
// a reconcile menu for candidate repairs, and the auto-sync toggle.

import { AutoSyncTimer } from "./autosync.js";
import {
  EditorState, Output, commitSolution, editOutput, gotSolutions,
  hoverPreview, initialState, leavePreview, outputsEqual, ranProgram,
  revert, serializeOutput, setAutoSync, status, typeCode,
} from "./editorState.js";
import { markColor, markedLines, parseSummary } from "./highlight.js";
import type { HtmlNode, SolutionEntry, SyncClient } from "./protocol.js";
import { setText, textPaths } from "./valueTree.js";

export class PlaygroundApp {
  state: EditorState = initialState();
  private timer: AutoSyncTimer;
  lastError = "";

  readonly codePane: HTMLTextAreaElement;
  readonly outputPane: HTMLElement;
  readonly statusBadge: HTMLElement;
  readonly menu: HTMLElement;
  readonly autoSyncToggle: HTMLInputElement;

  constructor(
    private doc: Document,
    root: HTMLElement,
    private client: SyncClient,
  ) {
    root.innerHTML = "";
    const bar = doc.createElement("div");
    bar.className = "toolbar";
    this.statusBadge = doc.createElement("span");
    this.statusBadge.className = "status";
    const runBtn = doc.createElement("button");
    runBtn.textContent = "Run";
    runBtn.className = "run";
    runBtn.addEventListener("click", () => void this.run());
    const reconcileBtn = doc.createElement("button");
    reconcileBtn.textContent = "Update program";
    reconcileBtn.className = "reconcile";
    reconcileBtn.addEventListener("click", () => void this.reconcile());
    this.autoSyncToggle = doc.createElement("input");
    this.autoSyncToggle.type = "checkbox";
    this.autoSyncToggle.className = "autosync";
    this.autoSyncToggle.addEventListener("change", () => {
      this.state = setAutoSync(this.state, this.autoSyncToggle.checked);
      if (!this.state.autoSync) this.timer.cancel();
    });
    const toggleLabel = doc.createElement("label");
    toggleLabel.append(this.autoSyncToggle, doc.createTextNode(" Auto Sync"));
    bar.append(runBtn, reconcileBtn, toggleLabel, this.statusBadge);

    const panes = doc.createElement("div");
    panes.className = "panes";
    this.codePane = doc.createElement("textarea");
    this.codePane.className = "code";
    this.codePane.addEventListener("input", () => {
      this.state = typeCode(this.state, this.codePane.value);
      this.renderStatus();
    });
    this.outputPane = doc.createElement("div");
    this.outputPane.className = "output";
    panes.append(this.codePane, this.outputPane);

    this.menu = doc.createElement("div");
    this.menu.className = "menu";
    this.menu.hidden = true;

    root.append(bar, panes, this.menu);
    this.timer = new AutoSyncTimer({ reconcile: () => this.reconcile() });
    this.renderStatus();
  }

  async loadExample(id: string): Promise<void> {
    const ex = await this.client.example(id);
    this.setCode(ex.code);
    await this.run();
  }

  /** Programs may configure the auto-sync quiet period (default 1000 ms). */
  timerDelayForTest(ms: number): void {
    this.state = { ...this.state, debounceMs: ms };
    this.timer.delayMs = ms;
  }

  setCode(code: string): void {
    this.state = typeCode(this.state, code);
    this.codePane.value = code;
    this.renderStatus();
  }

  async run(): Promise<void> {
    const res = await this.client.run(this.state.code);
    if (!res.ok) {
      this.lastError = res.error ?? "evaluation failed";
      this.renderStatus();
      return;
    }
    this.lastError = "";
    const output: Output = res.htmlTree
      ? { kind: "html", tree: res.htmlTree }
      : { kind: "text", literal: res.value ?? "" };
    this.state = ranProgram(this.state, output);
    this.renderOutput();
    this.renderStatus();
    this.closeMenu();
  }

  /** The user edited a text node in the rendered output. */
  applyTextEdit(path: number[], text: string): void {
    const out = this.state.currentOutput;
    if (!out || out.kind !== "html") return;
    const tree = setText(out.tree, path, text);
    this.state = editOutput(this.state, { kind: "html", tree });
    this.renderStatus();
    if (this.state.autoSync) this.timer.poke();
  }

  applyLiteralEdit(literal: string): void {
    this.state = editOutput(this.state, { kind: "text", literal });
    this.renderStatus();
    if (this.state.autoSync) this.timer.poke();
  }

  async reconcile(): Promise<void> {
    const current = this.state.currentOutput;
    if (!current || status(this.state) !== "dirty") return;
    let res;
    try {
      res = await this.client.update(this.state.code,
                                     serializeOutput(current));
    } catch (err) {
      this.lastError = String(err);  // non-blocking: state stays dirty
      this.renderStatus();
      return;
    }
    if (!res.ok) {
      this.lastError = res.error ?? "update failed";
      this.renderStatus();
      return;
    }
    const solutions = res.solutions ?? [];
    this.state = gotSolutions(this.state, solutions);
    if (this.state.autoSync && solutions.length === 1) {
      this.commit(0);
      return;
    }
    this.openMenu(solutions);
  }

  commit(index: number): void {
    this.state = commitSolution(this.state, index);
    this.codePane.value = this.state.code;
    this.renderOutput();
    this.renderStatus();
    this.closeMenu();
  }

  revertEdits(): void {
    this.state = revert(this.state);
    this.codePane.value = this.state.code;
    this.renderOutput();
    this.renderStatus();
    this.closeMenu();
  }

  hover(index: number): void {
    this.state = hoverPreview(this.state, index);
    const sol = this.state.solutions?.[index];
    if (!sol) return;
    // preview both panes without committing
    this.codePane.value = sol.code;
    this.renderHighlights(sol);
    if (sol.previewTree) {
      this.renderTree(sol.previewTree, false);
    } else {
      this.renderLiteral(sol.outputPreview, false);
    }
    this.renderStatus();
  }

  unhover(): void {
    this.state = leavePreview(this.state);
    this.codePane.value = this.state.code;
    this.clearHighlights();
    this.renderOutput();
    this.renderStatus();
  }

  // -- rendering -------------------------------------------------------------

  renderStatus(): void {
    const s = status(this.state);
    this.statusBadge.textContent = this.lastError
      ? `error: ${this.lastError}`
      : s;
    this.statusBadge.dataset.status = s;
  }

  private renderOutput(): void {
    const out = this.state.currentOutput;
    if (!out) {
      this.outputPane.innerHTML = "";
      return;
    }
    if (out.kind === "html") this.renderTree(out.tree, true);
    else this.renderLiteral(out.literal, true);
  }

  private renderTree(tree: HtmlNode, editable: boolean): void {
    this.outputPane.innerHTML = "";
    this.outputPane.appendChild(this.buildNode(tree, [], editable));
  }

  private buildNode(node: HtmlNode, path: number[], editable: boolean): Node {
    if ("text" in node) {
      const span = this.doc.createElement("span");
      span.textContent = node.text;
      span.className = "textnode";
      span.dataset.path = path.join(".");
      if (editable) {
        span.setAttribute("contenteditable", "true");
        span.addEventListener("input", () => {
          this.applyTextEdit(path, span.textContent ?? "");
        });
      }
      return span;
    }
    const el = this.doc.createElement(node.tag);
    for (const [name, value] of node.attrs) {
      el.setAttribute(name, value);
    }
    node.children.forEach((child, i) => {
      el.appendChild(this.buildNode(child, [...path, i], editable));
    });
    return el;
  }

  private renderLiteral(literal: string, editable: boolean): void {
    this.outputPane.innerHTML = "";
    const area = this.doc.createElement("textarea");
    area.className = "literal";
    area.value = literal;
    if (editable) {
      area.addEventListener("input", () => this.applyLiteralEdit(area.value));
    } else {
      area.readOnly = true;
    }
    this.outputPane.appendChild(area);
  }

  openMenu(solutions: SolutionEntry[]): void {
    this.menu.innerHTML = "";
    this.menu.hidden = false;
    const title = this.doc.createElement("div");
    title.className = "menu-title";
    title.textContent = solutions.length
      ? "Update program"
      : "No repairs found";
    this.menu.appendChild(title);
    solutions.forEach((sol, i) => {
      const item = this.doc.createElement("div");
      item.className = "menu-item";
      item.dataset.index = String(i);
      item.textContent = sol.summary || "(unchanged)";
      item.addEventListener("mouseenter", () => this.hover(i));
      item.addEventListener("mouseleave", () => this.unhover());
      item.addEventListener("click", () => this.commit(i));
      this.menu.appendChild(item);
    });
    const rev = this.doc.createElement("div");
    rev.className = "menu-item revert";
    rev.textContent = "Revert changes";
    rev.addEventListener("click", () => this.revertEdits());
    this.menu.appendChild(rev);
  }

  closeMenu(): void {
    this.menu.hidden = true;
    this.menu.innerHTML = "";
  }

  private renderHighlights(sol: SolutionEntry): void {
    const marks = parseSummary(sol.summary);
    const lines = markedLines(marks);
    this.codePane.dataset.highlightLines = [...lines].sort((a, b) => a - b)
      .join(",");
    this.codePane.dataset.highlightColors = marks
      .map((m) => `${m.line}:${markColor(m.kind)}`)
      .join(",");
  }

  private clearHighlights(): void {
    delete this.codePane.dataset.highlightLines;
    delete this.codePane.dataset.highlightColors;
  }
}
