// End-to-end playground flows against the real sync service: edit a cell,
// watch the dirty badge, open the menu, hover-preview, commit, and check the
// committed code matches the expected repairs. Runs in jsdom with the
// service spawned as a subprocess.

import { spawn, ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { JSDOM } from "jsdom";

import { PlaygroundApp } from "../src/app.js";
import { SyncClient } from "../src/protocol.js";
import { textPaths, getText } from "../src/valueTree.js";
import { status } from "../src/editorState.js";

const PORT = 8917;
const BASE = `http://127.0.0.1:${PORT}`;
let server: ChildProcess;

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 120; i++) {
    try {
      const res = await fetch(`${BASE}/api/examples`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 250));
  }
  throw new Error("service did not start");
}

beforeAll(async () => {
  server = spawn(
    "python3",
    ["-m", "bideval.service", "--port", String(PORT)],
    { cwd: "..", stdio: "ignore" },
  );
  await waitForServer();
}, 60_000);

afterAll(() => {
  server?.kill();
});

function makeApp(): PlaygroundApp {
  const dom = new JSDOM("<!doctype html><div id='app'></div>");
  const doc = dom.window.document;
  const root = doc.getElementById("app") as HTMLElement;
  return new PlaygroundApp(doc, root, new SyncClient(BASE));
}

function editCell(app: PlaygroundApp, oldText: string, newText: string): void {
  const out = app.state.currentOutput;
  if (!out || out.kind !== "html") throw new Error("expected html output");
  const path = textPaths(out.tree).find(
    (p) => getText(out.tree, p) === oldText,
  );
  if (!path) throw new Error(`no text node ${oldText}`);
  const span = app.outputPane.querySelector(
    `[data-path="${path.join(".")}"]`,
  ) as HTMLElement;
  span.textContent = newText;
  span.dispatchEvent(new span.ownerDocument.defaultView!.Event("input"));
}

function menuItems(app: PlaygroundApp): HTMLElement[] {
  return [...app.menu.querySelectorAll(".menu-item:not(.revert)")] as
    HTMLElement[];
}

describe("playground end to end", () => {
  it("replays the single-solution cell edit (remove the stray ?)", async () => {
    const app = makeApp();
    await app.loadExample("states-table");
    const original = app.state.code;
    expect(status(app.state)).toBe("in-sync");
    expect(app.outputPane.querySelector("table")).toBeTruthy();

    editCell(app, "Montgomery, AL?", "Montgomery, AL");
    expect(status(app.state)).toBe("dirty");
    expect(app.statusBadge.dataset.status).toBe("dirty");
    // the output edit alone never touches the code pane
    expect(app.state.code).toBe(original);

    await app.reconcile();
    const items = menuItems(app);
    expect(items.length).toBe(1);
    expect(items[0].textContent).toContain("L2 Removed [?]");

    // hovering previews the new code and output in the two panes
    app.hover(0);
    expect(status(app.state)).toBe("previewing");
    expect(app.codePane.value).toContain('["Alabama", "AL", "Montgomery"]');
    expect(app.codePane.dataset.highlightColors).toContain("2:red");
    expect(app.outputPane.textContent).toContain("Montgomery, AL");
    app.unhover();
    expect(app.codePane.value).toBe(original);

    // committing replaces the code pane and returns to sync
    app.hover(0);
    app.commit(0);
    const expected = original.replace(
      '["Alabama", "AL?", "Montgomery"]',
      '["Alabama", "AL", "Montgomery"]',
    );
    expect(app.state.code).toBe(expected);
    expect(status(app.state)).toBe("in-sync");

    // re-running the committed code reproduces the committed preview
    const rerun = await new SyncClient(BASE).run(app.state.code);
    expect(rerun.ok).toBe(true);
    expect(rerun.value).toContain("Montgomery, AL");
    expect(rerun.value).not.toContain("Montgomery, AL?");
  }, 30_000);

  it("replays the ambiguous Phoenix edit with two candidate repairs", async () => {
    const app = makeApp();
    await app.loadExample("states-table");
    const original = app.state.code;

    editCell(app, "?, AR?", "Phoenix, AZ");
    await app.reconcile();
    const items = menuItems(app);
    expect(items.length).toBe(2);

    // one solution prefixes the ", " separator: previewing it shows Phoenix
    // appearing in every row
    const texts = items.map((el) => el.textContent ?? "");
    const sepIndex = texts.findIndex((t) => t.includes("Inserted [Phoenix]"));
    expect(sepIndex).toBeGreaterThanOrEqual(0);
    app.hover(sepIndex);
    const previewText = app.outputPane.textContent ?? "";
    const occurrences = previewText.split("Phoenix").length - 1;
    expect(occurrences).toBeGreaterThanOrEqual(7);
    app.unhover();

    // the other solution touches only the data literal
    const dataIndex = 1 - sepIndex;
    app.hover(dataIndex);
    expect(app.codePane.value).toContain('["Arizona", "AZ", "Phoenix"]');
    expect(app.codePane.value).toContain('cap + ", " + abbrev');
    app.commit(dataIndex);
    const expected = original.replace(
      '["Arizona", "AR?", "?"]',
      '["Arizona", "AZ", "Phoenix"]',
    );
    expect(app.state.code).toBe(expected);
    expect(status(app.state)).toBe("in-sync");
  }, 30_000);

  it("auto-sync applies a unique solution within 1000 ms + latency", async () => {
    const app = makeApp();
    await app.loadExample("states-table");
    const original = app.state.code;
    app.autoSyncToggle.checked = true;
    app.autoSyncToggle.dispatchEvent(
      new app.autoSyncToggle.ownerDocument.defaultView!.Event("change"),
    );

    editCell(app, "Juneau, AL?", "Juneau, AK");
    expect(status(app.state)).toBe("dirty");
    const t0 = Date.now();
    while (status(app.state) !== "in-sync" && Date.now() - t0 < 15_000) {
      await new Promise((r) => setTimeout(r, 25));
    }
    const elapsed = Date.now() - t0;
    expect(status(app.state)).toBe("in-sync");
    expect(elapsed).toBeGreaterThanOrEqual(1000); // the full quiet period
    expect(elapsed).toBeLessThan(1000 + 5000);    // plus request latency
    expect(app.state.code).toBe(
      original.replace('["Alaska", "AL?", "Juneau"]',
                       '["Alaska", "AK", "Juneau"]'),
    );
  }, 30_000);

  it("zero-solution edits offer only revert", async () => {
    const app = makeApp();
    app.setCode("main = Update.freeze 5\n");
    await app.run();
    app.applyLiteralEdit("6");
    await app.reconcile();
    expect(menuItems(app).length).toBe(0);
    expect(app.menu.textContent).toContain("No repairs found");
    expect(app.menu.textContent).toContain("Revert");
    app.revertEdits();
    expect(status(app.state)).toBe("in-sync");
  }, 30_000);
});
