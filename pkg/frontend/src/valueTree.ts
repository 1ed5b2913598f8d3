// The value tree mirrors the program output. Text edits in the rendered
// DOM mutate a copy of this tree; serializing it produces the value-literal
// text sent back as `newOutput`.

import type { HtmlNode } from "./protocol.js";

export type TextPath = number[]; // child indexes from the root to a text node

export function cloneTree(node: HtmlNode): HtmlNode {
  if ("text" in node) return { text: node.text };
  return {
    tag: node.tag,
    attrs: node.attrs.map(([k, v]) => [k, v] as [string, string]),
    children: node.children.map(cloneTree),
  };
}

export function treesEqual(a: HtmlNode, b: HtmlNode): boolean {
  return serializeTree(a) === serializeTree(b);
}

export function getText(root: HtmlNode, path: TextPath): string {
  let node = root;
  for (const i of path) {
    if ("text" in node) throw new Error("path descends into a text node");
    node = node.children[i];
  }
  if (!("text" in node)) throw new Error("path does not reach a text node");
  return node.text;
}

export function setText(root: HtmlNode, path: TextPath, text: string): HtmlNode {
  const out = cloneTree(root);
  let node = out;
  for (const i of path) {
    if ("text" in node) throw new Error("path descends into a text node");
    node = node.children[i];
  }
  if (!("text" in node)) throw new Error("path does not reach a text node");
  node.text = text;
  return out;
}

function escapeString(s: string): string {
  let out = '"';
  for (const ch of s) {
    if (ch === '"') out += '\\"';
    else if (ch === "\\") out += "\\\\";
    else if (ch === "\n") out += "\\n";
    else if (ch === "\t") out += "\\t";
    else if (ch === "\r") out += "\\r";
    else out += ch;
  }
  return out + '"';
}

// Matches the service's value-literal printing for HTML-encoded trees.
export function serializeTree(node: HtmlNode): string {
  if ("text" in node) {
    return `["TEXT", ${escapeString(node.text)}]`;
  }
  const attrs = node.attrs
    .map(([k, v]) => `[${escapeString(k)}, ${escapeString(v)}]`)
    .join(", ");
  const children = node.children.map(serializeTree).join(", ");
  return `[${escapeString(node.tag)}, [${attrs}], [${children}]]`;
}

export function textPaths(root: HtmlNode): TextPath[] {
  const out: TextPath[] = [];
  const walk = (node: HtmlNode, path: TextPath) => {
    if ("text" in node) {
      out.push(path);
      return;
    }
    node.children.forEach((child, i) => walk(child, [...path, i]));
  };
  walk(root, []);
  return out;
}
