// Turn solution summaries ("L2 Removed [?] L14 Inserted [Phoenix] ...") into
// per-line highlight marks: removals render red, replacements/insertions
// orange.

export interface LineMark {
  line: number; // 1-based
  kind: "removed" | "replaced" | "inserted";
  fragment: string;
  replacement?: string;
}

const PART = /L(\d+) (Removed|Inserted|Replaced|Added line|Removed line) \[/g;

export function parseSummary(summary: string): LineMark[] {
  const marks: LineMark[] = [];
  let m: RegExpExecArray | null;
  while ((m = PART.exec(summary)) !== null) {
    const line = parseInt(m[1], 10);
    const verb = m[2];
    const start = m.index + m[0].length;
    const frag = readBracket(summary, start);
    if (frag === null) continue;
    if (verb === "Removed" || verb === "Removed line") {
      marks.push({ line, kind: "removed", fragment: frag.text });
    } else if (verb === "Inserted" || verb === "Added line") {
      marks.push({ line, kind: "inserted", fragment: frag.text });
    } else {
      // Replaced [old] by [new]
      const byAt = summary.indexOf(" by [", frag.end);
      let replacement: string | undefined;
      if (byAt === frag.end) {
        const rep = readBracket(summary, byAt + " by [".length);
        if (rep) replacement = rep.text;
      }
      marks.push({ line, kind: "replaced", fragment: frag.text, replacement });
    }
  }
  return marks;
}

function readBracket(
  s: string,
  start: number,
): { text: string; end: number } | null {
  // fragments may contain '[': scan to the matching close bracket by
  // looking for "] " followed by L<number>, " by [", or end of string
  let depth = 1;
  for (let i = start; i < s.length; i++) {
    if (s[i] === "[") depth++;
    else if (s[i] === "]") {
      depth--;
      if (depth === 0) return { text: s.slice(start, i), end: i + 1 };
    }
  }
  return null;
}

export function markColor(kind: LineMark["kind"]): string {
  return kind === "removed" ? "red" : "orange";
}

/** Lines of `code` (1-based) that carry at least one mark. */
export function markedLines(marks: LineMark[]): Set<number> {
  return new Set(marks.map((m) => m.line));
}
