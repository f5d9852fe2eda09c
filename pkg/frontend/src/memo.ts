// Memo documents arrive as text: a front-matter header between "---" fences,
// then "## " sections whose bodies may carry [[artifact:<hash>]] citations.
// The reader turns markers into links; it never rewrites memo content.

import { escapeHtml, shortId } from "./format.js";

export const CITATION = /\[\[artifact:([0-9a-f]{64})\]\]/g;

export interface MemoSection {
  heading: string;
  body: string;
}

export interface ParsedMemo {
  meta: Record<string, string | string[]>;
  sections: MemoSection[];
}

/**
 * Minimal front-matter reader for the subset the engine writes: scalar
 * `key: value` lines and `- item` lists. Quotes around scalars are shed.
 */
export function parseFrontMatter(text: string): {
  meta: Record<string, string | string[]>;
  body: string;
} {
  const meta: Record<string, string | string[]> = {};
  if (!text.startsWith("---\n")) return { meta, body: text };
  const end = text.indexOf("\n---\n", 4);
  if (end === -1) return { meta, body: text };
  const header = text.slice(4, end);
  const body = text.slice(end + 5);
  let listKey: string | null = null;
  for (const raw of header.split("\n")) {
    const line = raw.trimEnd();
    if (!line) continue;
    const item = line.match(/^\s*-\s+(.*)$/);
    if (item && listKey) {
      (meta[listKey] as string[]).push(unquote(item[1]));
      continue;
    }
    const pair = line.match(/^([A-Za-z_][\w-]*):\s*(.*)$/);
    if (!pair) continue;
    const [, key, value] = pair;
    if (value === "") {
      meta[key] = [];
      listKey = key;
    } else {
      meta[key] = unquote(value);
      listKey = null;
    }
  }
  return { meta, body };
}

function unquote(value: string): string {
  const m = value.match(/^'(.*)'$/) ?? value.match(/^"(.*)"$/);
  return m ? m[1] : value;
}

export function splitSections(body: string): MemoSection[] {
  const sections: MemoSection[] = [];
  let current: MemoSection | null = null;
  for (const line of body.split("\n")) {
    const heading = line.match(/^##\s+(.*)$/);
    if (heading) {
      current = { heading: heading[1].trim(), body: "" };
      sections.push(current);
    } else if (current) {
      current.body += (current.body ? "\n" : "") + line;
    }
  }
  for (const section of sections) section.body = section.body.trim();
  return sections;
}

export function parseMemo(text: string): ParsedMemo {
  const { meta, body } = parseFrontMatter(text);
  return { meta, sections: splitSections(body) };
}

export function citedIds(text: string): string[] {
  const ids = new Set<string>();
  for (const match of text.matchAll(CITATION)) ids.add(match[1]);
  return [...ids].sort();
}

/**
 * Escape a section body, then swap citation markers for artifact links.
 * Unresolved markers render flagged instead of linked. Escaping leaves the
 * marker syntax intact (brackets and hex survive escapeHtml).
 */
export function renderSectionBody(body: string, resolved: Set<string>): string {
  return escapeHtml(body).replace(CITATION, (_whole, id: string) => {
    if (resolved.has(id)) {
      return (
        `<a class="cite" data-action="open-artifact" data-artifact="${id}"` +
        ` href="#artifact-${id}">[${shortId(id)}]</a>`
      );
    }
    return `<span class="cite cite-missing" title="unresolved citation">[${shortId(id)}]</span>`;
  });
}
