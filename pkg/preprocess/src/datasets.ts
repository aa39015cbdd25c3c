/**
 * Raw dataset loaders. Supported published formats:
 *   - tsv:   text<TAB>label, one record per line, optional header
 *   - jsonl: one JSON object per line with "text" and "label" keys
 *            (KLUE-style "title" is accepted as the text field)
 */

import * as fs from "node:fs";

import type { RawRecord } from "./types";

export function loadTsv(path: string, hasHeader = false): RawRecord[] {
  const lines = fs.readFileSync(path, "utf-8").split(/\r?\n/);
  const records: RawRecord[] = [];
  lines.forEach((line, i) => {
    if (!line.trim() || (hasHeader && i === 0)) return;
    const cut = line.lastIndexOf("\t");
    if (cut === -1) {
      throw new Error(`${path}:${i + 1}: expected text<TAB>label`);
    }
    records.push({ text: line.slice(0, cut), label: line.slice(cut + 1).trim() || null });
  });
  return records;
}

export function loadJsonl(path: string): RawRecord[] {
  const lines = fs.readFileSync(path, "utf-8").split(/\r?\n/);
  const records: RawRecord[] = [];
  lines.forEach((line, i) => {
    if (!line.trim()) return;
    let parsed: Record<string, unknown>;
    try {
      parsed = JSON.parse(line);
    } catch {
      throw new Error(`${path}:${i + 1}: invalid JSON`);
    }
    const text = parsed.text ?? parsed.title;
    if (typeof text !== "string") {
      throw new Error(`${path}:${i + 1}: missing "text" field`);
    }
    const label = parsed.label;
    records.push({
      text,
      label: typeof label === "string" ? label : label == null ? null : String(label),
    });
  });
  return records;
}

export function loadDataset(path: string, format: "tsv" | "jsonl"): RawRecord[] {
  const records = format === "tsv" ? loadTsv(path) : loadJsonl(path);
  if (records.length === 0) {
    throw new Error(`${path}: dataset is empty`);
  }
  return records;
}
