/**
 * BIO span decoding: contiguous B-X / I-X runs merge into one surface
 * mention, O tokens are ignored. A dangling I-X (after O, start of sequence,
 * or a different type) starts a new span, the conventional lenient reading.
 */

export type Span = {
  start: number;
  end: number; // exclusive
  entityType: string;
  surface: string;
};

export function decodeBioSpans(tokens: string[], tags: string[]): Span[] {
  if (tokens.length !== tags.length) {
    throw new Error(`token/tag length mismatch: ${tokens.length} vs ${tags.length}`);
  }
  const spans: Span[] = [];
  let start = -1;
  let entityType = "";

  const flush = (end: number) => {
    if (start >= 0) {
      spans.push({
        start,
        end,
        entityType,
        surface: tokens.slice(start, end).join(" "),
      });
      start = -1;
      entityType = "";
    }
  };

  tags.forEach((tag, i) => {
    if (tag === "O" || tag === "") {
      flush(i);
      return;
    }
    const dash = tag.indexOf("-");
    const marker = dash === -1 ? tag : tag.slice(0, dash);
    const kind = dash === -1 ? "" : tag.slice(dash + 1);
    if (marker === "B" || start === -1 || kind !== entityType) {
      flush(i);
      start = i;
      entityType = kind;
    }
    // marker === "I" with matching type extends the open span
  });
  flush(tags.length);
  return spans;
}

export function mentionsFrom(tokens: string[], tags: string[]): string[] {
  const seen = new Set<string>();
  const out: string[] = [];
  for (const span of decodeBioSpans(tokens, tags)) {
    if (!seen.has(span.surface)) {
      seen.add(span.surface);
      out.push(span.surface);
    }
  }
  return out;
}
