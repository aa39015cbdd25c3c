/**
 * Annotation backends.
 *
 * Production runs plug real Korean tooling (the Kiwi analyzer, a BIO-tagging
 * NER model, a pretrained encoder) in through `CommandAnalyzer` /
 * command-based variants speaking line-delimited JSON over stdin/stdout.
 * The deterministic backends below need no models and make the whole
 * pipeline reproducible offline, which is what the tests exercise.
 */

import { spawnSync } from "node:child_process";

import type { EntityTagger, MorphAnalysis, MorphAnalyzer, TokenEncoder } from "./types";

const SPECIAL_CHARS = /[^\p{L}\p{N}\s]/gu;

export function stripSpecialCharacters(text: string): string {
  return text.replace(SPECIAL_CHARS, " ").replace(/\s+/g, " ").trim();
}

export function fnv1a(text: string): number {
  let hash = 0x811c9dc5;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193) >>> 0;
  }
  return hash >>> 0;
}

/** Small deterministic PRNG; good enough for synthetic hidden states. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const CONTENT_TAGS = ["NNG", "NNP", "VV", "VA", "MM", "MAG"];
const FUNCTION_TAGS = ["JKS", "JKO", "JX", "EF", "EC", "ETM"];

/**
 * Rule-based stand-in for a morphological analyzer: strips special
 * characters, splits eojeol on whitespace, and peels the final character of
 * longer eojeol off as a functional morpheme (a crude stand-in for
 * postposition/ending segmentation). Tags are a deterministic function of
 * the morpheme, so identical surface forms always agree.
 */
export class DeterministicAnalyzer implements MorphAnalyzer {
  readonly name = "deterministic-rule-analyzer/1";

  analyze(text: string): MorphAnalysis {
    const cleaned = stripSpecialCharacters(text);
    const morphemes: string[] = [];
    const posTags: string[] = [];
    if (!cleaned) {
      return { morphemes, posTags };
    }
    for (const eojeol of cleaned.split(" ")) {
      const chars = Array.from(eojeol);
      if (chars.length >= 3) {
        const stem = chars.slice(0, -1).join("");
        const ending = chars[chars.length - 1];
        morphemes.push(stem, ending);
        posTags.push(
          CONTENT_TAGS[fnv1a(stem) % CONTENT_TAGS.length],
          FUNCTION_TAGS[fnv1a(ending) % FUNCTION_TAGS.length],
        );
      } else {
        morphemes.push(eojeol);
        posTags.push(CONTENT_TAGS[fnv1a(eojeol) % CONTENT_TAGS.length]);
      }
    }
    return { morphemes, posTags };
  }
}

/**
 * Gazetteer-backed BIO tagger over eojeol tokens. Multi-token gazetteer
 * phrases produce B-/I- runs; longest match wins at each position.
 */
export class GazetteerTagger implements EntityTagger {
  readonly name = "gazetteer-bio-tagger/1";
  private readonly phrases: { tokens: string[]; entityType: string }[];

  constructor(gazetteer: Record<string, string>) {
    this.phrases = Object.entries(gazetteer)
      .map(([phrase, entityType]) => ({ tokens: phrase.split(" "), entityType }))
      .sort((a, b) => b.tokens.length - a.tokens.length);
  }

  tag(tokens: string[]): string[] {
    const tags = new Array<string>(tokens.length).fill("O");
    let i = 0;
    while (i < tokens.length) {
      const match = this.phrases.find(
        (p) =>
          i + p.tokens.length <= tokens.length &&
          p.tokens.every((t, k) => tokens[i + k] === t),
      );
      if (match) {
        tags[i] = `B-${match.entityType}`;
        for (let k = 1; k < match.tokens.length; k++) {
          tags[i + k] = `I-${match.entityType}`;
        }
        i += match.tokens.length;
      } else {
        i += 1;
      }
    }
    return tags;
  }
}

/**
 * Seeded per-token unit vectors standing in for encoder hidden states.
 * The vector is a pure function of the token string, so vocabulary extraction
 * is reproducible across runs and machines.
 */
export class HashEncoder implements TokenEncoder {
  readonly name: string;
  readonly dim: number;

  constructor(dim = 768) {
    this.dim = dim;
    this.name = `hash-encoder-${dim}/1`;
  }

  encode(tokens: string[]): Float32Array[] {
    return tokens.map((token) => {
      const next = mulberry32(fnv1a(token));
      const vec = new Float32Array(this.dim);
      let sumSquares = 0;
      for (let d = 0; d < this.dim; d++) {
        const value = next() * 2 - 1;
        vec[d] = value;
        sumSquares += value * value;
      }
      const norm = Math.sqrt(sumSquares) || 1;
      for (let d = 0; d < this.dim; d++) {
        vec[d] /= norm;
      }
      return vec;
    });
  }
}

type CommandResponse = { morphemes?: string[]; pos?: string[]; error?: string };

/**
 * Adapter for a real analyzer exposed as a command: each input line is a
 * JSON object {"text": ...}, each output line {"morphemes": [...],
 * "pos": [...]} in the same order. This is the integration point for
 * external morphological analyzers without bundling their runtimes.
 */
export class CommandAnalyzer implements MorphAnalyzer {
  readonly name: string;

  constructor(private readonly command: string, private readonly args: string[] = []) {
    this.name = `command:${command}`;
  }

  analyze(text: string): MorphAnalysis {
    const proc = spawnSync(this.command, this.args, {
      input: JSON.stringify({ text }) + "\n",
      encoding: "utf-8",
    });
    if (proc.status !== 0) {
      throw new Error(`analyzer command failed (${proc.status}): ${proc.stderr}`);
    }
    const line = proc.stdout.split("\n").find((l) => l.trim());
    if (!line) {
      throw new Error("analyzer command produced no output");
    }
    const parsed = JSON.parse(line) as CommandResponse;
    if (parsed.error || !parsed.morphemes || !parsed.pos) {
      throw new Error(parsed.error ?? "analyzer response missing fields");
    }
    if (parsed.morphemes.length !== parsed.pos.length) {
      throw new Error("analyzer returned misaligned morpheme/pos sequences");
    }
    return { morphemes: parsed.morphemes, posTags: parsed.pos };
  }
}
