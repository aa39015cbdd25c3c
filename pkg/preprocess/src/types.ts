export type RawRecord = {
  text: string;
  label: string | null;
};

export type MorphAnalysis = {
  morphemes: string[];
  posTags: string[];
};

export type AnnotatedRecord = {
  id: string;
  morphemes: string[];
  posTags: string[];
  entities: string[];
  label: string | null;
};

/**
 * Morphological analyzer backend. The production adapter wraps an external
 * analyzer process; tests use the deterministic rule-based fallback.
 * Implementations must throw on per-record failure so the pipeline can skip
 * and log the record.
 */
export interface MorphAnalyzer {
  readonly name: string;
  analyze(text: string): MorphAnalysis;
}

/** Token-level BIO tagger over eojeol (whitespace) tokens. */
export interface EntityTagger {
  readonly name: string;
  tag(tokens: string[]): string[];
}

/**
 * Encoder producing one hidden-state vector per input token; entity rows are
 * mean-pooled over a mention's token vectors downstream.
 */
export interface TokenEncoder {
  readonly name: string;
  readonly dim: number;
  encode(tokens: string[]): Float32Array[];
}

export type Backends = {
  analyzer: MorphAnalyzer;
  tagger: EntityTagger;
  encoder: TokenEncoder;
};
