/**
 * End-to-end conversion of raw (text, label) records into the trainer's
 * file formats: corpus JSONL, two embedding tables with token files, and a
 * reproducibility manifest. The pipeline only ever writes files; the
 * cross-component contract is purely the formats.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { mentionsFrom } from "./bio";
import { stripSpecialCharacters } from "./backends";
import { writeEmbeddingTable } from "./lgem";
import type { AnnotatedRecord, Backends, RawRecord } from "./types";

export type PipelineOptions = {
  outDir: string;
  idPrefix?: string;
  log?: (message: string) => void;
};

export type PipelineResult = {
  records: AnnotatedRecord[];
  skipped: number;
  corpusFile: string;
  morphemeFile: string;
  entityFile: string;
  manifestFile: string;
};

export function annotateRecords(
  records: RawRecord[],
  backends: Backends,
  log: (message: string) => void = () => {},
  idPrefix = "doc",
): { annotated: AnnotatedRecord[]; skipped: number } {
  const annotated: AnnotatedRecord[] = [];
  let skipped = 0;
  records.forEach((record, i) => {
    let analysis;
    try {
      analysis = backends.analyzer.analyze(record.text);
    } catch (err) {
      skipped += 1;
      log(`skipping record ${i}: ${(err as Error).message}`);
      return;
    }
    if (analysis.morphemes.length !== analysis.posTags.length) {
      skipped += 1;
      log(`skipping record ${i}: analyzer returned misaligned sequences`);
      return;
    }
    const eojeol = stripSpecialCharacters(record.text).split(" ").filter(Boolean);
    const tags = backends.tagger.tag(eojeol);
    annotated.push({
      id: `${idPrefix}_${i}`,
      morphemes: analysis.morphemes,
      posTags: analysis.posTags,
      entities: mentionsFrom(eojeol, tags),
      label: record.label,
    });
  });
  return { annotated, skipped };
}

export function morphemeVocabulary(records: AnnotatedRecord[]): string[] {
  const seen = new Set<string>();
  const vocab: string[] = [];
  for (const record of records) {
    for (const morpheme of record.morphemes) {
      if (!seen.has(morpheme)) {
        seen.add(morpheme);
        vocab.push(morpheme);
      }
    }
  }
  return vocab;
}

export function entityVocabulary(records: AnnotatedRecord[]): string[] {
  const seen = new Set<string>();
  const vocab: string[] = [];
  for (const record of records) {
    for (const entity of record.entities) {
      if (!seen.has(entity)) {
        seen.add(entity);
        vocab.push(entity);
      }
    }
  }
  return vocab;
}

/** Mean of the mention's per-token hidden states. */
export function entityVector(
  mention: string,
  encoder: Backends["encoder"],
): Float32Array {
  const tokens = mention.split(" ").filter(Boolean);
  const states = encoder.encode(tokens);
  const out = new Float32Array(encoder.dim);
  for (const state of states) {
    for (let d = 0; d < encoder.dim; d++) {
      out[d] += state[d];
    }
  }
  for (let d = 0; d < encoder.dim; d++) {
    out[d] /= states.length || 1;
  }
  return out;
}

export function writeCorpus(filePath: string, records: AnnotatedRecord[]): void {
  const lines = records.map((record) =>
    JSON.stringify({
      id: record.id,
      morphemes: record.morphemes,
      pos: record.posTags,
      entities: record.entities,
      label: record.label,
      split: null,
    }),
  );
  fs.writeFileSync(filePath, lines.map((l) => l + "\n").join(""), "utf-8");
}

export function runPipeline(
  records: RawRecord[],
  backends: Backends,
  options: PipelineOptions,
): PipelineResult {
  const log = options.log ?? ((message: string) => console.error(message));
  if (records.length === 0) {
    throw new Error("no input records");
  }
  const { annotated, skipped } = annotateRecords(
    records,
    backends,
    log,
    options.idPrefix ?? "doc",
  );
  if (annotated.length === 0) {
    throw new Error("every record failed analysis");
  }
  fs.mkdirSync(options.outDir, { recursive: true });
  const corpusFile = path.join(options.outDir, "corpus.jsonl");
  writeCorpus(corpusFile, annotated);

  const morphemes = morphemeVocabulary(annotated);
  const morphemeFile = path.join(options.outDir, "morpheme_embeddings.lgem");
  writeEmbeddingTable(morphemeFile, {
    dim: backends.encoder.dim,
    tokens: morphemes,
    vectors: morphemes.map((m) => backends.encoder.encode([m])[0]),
  });

  const entities = entityVocabulary(annotated);
  const entityFile = path.join(options.outDir, "entity_embeddings.lgem");
  writeEmbeddingTable(entityFile, {
    dim: backends.encoder.dim,
    tokens: entities,
    vectors: entities.map((e) => entityVector(e, backends.encoder)),
  });

  const manifestFile = path.join(options.outDir, "manifest.json");
  const manifest = {
    analyzer: backends.analyzer.name,
    tagger: backends.tagger.name,
    encoder: backends.encoder.name,
    embedding_dim: backends.encoder.dim,
    records_in: records.length,
    records_out: annotated.length,
    records_skipped: skipped,
    morpheme_vocab: morphemes.length,
    entity_vocab: entities.length,
  };
  fs.writeFileSync(manifestFile, JSON.stringify(manifest, null, 2) + "\n", "utf-8");

  return {
    records: annotated,
    skipped,
    corpusFile,
    morphemeFile,
    entityFile,
    manifestFile,
  };
}
