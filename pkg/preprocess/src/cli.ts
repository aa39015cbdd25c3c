#!/usr/bin/env node
/**
 * CLI: convert a raw dataset into the trainer's corpus/embedding files.
 *
 *   ligram-preprocess --input data.tsv --format tsv --out outdir \
 *       [--dim 768] [--gazetteer gaz.json] [--analyzer-cmd path]
 *
 * Without --analyzer-cmd the deterministic rule-based backends run, which
 * need no external models. A gazetteer JSON maps entity surface forms to
 * entity types.
 */

import * as fs from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import {
  CommandAnalyzer,
  DeterministicAnalyzer,
  GazetteerTagger,
  HashEncoder,
} from "./backends";
import { loadDataset } from "./datasets";
import { runPipeline } from "./pipeline";
import type { Backends } from "./types";

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .option("input", { type: "string", demandOption: true, describe: "raw dataset file" })
    .option("format", {
      choices: ["tsv", "jsonl"] as const,
      default: "tsv" as const,
      describe: "input format",
    })
    .option("out", { type: "string", demandOption: true, describe: "output directory" })
    .option("dim", { type: "number", default: 768, describe: "embedding dimension" })
    .option("gazetteer", {
      type: "string",
      describe: "JSON file mapping entity surface forms to types",
    })
    .option("analyzer-cmd", {
      type: "string",
      describe: "external analyzer command speaking JSONL on stdin/stdout",
    })
    .strict()
    .parse();

  const gazetteer: Record<string, string> = argv.gazetteer
    ? JSON.parse(fs.readFileSync(argv.gazetteer, "utf-8"))
    : {};
  const backends: Backends = {
    analyzer: argv["analyzer-cmd"]
      ? new CommandAnalyzer(argv["analyzer-cmd"])
      : new DeterministicAnalyzer(),
    tagger: new GazetteerTagger(gazetteer),
    encoder: new HashEncoder(argv.dim),
  };
  const records = loadDataset(argv.input, argv.format);
  const result = runPipeline(records, backends, { outDir: argv.out });
  console.log(result.corpusFile);
  console.log(result.morphemeFile);
  console.log(result.entityFile);
  console.log(result.manifestFile);
  console.error(
    `converted ${result.records.length} records (${result.skipped} skipped)`,
  );
  return 0;
}

main().then(
  (code) => process.exit(code),
  (err) => {
    console.error(`error: ${err.message}`);
    process.exit(1);
  },
);
