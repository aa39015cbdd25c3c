/**
 * Binary embedding-table writer/reader.
 *
 * Layout (little-endian): magic "LGEM", uint32 version, uint64 row count,
 * uint32 dim, then row-major float32 values. A companion UTF-8 token file
 * at `<path>.tokens` holds one token per line; line i labels row i.
 */

import * as fs from "node:fs";

const MAGIC = "LGEM";
const FORMAT_VERSION = 1;
const HEADER_BYTES = 4 + 4 + 8 + 4;

export type EmbeddingTable = {
  dim: number;
  tokens: string[];
  vectors: Float32Array[];
};

export function tokenFileFor(path: string): string {
  return `${path}.tokens`;
}

export function writeEmbeddingTable(path: string, table: EmbeddingTable): void {
  const { dim, tokens, vectors } = table;
  if (tokens.length !== vectors.length) {
    throw new Error(`${tokens.length} tokens but ${vectors.length} vectors`);
  }
  const header = Buffer.alloc(HEADER_BYTES);
  header.write(MAGIC, 0, "ascii");
  header.writeUInt32LE(FORMAT_VERSION, 4);
  header.writeBigUInt64LE(BigInt(tokens.length), 8);
  header.writeUInt32LE(dim, 16);
  const payload = Buffer.alloc(tokens.length * dim * 4);
  vectors.forEach((vec, row) => {
    if (vec.length !== dim) {
      throw new Error(`row ${row} has dim ${vec.length}, expected ${dim}`);
    }
    for (let d = 0; d < dim; d++) {
      if (!Number.isFinite(vec[d])) {
        throw new Error(`row ${row} contains a non-finite value`);
      }
      payload.writeFloatLE(vec[d], (row * dim + d) * 4);
    }
  });
  fs.writeFileSync(path, Buffer.concat([header, payload]));
  fs.writeFileSync(tokenFileFor(path), tokens.map((t) => t + "\n").join(""), "utf-8");
}

export function readEmbeddingTable(path: string): EmbeddingTable {
  const blob = fs.readFileSync(path);
  if (blob.length < HEADER_BYTES) {
    throw new Error(`${path}: file too short for header`);
  }
  if (blob.toString("ascii", 0, 4) !== MAGIC) {
    throw new Error(`${path}: bad magic`);
  }
  const version = blob.readUInt32LE(4);
  if (version !== FORMAT_VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  const rows = Number(blob.readBigUInt64LE(8));
  const dim = blob.readUInt32LE(16);
  const expected = HEADER_BYTES + rows * dim * 4;
  if (blob.length !== expected) {
    throw new Error(`${path}: payload is ${blob.length} bytes, expected ${expected}`);
  }
  const vectors: Float32Array[] = [];
  for (let row = 0; row < rows; row++) {
    const vec = new Float32Array(dim);
    for (let d = 0; d < dim; d++) {
      vec[d] = blob.readFloatLE(HEADER_BYTES + (row * dim + d) * 4);
    }
    vectors.push(vec);
  }
  const tokens = fs
    .readFileSync(tokenFileFor(path), "utf-8")
    .split("\n")
    .filter((line, i, all) => i < all.length - 1 || line.length > 0);
  if (tokens.length !== rows) {
    throw new Error(`${path}: ${tokens.length} tokens but ${rows} declared rows`);
  }
  return { dim, tokens, vectors };
}
