/**
 * Command-line surface.
 *
 *   train      --index I --curves C --out DIR [--epochs N] [--lambda-phys X]
 *              [--lambda-rec X] [--seed N] [--svd-k K] [--lr X]
 *   generate   --model DIR --c VAL --v VAL --out FILE.pgm
 *   warm-start --image FILE.pgm --nelx N --nely N --out FILE.pgm
 *   svd-reduce --index I --out DIR --svd-k K
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { loadCurves, loadDataset } from "./dataset.js";
import { loadModel, saveModel } from "./model.js";
import { readPgm, writePgm } from "./pgm.js";
import { svdReduce } from "./svd.js";
import { generate, train, writeTrace } from "./train.js";
import { scaleToMesh } from "./warmstart.js";

type Flags = Record<string, string>;

function parseArgs(argv: string[]): [string, Flags] {
  const [command, ...rest] = argv;
  if (!command) throw new Error("usage: <command> [--flag value ...]");
  const flags: Flags = {};
  for (let i = 0; i < rest.length; i += 2) {
    const key = rest[i];
    if (!key.startsWith("--") || i + 1 >= rest.length) {
      throw new Error(`bad flag pair near ${key}`);
    }
    flags[key.slice(2)] = rest[i + 1];
  }
  return [command, flags];
}

function need(flags: Flags, key: string): string {
  const v = flags[key];
  if (v === undefined) throw new Error(`missing --${key}`);
  return v;
}

function cmdTrain(flags: Flags): void {
  let dataset = loadDataset(need(flags, "index"));
  const curves = loadCurves(need(flags, "curves"));
  if (flags["svd-k"]) dataset = svdReduce(dataset, parseInt(flags["svd-k"], 10));
  const result = train(dataset, curves, {
    epochs: flags.epochs ? parseInt(flags.epochs, 10) : undefined,
    seed: flags.seed ? parseInt(flags.seed, 10) : undefined,
    learningRate: flags.lr ? parseFloat(flags.lr) : undefined,
    weights: {
      lambdaRec: flags["lambda-rec"] ? parseFloat(flags["lambda-rec"]) : 1.0,
      lambdaPhys: flags["lambda-phys"] ? parseFloat(flags["lambda-phys"]) : 0.1,
    },
  });
  const out = need(flags, "out");
  saveModel(out, result.model);
  writeTrace(path.join(out, "loss_trace.csv"), result.trace);
  const first = result.trace[0].total;
  const last = result.trace[result.trace.length - 1].total;
  console.log(`trained ${result.trace.length} epochs: loss ${first} -> ${last}`);
}

function cmdGenerate(flags: Flags): void {
  const model = loadModel(need(flags, "model"));
  const y = generate(model, parseFloat(need(flags, "c")), parseFloat(need(flags, "v")));
  writePgm(need(flags, "out"), { width: model.width, height: model.height, pixels: y });
  console.log(`wrote ${flags.out}`);
}

function cmdWarmStart(flags: Flags): void {
  const img = readPgm(need(flags, "image"));
  const field = scaleToMesh(img, parseInt(need(flags, "nelx"), 10),
                            parseInt(need(flags, "nely"), 10));
  writePgm(need(flags, "out"), field);
  console.log(`wrote ${flags.out} (${field.width}x${field.height})`);
}

function cmdSvdReduce(flags: Flags): void {
  const indexPath = need(flags, "index");
  const dataset = loadDataset(indexPath);
  const reduced = svdReduce(dataset, parseInt(need(flags, "svd-k"), 10));
  const out = need(flags, "out");
  fs.mkdirSync(path.join(out, "images"), { recursive: true });
  const lines = ["image,v,c,v0,r,iter"];
  reduced.rows.forEach((row, i) => {
    const rel = path.join("images", `${String(i).padStart(4, "0")}.pgm`);
    writePgm(path.join(out, rel), row.image);
    lines.push(`${rel},${row.v},${row.c},${row.v0},${row.r},${row.iter}`);
  });
  fs.writeFileSync(path.join(out, "index.csv"), lines.join("\n") + "\n");
  console.log(`wrote ${reduced.rows.length} rank-reduced rows to ${out}`);
}

export function main(argv: string[]): number {
  try {
    const [command, flags] = parseArgs(argv);
    switch (command) {
      case "train": cmdTrain(flags); break;
      case "generate": cmdGenerate(flags); break;
      case "warm-start": cmdWarmStart(flags); break;
      case "svd-reduce": cmdSvdReduce(flags); break;
      default: throw new Error(`unknown command ${command}`);
    }
    return 0;
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
