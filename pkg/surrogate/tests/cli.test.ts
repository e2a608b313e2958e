/** End-to-end CLI flow on the generated corpus: train -> generate ->
 * warm-start -> svd-reduce, all through the public command surface. */

import * as fs from "node:fs";
import * as path from "node:path";

import { beforeAll, describe, expect, it } from "vitest";

import { main } from "../src/cli.js";
import { loadDataset } from "../src/dataset.js";
import { readPgm } from "../src/pgm.js";
import { asDataset, DATA_DIR, loadCorpus, splitCorpus, writeIndex,
         MESH_X, MESH_Y } from "./helpers/gendata.js";

const WORK = path.join(DATA_DIR, "cliwork");
let trainIndex: string;
let curvesCsv: string;

beforeAll(() => {
  const { dataset, curves } = loadCorpus();
  const split = splitCorpus(dataset, curves);
  trainIndex = writeIndex(split.train, path.join(WORK, "train"));
  curvesCsv = path.join(DATA_DIR, "r1", "curves.csv");
});

describe("cli", () => {
  it("trains, generates, warm-starts and svd-reduces", () => {
    const modelDir = path.join(WORK, "model");
    expect(main(["train", "--index", trainIndex, "--curves", curvesCsv,
                 "--out", modelDir, "--epochs", "60", "--seed", "5",
                 "--lambda-phys", "0.1"])).toBe(0);
    expect(fs.existsSync(path.join(modelDir, "weights.bin"))).toBe(true);
    const trace = fs.readFileSync(path.join(modelDir, "loss_trace.csv"), "utf-8")
      .trim().split("\n");
    expect(trace[0]).toBe("epoch,total,reconstruction,physics");
    expect(trace.length).toBe(61);

    const imgOut = path.join(WORK, "pred.pgm");
    expect(main(["generate", "--model", modelDir, "--c", "200", "--v", "0.6",
                 "--out", imgOut])).toBe(0);
    const img = readPgm(imgOut);
    expect(img.width).toBe(60);
    expect(img.height).toBe(20);

    const fieldOut = path.join(WORK, "field.pgm");
    expect(main(["warm-start", "--image", imgOut, "--nelx", String(MESH_X),
                 "--nely", String(MESH_Y), "--out", fieldOut])).toBe(0);
    const field = readPgm(fieldOut);
    expect(field.width).toBe(MESH_X);
    expect(field.height).toBe(MESH_Y);

    const redOut = path.join(WORK, "reduced");
    expect(main(["svd-reduce", "--index", trainIndex, "--out", redOut,
                 "--svd-k", "5"])).toBe(0);
    const reduced = loadDataset(path.join(redOut, "index.csv"));
    expect(reduced.rows.length).toBe(20);
  });

  it("reports failures with a nonzero exit code", () => {
    expect(main(["train", "--index", "/nonexistent/index.csv",
                 "--curves", curvesCsv, "--out", path.join(WORK, "x")])).toBe(1);
    expect(main(["nonsense"])).toBe(1);
    expect(main(["generate", "--model", path.join(WORK, "model")])).toBe(1);
  });
});
