/**
 * Training loop: full-batch Adam for a fixed number of epochs against the
 * engine-exported dataset, with the physics term tied to each sample's
 * growth family.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { CurveConstants, Dataset, curveFor } from "./dataset.js";
import { DEFAULT_WEIGHTS, LossWeights, sampleLoss } from "./loss.js";
import { Adam, D2nnModel, Standardizer } from "./model.js";

export class DivergedTraining extends Error {}

export interface TrainOptions {
  epochs: number;
  seed: number;
  weights: LossWeights;
  learningRate: number;
}

export const DEFAULT_TRAIN: TrainOptions = {
  epochs: 500,
  seed: 0,
  weights: DEFAULT_WEIGHTS,
  learningRate: 1e-3,
};

export interface EpochLoss {
  epoch: number;
  total: number;
  reconstruction: number;
  physics: number;
}

export interface TrainResult {
  model: D2nnModel;
  trace: EpochLoss[];
}

function fitStandardizer(dataset: Dataset): Standardizer {
  const cs = dataset.rows.map((r) => r.c);
  const vs = dataset.rows.map((r) => r.v);
  const mean = (xs: number[]) => xs.reduce((a, b) => a + b, 0) / xs.length;
  const std = (xs: number[], m: number) => {
    const s = Math.sqrt(xs.reduce((a, b) => a + (b - m) * (b - m), 0) / xs.length);
    return s > 1e-12 ? s : 1.0;
  };
  const cMean = mean(cs);
  const vMean = mean(vs);
  return { cMean, cStd: std(cs, cMean), vMean, vStd: std(vs, vMean) };
}

export function train(dataset: Dataset, curves: Map<number, CurveConstants>,
                      options: Partial<TrainOptions> = {}): TrainResult {
  const opts = { ...DEFAULT_TRAIN, ...options };
  const model = new D2nnModel(dataset.width, dataset.height, opts.seed);
  model.standardizer = fitStandardizer(dataset);
  const adam = new Adam(model, opts.learningRate);
  const rowCurves = dataset.rows.map((r) => curveFor(curves, r.v0));
  const n = dataset.rows.length;
  const dY = new Float64Array(model.pixelCount);

  const trace: EpochLoss[] = [];
  for (let epoch = 1; epoch <= opts.epochs; epoch++) {
    model.zeroGrads();
    let total = 0;
    let rec = 0;
    let phys = 0;
    for (let k = 0; k < n; k++) {
      const row = dataset.rows[k];
      const cache = model.forward(row.c, row.v);
      const parts = sampleLoss(cache.y, row.image.pixels, rowCurves[k],
                               row.c, row.v, opts.weights, dY);
      // average the batch gradient
      for (let i = 0; i < dY.length; i++) dY[i] /= n;
      model.backward(cache, dY);
      total += parts.total / n;
      rec += parts.reconstruction / n;
      phys += parts.physics / n;
    }
    if (!Number.isFinite(total)) {
      throw new DivergedTraining(`non-finite loss at epoch ${epoch}: ${total}`);
    }
    adam.step();
    trace.push({ epoch, total, reconstruction: rec, physics: phys });
  }
  model.trained = true;
  return { model, trace };
}

export function generate(model: D2nnModel, c: number, v: number): Float64Array {
  if (!model.trained) throw new Error("UntrainedModel: train or load weights first");
  return model.forward(c, v).y;
}

export function writeTrace(filePath: string, trace: EpochLoss[]): void {
  const lines = ["epoch,total,reconstruction,physics"];
  for (const t of trace) {
    lines.push(`${t.epoch},${t.total},${t.reconstruction},${t.physics}`);
  }
  fs.mkdirSync(path.dirname(filePath), { recursive: true });
  fs.writeFileSync(filePath, lines.join("\n") + "\n");
}
