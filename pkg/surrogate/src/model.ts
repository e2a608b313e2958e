/**
 * The topology surrogate network: a small fully connected stack mapping a
 * standardized (compliance, volume) pair to a per-pixel density image.
 * Three affine layers with two rectifier activations in between and a
 * terminal logistic squashing keep every output pixel in [0, 1].
 *
 * Forward and backward passes are hand-rolled over flat Float64Arrays;
 * at these sizes (2 -> 128 -> 1024 -> W*H) that is faster to run and to
 * audit than pulling in a tensor runtime.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { Rng, mulberry32, uniformInit } from "./rng.js";

export class UntrainedModel extends Error {}

export interface Standardizer {
  cMean: number;
  cStd: number;
  vMean: number;
  vStd: number;
}

export function standardize(std: Standardizer, c: number, v: number): [number, number] {
  return [(c - std.cMean) / std.cStd, (v - std.vMean) / std.vStd];
}

class Linear {
  readonly inDim: number;
  readonly outDim: number;
  w: Float64Array;
  b: Float64Array;
  gw: Float64Array;
  gb: Float64Array;

  constructor(inDim: number, outDim: number, rng: Rng) {
    this.inDim = inDim;
    this.outDim = outDim;
    const limit = Math.sqrt(6 / (inDim + outDim));
    this.w = uniformInit(rng, inDim * outDim, limit);
    this.b = new Float64Array(outDim);
    this.gw = new Float64Array(inDim * outDim);
    this.gb = new Float64Array(outDim);
  }

  forward(x: Float64Array, out: Float64Array): void {
    const { w, b, inDim, outDim } = this;
    for (let o = 0; o < outDim; o++) {
      let s = b[o];
      const base = o * inDim;
      for (let i = 0; i < inDim; i++) s += w[base + i] * x[i];
      out[o] = s;
    }
  }

  /** Accumulate grads for (x, dOut) and write dL/dx into dIn (if given). */
  backward(x: Float64Array, dOut: Float64Array, dIn: Float64Array | null): void {
    const { w, gw, gb, inDim, outDim } = this;
    if (dIn) dIn.fill(0);
    for (let o = 0; o < outDim; o++) {
      const g = dOut[o];
      if (g === 0) continue;
      const base = o * inDim;
      gb[o] += g;
      for (let i = 0; i < inDim; i++) {
        gw[base + i] += g * x[i];
        if (dIn) dIn[i] += w[base + i] * g;
      }
    }
  }
}

function relu(x: Float64Array): void {
  for (let i = 0; i < x.length; i++) if (x[i] < 0) x[i] = 0;
}

function sigmoid(x: Float64Array): void {
  for (let i = 0; i < x.length; i++) x[i] = 1 / (1 + Math.exp(-x[i]));
}

export interface ForwardCache {
  x: Float64Array;
  z1: Float64Array;
  z2: Float64Array;
  y: Float64Array;
}

export class D2nnModel {
  readonly width: number;
  readonly height: number;
  readonly hidden1: number;
  readonly hidden2: number;
  readonly layers: Linear[];
  standardizer: Standardizer | null = null;
  trained = false;

  constructor(width: number, height: number, seed: number,
              hidden1 = 128, hidden2 = 1024) {
    this.width = width;
    this.height = height;
    this.hidden1 = hidden1;
    this.hidden2 = hidden2;
    const rng = mulberry32(seed);
    this.layers = [
      new Linear(2, hidden1, rng),
      new Linear(hidden1, hidden2, rng),
      new Linear(hidden2, width * height, rng),
    ];
  }

  get pixelCount(): number {
    return this.width * this.height;
  }

  parameterCount(): number {
    return this.layers.reduce((n, l) => n + l.w.length + l.b.length, 0);
  }

  forward(c: number, v: number): ForwardCache {
    if (!this.standardizer) throw new UntrainedModel("model has no input standardizer yet");
    const [cs, vs] = standardize(this.standardizer, c, v);
    const x = Float64Array.from([cs, vs]);
    const z1 = new Float64Array(this.hidden1);
    const z2 = new Float64Array(this.hidden2);
    const y = new Float64Array(this.pixelCount);
    this.layers[0].forward(x, z1);
    relu(z1);
    this.layers[1].forward(z1, z2);
    relu(z2);
    this.layers[2].forward(z2, y);
    sigmoid(y);
    return { x, z1, z2, y };
  }

  /** Backprop dL/dy through the net, accumulating parameter grads. */
  backward(cache: ForwardCache, dY: Float64Array): void {
    const { x, z1, z2, y } = cache;
    const dZ2 = new Float64Array(this.hidden2);
    const dZ1 = new Float64Array(this.hidden1);
    const dOut = new Float64Array(this.pixelCount);
    for (let i = 0; i < dOut.length; i++) dOut[i] = dY[i] * y[i] * (1 - y[i]);
    this.layers[2].backward(z2, dOut, dZ2);
    for (let i = 0; i < dZ2.length; i++) if (z2[i] <= 0) dZ2[i] = 0;
    this.layers[1].backward(z1, dZ2, dZ1);
    for (let i = 0; i < dZ1.length; i++) if (z1[i] <= 0) dZ1[i] = 0;
    this.layers[0].backward(x, dZ1, null);
  }

  zeroGrads(): void {
    for (const l of this.layers) {
      l.gw.fill(0);
      l.gb.fill(0);
    }
  }

  tensors(): Array<[Float64Array, Float64Array]> {
    const out: Array<[Float64Array, Float64Array]> = [];
    for (const l of this.layers) {
      out.push([l.w, l.gw]);
      out.push([l.b, l.gb]);
    }
    return out;
  }
}

/** Adam with the usual defaults; operates on the model's tensor list. */
export class Adam {
  private m: Float64Array[] = [];
  private v: Float64Array[] = [];
  private t = 0;

  constructor(private model: D2nnModel, private lr = 1e-3,
              private beta1 = 0.9, private beta2 = 0.999, private eps = 1e-8) {
    for (const [w] of model.tensors()) {
      this.m.push(new Float64Array(w.length));
      this.v.push(new Float64Array(w.length));
    }
  }

  step(): void {
    this.t += 1;
    const c1 = 1 - Math.pow(this.beta1, this.t);
    const c2 = 1 - Math.pow(this.beta2, this.t);
    this.model.tensors().forEach(([w, g], k) => {
      const m = this.m[k];
      const v = this.v[k];
      for (let i = 0; i < w.length; i++) {
        m[i] = this.beta1 * m[i] + (1 - this.beta1) * g[i];
        v[i] = this.beta2 * v[i] + (1 - this.beta2) * g[i] * g[i];
        w[i] -= (this.lr * (m[i] / c1)) / (Math.sqrt(v[i] / c2) + this.eps);
      }
    });
  }
}

// ---------------------------------------------------------------------------
// persistence: meta.json + weights.bin (raw little-endian doubles)
// ---------------------------------------------------------------------------

export function saveModel(dir: string, model: D2nnModel): void {
  if (!model.trained || !model.standardizer) {
    throw new UntrainedModel("refusing to save an untrained model");
  }
  fs.mkdirSync(dir, { recursive: true });
  const meta = {
    width: model.width,
    height: model.height,
    hidden1: model.hidden1,
    hidden2: model.hidden2,
    standardizer: model.standardizer,
    parameterCount: model.parameterCount(),
  };
  fs.writeFileSync(path.join(dir, "meta.json"), JSON.stringify(meta, null, 2) + "\n");
  const blobs: Buffer[] = [];
  for (const [w] of model.tensors()) {
    blobs.push(Buffer.from(w.buffer, w.byteOffset, w.byteLength));
  }
  fs.writeFileSync(path.join(dir, "weights.bin"), Buffer.concat(blobs));
}

export function loadModel(dir: string): D2nnModel {
  const meta = JSON.parse(fs.readFileSync(path.join(dir, "meta.json"), "utf-8"));
  const model = new D2nnModel(meta.width, meta.height, 0, meta.hidden1, meta.hidden2);
  const raw = fs.readFileSync(path.join(dir, "weights.bin"));
  let offset = 0;
  for (const [w] of model.tensors()) {
    for (let i = 0; i < w.length; i++) {
      w[i] = raw.readDoubleLE(offset);
      offset += 8;
    }
  }
  if (offset !== raw.length) throw new Error("weights.bin size mismatch");
  model.standardizer = meta.standardizer;
  model.trained = true;
  return model;
}
