/**
 * Training loss: pixelwise reconstruction plus the double-distance physics
 * term. For a predicted image with mean pixel vHat and a sample targeting
 * (c, v) on the growth family 1/c = a ln(v) + b:
 *
 *   dAcross = |1/c - (a ln(vHat) + b)|   off-curve distance, 1/c units
 *   dAlong  = |vHat - v|                 distance along the curve
 *
 * Both vanish exactly when the prediction's volume sits at the target on
 * its curve, so the physics term is zero for on-curve reconstructions.
 */

import { CurveConstants } from "./dataset.js";

export interface LossWeights {
  lambdaRec: number;
  lambdaPhys: number;
}

export const DEFAULT_WEIGHTS: LossWeights = { lambdaRec: 1.0, lambdaPhys: 0.1 };

export interface LossParts {
  total: number;
  reconstruction: number;
  physics: number;
}

export function meanOf(y: Float64Array): number {
  let s = 0;
  for (let i = 0; i < y.length; i++) s += y[i];
  return s / y.length;
}

export function physicsDistances(curve: CurveConstants, c: number, v: number,
                                 vHat: number): [number, number] {
  const dAcross = Math.abs(1 / c - (curve.a * Math.log(vHat) + curve.b));
  const dAlong = Math.abs(vHat - v);
  return [dAcross, dAlong];
}

/** Loss value and dL/dy for one sample; grad written into dY. */
export function sampleLoss(y: Float64Array, target: Float64Array,
                           curve: CurveConstants, c: number, v: number,
                           weights: LossWeights, dY: Float64Array | null): LossParts {
  const n = y.length;
  let mse = 0;
  for (let i = 0; i < n; i++) {
    const d = y[i] - target[i];
    mse += d * d;
  }
  mse /= n;

  const vHat = Math.max(meanOf(y), 1e-9);
  const [dAcross, dAlong] = physicsDistances(curve, c, v, vHat);
  const physics = dAcross + dAlong;

  if (dY) {
    const lineGap = 1 / c - (curve.a * Math.log(vHat) + curve.b);
    // d(dAcross)/dvHat = -sign(lineGap) * a / vHat; d(dAlong)/dvHat = sign
    const dPhysDvHat =
      -Math.sign(lineGap) * (curve.a / vHat) + Math.sign(vHat - v);
    for (let i = 0; i < n; i++) {
      dY[i] = (weights.lambdaRec * 2 * (y[i] - target[i])) / n +
              (weights.lambdaPhys * dPhysDvHat) / n;
    }
  }
  return {
    total: weights.lambdaRec * mse + weights.lambdaPhys * physics,
    reconstruction: mse,
    physics,
  };
}

export function meanAbsoluteError(a: Float64Array, b: Float64Array): number {
  let s = 0;
  for (let i = 0; i < a.length; i++) s += Math.abs(a[i] - b[i]);
  return s / a.length;
}
