/**
 * Rank-k reduction of the dataset image matrix (rows = images).
 *
 * With n images of p pixels and n << p, the left singular vectors come
 * from the n x n Gram matrix A A^T (cyclic Jacobi eigendecomposition), and
 * the rank-k reconstruction is the projection A_k = U_k U_k^T A. No
 * external linear-algebra runtime needed at these sizes.
 */

import { Dataset, DatasetRow } from "./dataset.js";

export class RankError extends Error {}

/** Symmetric eigendecomposition by cyclic Jacobi; returns [values, vectors]
 * with eigenvalues descending and vectors in columns. */
export function jacobiEigh(aIn: Float64Array, n: number): [Float64Array, Float64Array] {
  const a = Float64Array.from(aIn);
  const v = new Float64Array(n * n);
  for (let i = 0; i < n; i++) v[i * n + i] = 1;

  for (let sweep = 0; sweep < 100; sweep++) {
    let off = 0;
    for (let p = 0; p < n; p++) {
      for (let q = p + 1; q < n; q++) off += a[p * n + q] * a[p * n + q];
    }
    if (off < 1e-24) break;
    for (let p = 0; p < n; p++) {
      for (let q = p + 1; q < n; q++) {
        const apq = a[p * n + q];
        if (Math.abs(apq) < 1e-18) continue;
        const app = a[p * n + p];
        const aqq = a[q * n + q];
        const theta = (aqq - app) / (2 * apq);
        const t = Math.sign(theta) / (Math.abs(theta) + Math.sqrt(theta * theta + 1)) || 1;
        const cos = 1 / Math.sqrt(t * t + 1);
        const sin = t * cos;
        for (let k = 0; k < n; k++) {
          const akp = a[k * n + p];
          const akq = a[k * n + q];
          a[k * n + p] = cos * akp - sin * akq;
          a[k * n + q] = sin * akp + cos * akq;
        }
        for (let k = 0; k < n; k++) {
          const apk = a[p * n + k];
          const aqk = a[q * n + k];
          a[p * n + k] = cos * apk - sin * aqk;
          a[q * n + k] = sin * apk + cos * aqk;
        }
        for (let k = 0; k < n; k++) {
          const vkp = v[k * n + p];
          const vkq = v[k * n + q];
          v[k * n + p] = cos * vkp - sin * vkq;
          v[k * n + q] = sin * vkp + cos * vkq;
        }
      }
    }
  }
  const order = Array.from({ length: n }, (_, i) => i)
    .sort((i, j) => a[j * n + j] - a[i * n + i]);
  const values = new Float64Array(n);
  const vectors = new Float64Array(n * n);
  order.forEach((src, dst) => {
    values[dst] = a[src * n + src];
    for (let k = 0; k < n; k++) vectors[k * n + dst] = v[k * n + src];
  });
  return [values, vectors];
}

export function singularValues(dataset: Dataset): Float64Array {
  const n = dataset.rows.length;
  const gram = gramMatrix(dataset.rows);
  const [values] = jacobiEigh(gram, n);
  return Float64Array.from(values, (x) => Math.sqrt(Math.max(x, 0)));
}

function gramMatrix(rows: DatasetRow[]): Float64Array {
  const n = rows.length;
  const p = rows[0].image.pixels.length;
  const g = new Float64Array(n * n);
  for (let i = 0; i < n; i++) {
    for (let j = i; j < n; j++) {
      let s = 0;
      const ri = rows[i].image.pixels;
      const rj = rows[j].image.pixels;
      for (let k = 0; k < p; k++) s += ri[k] * rj[k];
      g[i * n + j] = s;
      g[j * n + i] = s;
    }
  }
  return g;
}

/** Replace every image by its rank-k reconstruction. */
export function svdReduce(dataset: Dataset, k: number): Dataset {
  const n = dataset.rows.length;
  const p = dataset.width * dataset.height;
  if (k < 1 || k > Math.min(n, p)) {
    throw new RankError(`rank ${k} outside [1, ${Math.min(n, p)}]`);
  }
  const [, vectors] = jacobiEigh(gramMatrix(dataset.rows), n);
  // projection coefficients: coeff = U_k^T A, reconstruction = U_k coeff
  const coeff = new Float64Array(k * p);
  for (let r = 0; r < k; r++) {
    for (let i = 0; i < n; i++) {
      const u = vectors[i * n + r];
      if (u === 0) continue;
      const px = dataset.rows[i].image.pixels;
      const base = r * p;
      for (let j = 0; j < p; j++) coeff[base + j] += u * px[j];
    }
  }
  const rows: DatasetRow[] = dataset.rows.map((row, i) => {
    const pixels = new Float64Array(p);
    for (let r = 0; r < k; r++) {
      const u = vectors[i * n + r];
      if (u === 0) continue;
      const base = r * p;
      for (let j = 0; j < p; j++) pixels[j] += u * coeff[base + j];
    }
    // no clamping here: the unclamped projection keeps reconstruction
    // error provably non-increasing in k; PGM export clamps at write time
    return { ...row, image: { ...row.image, pixels } };
  });
  return { rows, width: dataset.width, height: dataset.height };
}
