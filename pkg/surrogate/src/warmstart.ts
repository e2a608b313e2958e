/**
 * Exports a predicted image as a density-field PGM the engine accepts as
 * an initial state (config key `initial_field`). The image must map onto
 * the target mesh by an integer up- or down-scale: upscaling replicates
 * pixels, downscaling box-averages them.
 */

import { GrayImage } from "./pgm.js";

export class ShapeMismatch extends Error {}

export function scaleToMesh(img: GrayImage, nelx: number, nely: number): GrayImage {
  if (img.width === nelx && img.height === nely) {
    return { width: nelx, height: nely, pixels: Float64Array.from(img.pixels) };
  }
  if (nelx % img.width === 0 && nely % img.height === 0) {
    const fx = nelx / img.width;
    const fy = nely / img.height;
    const pixels = new Float64Array(nelx * nely);
    for (let r = 0; r < nely; r++) {
      for (let c = 0; c < nelx; c++) {
        pixels[r * nelx + c] = img.pixels[Math.floor(r / fy) * img.width + Math.floor(c / fx)];
      }
    }
    return { width: nelx, height: nely, pixels };
  }
  if (img.width % nelx === 0 && img.height % nely === 0) {
    const fx = img.width / nelx;
    const fy = img.height / nely;
    const pixels = new Float64Array(nelx * nely);
    for (let r = 0; r < nely; r++) {
      for (let c = 0; c < nelx; c++) {
        let s = 0;
        for (let dr = 0; dr < fy; dr++) {
          for (let dc = 0; dc < fx; dc++) {
            s += img.pixels[(r * fy + dr) * img.width + (c * fx + dc)];
          }
        }
        pixels[r * nelx + c] = s / (fx * fy);
      }
    }
    return { width: nelx, height: nely, pixels };
  }
  throw new ShapeMismatch(
    `image ${img.width}x${img.height} is not an integer scale of mesh ${nelx}x${nely}`);
}
