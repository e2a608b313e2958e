/**
 * Loaders for the engine's exported files: the dataset index
 * (image,v,c,v0,r,iter) with its PGM images, and the growth-curve CSV
 * (v0,c_min,v,c,inv_c) from which per-family constants are recovered.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { GrayImage, readPgm } from "./pgm.js";

export interface DatasetRow {
  imagePath: string;
  image: GrayImage;
  v: number;
  c: number;
  v0: number;
  r: number;
  iter: number;
}

export interface Dataset {
  rows: DatasetRow[];
  width: number;
  height: number;
}

export interface CurveConstants {
  v0: number;
  cMin: number;
  a: number;
  b: number;
}

export function loadDataset(indexPath: string): Dataset {
  const dir = path.dirname(indexPath);
  const lines = fs.readFileSync(indexPath, "utf-8").trim().split("\n");
  if (lines[0] !== "image,v,c,v0,r,iter") {
    throw new Error(`${indexPath}: unexpected header ${lines[0]}`);
  }
  const rows: DatasetRow[] = [];
  for (const line of lines.slice(1)) {
    const [img, v, c, v0, r, iter] = line.split(",");
    const image = readPgm(path.join(dir, img));
    const row: DatasetRow = {
      imagePath: img,
      image,
      v: parseFloat(v),
      c: parseFloat(c),
      v0: parseFloat(v0),
      r: parseInt(r, 10),
      iter: parseInt(iter, 10),
    };
    if (!(row.v > 0 && row.v <= 1) || !(row.c > 0)) {
      throw new Error(`${indexPath}: bad row ${line}`);
    }
    rows.push(row);
  }
  if (rows.length === 0) throw new Error(`${indexPath}: empty dataset`);
  const { width, height } = rows[0].image;
  for (const row of rows) {
    if (row.image.width !== width || row.image.height !== height) {
      throw new Error(`${indexPath}: mixed image sizes`);
    }
  }
  return { rows, width, height };
}

/** Recover one (a, b, c_min) triple per family from the curve CSV. */
export function loadCurves(curvesPath: string): Map<number, CurveConstants> {
  const lines = fs.readFileSync(curvesPath, "utf-8").trim().split("\n");
  if (lines[0] !== "v0,c_min,v,c,inv_c") {
    throw new Error(`${curvesPath}: unexpected header ${lines[0]}`);
  }
  const out = new Map<number, CurveConstants>();
  for (const line of lines.slice(1)) {
    const [v0s, cMins] = line.split(",");
    const v0 = parseFloat(v0s);
    if (!out.has(v0)) {
      const cMin = parseFloat(cMins);
      out.set(v0, { v0, cMin, a: -1 / (cMin * Math.log(v0)), b: 1 / cMin });
    }
  }
  if (out.size === 0) throw new Error(`${curvesPath}: no curves`);
  return out;
}

export function curveFor(curves: Map<number, CurveConstants>, v0: number): CurveConstants {
  for (const c of curves.values()) {
    if (Math.abs(c.v0 - v0) <= 1e-9) return c;
  }
  throw new Error(`no curve constants for v0=${v0}`);
}
