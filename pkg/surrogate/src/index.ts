export { readPgm, writePgm, meanPixel } from "./pgm.js";
export type { GrayImage } from "./pgm.js";
export { loadDataset, loadCurves, curveFor } from "./dataset.js";
export type { Dataset, DatasetRow, CurveConstants } from "./dataset.js";
export { D2nnModel, Adam, UntrainedModel, saveModel, loadModel } from "./model.js";
export { sampleLoss, physicsDistances, meanAbsoluteError, meanOf,
         DEFAULT_WEIGHTS } from "./loss.js";
export { train, generate, writeTrace, DivergedTraining, DEFAULT_TRAIN } from "./train.js";
export { svdReduce, singularValues, jacobiEigh, RankError } from "./svd.js";
export { scaleToMesh, ShapeMismatch } from "./warmstart.js";
export { mulberry32 } from "./rng.js";
