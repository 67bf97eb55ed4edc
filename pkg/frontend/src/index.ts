// Library surface: model inference over a batch manifest (runner protocol)
// and CAM heatmap export into the dataset layout the harness reads.
import * as fs from 'fs';
import * as path from 'path';
import * as tf from '@tensorflow/tfjs';

import {CamMethod, computeCam} from './cam';
import {Checkpoint} from './checkpoint';
import {SegModel, imageToTensor} from './model';
import {readRgbPng, writeMaskPng} from './png';
import {writeNpy} from './npy';

export {CAM_METHODS, CamMethod, computeCam, isCamMethod, normalizeHeatmap} from './cam';
export {Checkpoint, loadCheckpoint, makeCheckpoint, mulberry32, saveCheckpoint} from './checkpoint';
export {SegModel, imageToTensor} from './model';
export {readMaskPng, readRgbPng, writeMaskPng, RgbImage} from './png';
export {readNpy, writeNpy} from './npy';

interface BatchEntry {
    id: string;
    image: string;
}

export interface BatchManifest {
    schema: number;
    target_class?: string;
    entries: BatchEntry[];
}

/** Answer a harness batch manifest: one 8-bit mask PNG per entry. */
export async function servePredictions(
    ck: Checkpoint,
    manifest: BatchManifest,
    outDir: string
): Promise<void> {
    if (manifest.schema !== 1) {
        throw new Error(`unsupported manifest schema ${manifest.schema}`);
    }
    await tf.setBackend('cpu');
    const model = new SegModel(ck);
    try {
        for (const entry of manifest.entries) {
            let image;
            try {
                image = readRgbPng(entry.image);
            } catch (err) {
                throw new Error(`cannot decode image for id ${entry.id}: ${(err as Error).message}`);
            }
            const bits = model.predictMask(image);
            writeMaskPng(path.join(outDir, `${entry.id}.png`), image.width, image.height, bits);
        }
    } finally {
        model.dispose();
    }
}

/** Write heatmaps/<method>/<id>.npy for every images/<id>.png in the dataset. */
export async function exportHeatmaps(
    ck: Checkpoint,
    datasetRoot: string,
    method: CamMethod
): Promise<string[]> {
    const imagesDir = path.join(datasetRoot, 'images');
    if (!fs.existsSync(imagesDir)) {
        throw new Error(`no images directory under ${datasetRoot}`);
    }
    const ids = fs
        .readdirSync(imagesDir)
        .filter((name) => name.endsWith('.png'))
        .map((name) => name.slice(0, -4))
        .sort();
    if (ids.length === 0) {
        throw new Error(`no PNG images under ${imagesDir}`);
    }
    await tf.setBackend('cpu');
    const model = new SegModel(ck);
    const written: string[] = [];
    try {
        for (const id of ids) {
            const image = readRgbPng(path.join(imagesDir, `${id}.png`));
            const input = imageToTensor(image);
            const heat = computeCam(model, method, input);
            input.dispose();
            const outPath = path.join(datasetRoot, 'heatmaps', method, `${id}.npy`);
            writeNpy(outPath, image.height, image.width, heat);
            written.push(outPath);
        }
    } finally {
        model.dispose();
    }
    return written;
}
