// Checkpoint format and deterministic generation for the demo segmentation
// model: one 3x3 conv (3 -> FEATURES channels) followed by a 1x1 head.
import * as fs from 'fs';
import * as path from 'path';

export const FEATURES = 8;
export const KERNEL = 3;

export interface Checkpoint {
    schema: 1;
    seed: number;
    convKernel: number[]; // KERNEL * KERNEL * 3 * FEATURES
    convBias: number[]; // FEATURES
    headKernel: number[]; // FEATURES
    headBias: number[]; // 1
}

/** mulberry32: tiny deterministic PRNG, uniform in [0, 1). */
export function mulberry32(seed: number): () => number {
    let a = seed >>> 0;
    return () => {
        a |= 0;
        a = (a + 0x6d2b79f5) | 0;
        let t = Math.imul(a ^ (a >>> 15), 1 | a);
        t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    };
}

export function makeCheckpoint(seed: number): Checkpoint {
    const rand = mulberry32(seed);
    const draw = (n: number, scale: number) =>
        Array.from({length: n}, () => (rand() - 0.5) * 2 * scale);
    return {
        schema: 1,
        seed,
        convKernel: draw(KERNEL * KERNEL * 3 * FEATURES, 0.6),
        convBias: draw(FEATURES, 0.1),
        headKernel: draw(FEATURES, 0.8),
        headBias: draw(1, 0.1),
    };
}

export function saveCheckpoint(ck: Checkpoint, filePath: string): void {
    fs.mkdirSync(path.dirname(path.resolve(filePath)), {recursive: true});
    fs.writeFileSync(filePath, JSON.stringify(ck));
}

export function loadCheckpoint(filePath: string): Checkpoint {
    let parsed: Checkpoint;
    try {
        parsed = JSON.parse(fs.readFileSync(filePath, 'utf-8'));
    } catch (err) {
        throw new Error(`cannot load checkpoint ${filePath}: ${(err as Error).message}`);
    }
    if (parsed.schema !== 1) {
        throw new Error(`checkpoint ${filePath}: unsupported schema ${parsed.schema}`);
    }
    const want: Array<[keyof Checkpoint, number]> = [
        ['convKernel', KERNEL * KERNEL * 3 * FEATURES],
        ['convBias', FEATURES],
        ['headKernel', FEATURES],
        ['headBias', 1],
    ];
    for (const [field, length] of want) {
        const arr = parsed[field];
        if (!Array.isArray(arr) || arr.length !== length) {
            throw new Error(`checkpoint ${filePath}: field ${field} must hold ${length} numbers`);
        }
    }
    return parsed;
}
