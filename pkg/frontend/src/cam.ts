// Six CAM variants computed over the model's feature activations. Every
// method reduces the activation stack [h, w, F] to a single saliency map and
// normalizes it per image to [0, 1] (constant maps become all zeros).
import * as tf from '@tensorflow/tfjs';

import {FEATURES} from './checkpoint';
import {SegModel} from './model';

export const CAM_METHODS = [
    'grad-cam',
    'grad-cam++',
    'xgrad-cam',
    'score-cam',
    'eigen-cam',
    'ablation-cam',
] as const;

export type CamMethod = (typeof CAM_METHODS)[number];

export function isCamMethod(id: string): id is CamMethod {
    return (CAM_METHODS as readonly string[]).includes(id);
}

const EPS = 1e-8;

/** Min-max normalize to [0, 1]; a constant map yields all zeros. */
export function normalizeHeatmap(values: Float32Array): Float32Array {
    let lo = Infinity;
    let hi = -Infinity;
    for (const v of values) {
        if (v < lo) lo = v;
        if (v > hi) hi = v;
    }
    const out = new Float32Array(values.length);
    if (hi - lo < EPS) {
        return out;
    }
    for (let i = 0; i < values.length; i++) {
        out[i] = (values[i] - lo) / (hi - lo);
    }
    return out;
}

function score(model: SegModel, acts: tf.Tensor4D): tf.Scalar {
    return tf.tidy(() => model.head(acts).sum());
}

function scoreGradient(model: SegModel, acts: tf.Tensor4D): tf.Tensor4D {
    return tf.grad((a: tf.Tensor) => score(model, a as tf.Tensor4D))(acts) as tf.Tensor4D;
}

/** relu(sum_k w[k] * A[..., k]) as a flat Float32Array. */
function weightedSum(acts: tf.Tensor4D, weights: tf.Tensor1D, applyRelu = true): Float32Array {
    const cam = tf.tidy(() => {
        const combined = tf.sum(tf.mul(acts, weights.reshape([1, 1, 1, FEATURES])), -1);
        return applyRelu ? tf.relu(combined) : combined;
    });
    const values = new Float32Array(cam.dataSync());
    cam.dispose();
    return values;
}

function gradCam(model: SegModel, acts: tf.Tensor4D): Float32Array {
    return tf.tidy(() => {
        const grads = scoreGradient(model, acts);
        const weights = tf.mean(grads, [0, 1, 2]) as tf.Tensor1D;
        return weightedSum(acts, weights);
    });
}

function gradCamPlusPlus(model: SegModel, acts: tf.Tensor4D): Float32Array {
    return tf.tidy(() => {
        const grads = scoreGradient(model, acts);
        const g2 = tf.square(grads);
        const g3 = tf.mul(g2, grads);
        const sumAg3 = tf.sum(tf.mul(acts, g3), [0, 1, 2], true);
        const alpha = tf.div(g2, tf.add(tf.mul(g2, 2), tf.add(sumAg3, EPS)));
        const weights = tf.sum(tf.mul(alpha, tf.relu(grads)), [0, 1, 2]) as tf.Tensor1D;
        return weightedSum(acts, weights);
    });
}

function xgradCam(model: SegModel, acts: tf.Tensor4D): Float32Array {
    return tf.tidy(() => {
        const grads = scoreGradient(model, acts);
        const numer = tf.sum(tf.mul(grads, acts), [0, 1, 2]);
        const denom = tf.add(tf.sum(acts, [0, 1, 2]), EPS);
        const weights = tf.div(numer, denom) as tf.Tensor1D;
        return weightedSum(acts, weights);
    });
}

function scoreCam(model: SegModel, acts: tf.Tensor4D, input: tf.Tensor4D): Float32Array {
    const scores: number[] = [];
    for (let k = 0; k < FEATURES; k++) {
        const s = tf.tidy(() => {
            const channel = tf.slice(acts, [0, 0, 0, k], [1, -1, -1, 1]);
            const lo = channel.min();
            const hi = channel.max();
            const span = tf.maximum(tf.sub(hi, lo), EPS);
            const mask = tf.div(tf.sub(channel, lo), span);
            return score(model, model.features(tf.mul(input, mask) as tf.Tensor4D));
        });
        scores.push(s.dataSync()[0]);
        s.dispose();
    }
    return tf.tidy(() => {
        const weights = tf.softmax(tf.tensor1d(scores)) as tf.Tensor1D;
        return weightedSum(acts, weights);
    });
}

function eigenCam(acts: tf.Tensor4D): Float32Array {
    return tf.tidy(() => {
        const [, h, w] = acts.shape;
        const flat = acts.reshape([h * w, FEATURES]) as tf.Tensor2D;
        const gram = tf.matMul(flat, flat, true, false); // [F, F]
        // leading eigenvector by power iteration from a fixed start
        let v = tf.ones([FEATURES, 1]) as tf.Tensor2D;
        for (let i = 0; i < 50; i++) {
            const next = tf.matMul(gram, v);
            v = tf.div(next, tf.add(tf.norm(next), EPS)) as tf.Tensor2D;
        }
        const projected = tf.matMul(flat, v).reshape([h, w]);
        return new Float32Array(projected.dataSync());
    });
}

function ablationCam(model: SegModel, acts: tf.Tensor4D): Float32Array {
    const base = score(model, acts);
    const baseValue = base.dataSync()[0];
    base.dispose();
    const weights: number[] = [];
    for (let k = 0; k < FEATURES; k++) {
        const s = tf.tidy(() => {
            const keep = tf.notEqual(tf.range(0, FEATURES), k).cast('float32');
            return score(model, tf.mul(acts, keep.reshape([1, 1, 1, FEATURES])) as tf.Tensor4D);
        });
        weights.push((baseValue - s.dataSync()[0]) / (Math.abs(baseValue) + EPS));
        s.dispose();
    }
    return tf.tidy(() => weightedSum(acts, tf.tensor1d(weights)));
}

/** Compute one normalized heatmap for an input tensor of shape [1, h, w, 3]. */
export function computeCam(model: SegModel, method: CamMethod, input: tf.Tensor4D): Float32Array {
    const acts = model.features(input);
    try {
        switch (method) {
            case 'grad-cam':
                return normalizeHeatmap(gradCam(model, acts));
            case 'grad-cam++':
                return normalizeHeatmap(gradCamPlusPlus(model, acts));
            case 'xgrad-cam':
                return normalizeHeatmap(xgradCam(model, acts));
            case 'score-cam':
                return normalizeHeatmap(scoreCam(model, acts, input));
            case 'eigen-cam':
                return normalizeHeatmap(eigenCam(acts));
            case 'ablation-cam':
                return normalizeHeatmap(ablationCam(model, acts));
        }
    } finally {
        acts.dispose();
    }
}
