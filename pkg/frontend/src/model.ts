// Demo segmentation model: features(input) -> per-pixel activations,
// head(activations) -> foreground probability. Split in two stages so the
// CAM methods can differentiate the head with respect to the activations.
import * as tf from '@tensorflow/tfjs';

import {Checkpoint, FEATURES, KERNEL} from './checkpoint';
import {RgbImage} from './png';

export class SegModel {
    private convKernel: tf.Tensor4D;
    private convBias: tf.Tensor1D;
    private headKernel: tf.Tensor4D;
    private headBias: tf.Tensor1D;

    constructor(ck: Checkpoint) {
        this.convKernel = tf.tensor4d(ck.convKernel, [KERNEL, KERNEL, 3, FEATURES]);
        this.convBias = tf.tensor1d(ck.convBias);
        this.headKernel = tf.tensor4d(ck.headKernel, [1, 1, FEATURES, 1]);
        this.headBias = tf.tensor1d(ck.headBias);
    }

    /** [1, h, w, 3] in [0, 1] -> [1, h, w, FEATURES] relu activations. */
    features(input: tf.Tensor4D): tf.Tensor4D {
        return tf.tidy(() =>
            tf.relu(tf.add(tf.conv2d(input, this.convKernel, 1, 'same'), this.convBias))
        ) as tf.Tensor4D;
    }

    /** [1, h, w, FEATURES] -> [1, h, w, 1] sigmoid probability. */
    head(acts: tf.Tensor4D): tf.Tensor4D {
        return tf.tidy(() =>
            tf.sigmoid(tf.add(tf.conv2d(acts, this.headKernel, 1, 'same'), this.headBias))
        ) as tf.Tensor4D;
    }

    probability(input: tf.Tensor4D): tf.Tensor4D {
        return tf.tidy(() => this.head(this.features(input)));
    }

    /** Binary mask at probability >= 0.5, row-major. */
    predictMask(image: RgbImage): Uint8Array {
        const prob = tf.tidy(() => this.probability(imageToTensor(image)));
        const values = prob.dataSync();
        prob.dispose();
        const bits = new Uint8Array(values.length);
        for (let i = 0; i < values.length; i++) {
            bits[i] = values[i] >= 0.5 ? 1 : 0;
        }
        return bits;
    }

    dispose(): void {
        this.convKernel.dispose();
        this.convBias.dispose();
        this.headKernel.dispose();
        this.headBias.dispose();
    }
}

export function imageToTensor(img: RgbImage): tf.Tensor4D {
    const floats = new Float32Array(img.data.length);
    for (let i = 0; i < img.data.length; i++) {
        floats[i] = img.data[i] / 255;
    }
    return tf.tensor4d(floats, [1, img.height, img.width, 3]);
}
