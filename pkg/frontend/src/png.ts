// 8-bit PNG input/output shared by the serve and export commands.
import * as fs from 'fs';
import * as path from 'path';
import {PNG} from 'pngjs';

export interface RgbImage {
    width: number;
    height: number;
    /** Row-major RGB samples in [0, 255], length = width * height * 3. */
    data: Uint8Array;
}

export function readRgbPng(filePath: string): RgbImage {
    const png = PNG.sync.read(fs.readFileSync(filePath));
    const data = new Uint8Array(png.width * png.height * 3);
    for (let i = 0; i < png.width * png.height; i++) {
        data[i * 3] = png.data[i * 4];
        data[i * 3 + 1] = png.data[i * 4 + 1];
        data[i * 3 + 2] = png.data[i * 4 + 2];
    }
    return {width: png.width, height: png.height, data};
}

/** Write a binary mask as an 8-bit grayscale PNG (255 positive, 0 negative). */
export function writeMaskPng(filePath: string, width: number, height: number, bits: Uint8Array): void {
    if (bits.length !== width * height) {
        throw new Error(`mask length ${bits.length} does not match ${width}x${height}`);
    }
    const png = new PNG({width, height, colorType: 0, inputColorType: 0, inputHasAlpha: false});
    for (let i = 0; i < bits.length; i++) {
        const v = bits[i] ? 255 : 0;
        png.data[i * 4] = v;
        png.data[i * 4 + 1] = v;
        png.data[i * 4 + 2] = v;
        png.data[i * 4 + 3] = 255;
    }
    fs.mkdirSync(path.dirname(filePath), {recursive: true});
    fs.writeFileSync(filePath, PNG.sync.write(png, {colorType: 0}));
}

export function readMaskPng(filePath: string): {width: number; height: number; bits: Uint8Array} {
    const png = PNG.sync.read(fs.readFileSync(filePath));
    const bits = new Uint8Array(png.width * png.height);
    for (let i = 0; i < bits.length; i++) {
        bits[i] = png.data[i * 4] !== 0 ? 1 : 0;
    }
    return {width: png.width, height: png.height, bits};
}
