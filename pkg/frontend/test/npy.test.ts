import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import {afterEach, beforeEach, describe, expect, it} from 'vitest';

import {readNpy, writeNpy} from '../src/npy';

let dir: string;
beforeEach(() => {
    dir = fs.mkdtempSync(path.join(os.tmpdir(), 'npy-'));
});
afterEach(() => {
    fs.rmSync(dir, {recursive: true, force: true});
});

describe('npy round trip', () => {
    it('preserves shape and values exactly', () => {
        const values = new Float32Array([0, 0.25, 0.5, 0.75, 1, 0.125]);
        const file = path.join(dir, 'a.npy');
        writeNpy(file, 2, 3, values);
        const back = readNpy(file);
        expect(back.height).toBe(2);
        expect(back.width).toBe(3);
        expect(Array.from(back.values)).toEqual(Array.from(values));
    });

    it('pads the data section to a 64-byte boundary', () => {
        const file = path.join(dir, 'b.npy');
        writeNpy(file, 1, 1, new Float32Array([0.5]));
        const buf = fs.readFileSync(file);
        expect((buf.length - 4) % 64).toBe(0);
    });

    it('rejects length mismatches', () => {
        expect(() => writeNpy(path.join(dir, 'c.npy'), 2, 2, new Float32Array(3))).toThrow(
            /does not match/
        );
    });

    it('rejects non-npy files', () => {
        const file = path.join(dir, 'junk.npy');
        fs.writeFileSync(file, 'not an array');
        expect(() => readNpy(file)).toThrow(/not an NPY/);
    });

    it('rejects truncated files', () => {
        const file = path.join(dir, 'trunc.npy');
        writeNpy(file, 4, 4, new Float32Array(16));
        const whole = fs.readFileSync(file);
        fs.writeFileSync(file, whole.subarray(0, whole.length - 8));
        expect(() => readNpy(file)).toThrow(/truncated/);
    });
});
