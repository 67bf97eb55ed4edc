// Minimal NPY v1.0 reader/writer for rank-2 little-endian float32 arrays,
// the interchange format the evaluation harness expects for heatmaps.
import * as fs from 'fs';
import * as path from 'path';

const MAGIC = Buffer.from('\x93NUMPY', 'latin1');

export function writeNpy(filePath: string, height: number, width: number, values: Float32Array): void {
    if (values.length !== height * width) {
        throw new Error(`value length ${values.length} does not match ${height}x${width}`);
    }
    let header = `{'descr': '<f4', 'fortran_order': False, 'shape': (${height}, ${width}), }`;
    // pad so the data section starts on a 64-byte boundary, newline-terminated
    const unpadded = MAGIC.length + 2 + 2 + header.length + 1;
    header += ' '.repeat((64 - (unpadded % 64)) % 64) + '\n';

    const head = Buffer.alloc(MAGIC.length + 4 + header.length);
    MAGIC.copy(head, 0);
    head[6] = 1;
    head[7] = 0;
    head.writeUInt16LE(header.length, 8);
    head.write(header, 10, 'latin1');

    const body = Buffer.alloc(values.length * 4);
    for (let i = 0; i < values.length; i++) {
        body.writeFloatLE(values[i], i * 4);
    }
    fs.mkdirSync(path.dirname(filePath), {recursive: true});
    fs.writeFileSync(filePath, Buffer.concat([head, body]));
}

export function readNpy(filePath: string): {height: number; width: number; values: Float32Array} {
    const buf = fs.readFileSync(filePath);
    if (!buf.subarray(0, 6).equals(MAGIC) || buf[6] !== 1 || buf[7] !== 0) {
        throw new Error(`${filePath}: not an NPY v1.0 file`);
    }
    const headerLen = buf.readUInt16LE(8);
    const header = buf.subarray(10, 10 + headerLen).toString('latin1');
    if (!header.includes("'descr': '<f4'") || !header.includes("'fortran_order': False")) {
        throw new Error(`${filePath}: unsupported NPY header ${header.trim()}`);
    }
    const shape = header.match(/'shape':\s*\((\d+),\s*(\d+)\)/);
    if (!shape) {
        throw new Error(`${filePath}: expected a rank-2 shape in ${header.trim()}`);
    }
    const height = parseInt(shape[1], 10);
    const width = parseInt(shape[2], 10);
    const body = buf.subarray(10 + headerLen);
    if (body.length !== height * width * 4) {
        throw new Error(`${filePath}: truncated data section`);
    }
    const values = new Float32Array(height * width);
    for (let i = 0; i < values.length; i++) {
        values[i] = body.readFloatLE(i * 4);
    }
    return {height, width, values};
}
