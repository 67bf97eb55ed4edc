#!/usr/bin/env node
// Command-line entry points:
//   serve --checkpoint ck.json --manifest batch.json --out dir
//   export-heatmaps --dataset root --method id --checkpoint ck.json
//   make-checkpoint --out ck.json [--seed n]
import * as fs from 'fs';
import * as path from 'path';
import yargs from 'yargs';
import {hideBin} from 'yargs/helpers';

import {isCamMethod, CAM_METHODS} from './cam';
import {loadCheckpoint, makeCheckpoint, saveCheckpoint} from './checkpoint';
import {exportHeatmaps, servePredictions} from './index';

async function main(): Promise<number> {
    const argv = yargs(hideBin(process.argv))
        .command('serve', 'answer a batch manifest with prediction masks', (y) =>
            y
                .option('checkpoint', {type: 'string', demandOption: true})
                .option('manifest', {type: 'string', demandOption: true})
                .option('out', {type: 'string', demandOption: true})
        )
        .command('export-heatmaps', 'write CAM heatmaps for a dataset', (y) =>
            y
                .option('dataset', {type: 'string', demandOption: true})
                .option('method', {type: 'string', demandOption: true, choices: [...CAM_METHODS]})
                .option('checkpoint', {type: 'string', demandOption: true})
        )
        .command('make-checkpoint', 'generate a deterministic demo checkpoint', (y) =>
            y
                .option('out', {type: 'string', demandOption: true})
                .option('seed', {type: 'number', default: 1})
        )
        .demandCommand(1)
        .strict()
        .exitProcess(false)
        .parseSync();

    const command = argv._[0];
    if (command === 'make-checkpoint') {
        saveCheckpoint(makeCheckpoint(argv.seed as number), argv.out as string);
        console.log(`wrote ${argv.out}`);
        return 0;
    }

    const ck = loadCheckpoint(argv.checkpoint as string);
    if (command === 'serve') {
        const manifestPath = argv.manifest as string;
        const manifest = JSON.parse(fs.readFileSync(manifestPath, 'utf-8'));
        await servePredictions(ck, manifest, argv.out as string);
        return 0;
    }
    if (command === 'export-heatmaps') {
        const method = argv.method as string;
        if (!isCamMethod(method)) {
            throw new Error(`unsupported method ${method}`);
        }
        const written = await exportHeatmaps(ck, argv.dataset as string, method);
        for (const file of written) {
            console.log(`wrote ${path.relative(process.cwd(), file)}`);
        }
        return 0;
    }
    throw new Error(`unknown command ${command}`);
}

main()
    .then((code) => process.exit(code))
    .catch((err) => {
        console.error(`error: ${err.message}`);
        process.exit(1);
    });
