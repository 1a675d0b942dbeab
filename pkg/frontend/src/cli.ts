#!/usr/bin/env node
import yargs from 'yargs'
import { hideBin } from 'yargs/helpers'

import { runExtraction } from './extract.js'

await yargs(hideBin(process.argv))
  .command(
    'extract',
    'extract image features into a PUFV/CSV feature file',
    (y) =>
      y
        .option('input', { type: 'string', demandOption: true, describe: 'image folder' })
        .option('labels', { type: 'string', describe: 'CSV of filename,label pairs' })
        .option('out', { type: 'string', demandOption: true, describe: 'output feature file' })
        .option('format', { choices: ['pufv', 'csv'] as const, default: 'pufv' as const })
        .option('batch', { type: 'number', default: 8 })
        .option('backbone', { type: 'string', default: 'vgg16' })
        .option('weights', { type: 'string', describe: 'local weight file (float32 blocks)' })
        .option('seed', { type: 'number', default: 42, describe: 'weight seed when no file given' }),
    async (argv) => {
      const result = await runExtraction({
        input: argv.input,
        labelsFile: argv.labels,
        out: argv.out,
        format: argv.format,
        batch: argv.batch,
        backbone: argv.backbone,
        weightsPath: argv.weights,
        seed: argv.seed,
      })
      console.log(
        `extracted ${result.images} images (d=${result.featureDim}, ` +
          `${result.skipped} skipped) -> ${result.outPath}`,
      )
    },
  )
  .demandCommand(1)
  .strict()
  .fail((msg, err) => {
    console.error(err ? err.message : msg)
    process.exit(err ? 2 : 1)
  })
  .parseAsync()
