#!/usr/bin/env node
/** ticl-adapters: serve the adapter endpoints or batch-embed a manifest. */

import yargs from 'yargs';
import { hideBin } from 'yargs/helpers';

import { batchEmbed } from './batch.js';
import { defaultRegistry } from './models.js';
import { serve } from './server.js';

await yargs(hideBin(process.argv))
  .scriptName('ticl-adapters')
  .command(
    'serve',
    'start the adapter HTTP service',
    (cmd) =>
      cmd
        .option('port', { type: 'number', default: 8807 })
        .option('host', { type: 'string', default: '127.0.0.1' }),
    async (argv) => {
      const registry = defaultRegistry();
      await serve(registry, argv.port, argv.host);
      const models = Object.entries(registry.loadedModels())
        .map(([kind, ids]) => `${kind}: ${ids.join(', ')}`)
        .join(' | ');
      console.log(`listening on http://${argv.host}:${argv.port} (${models})`);
    },
  )
  .command(
    'embed',
    'precompute embeddings for every record of a pool manifest',
    (cmd) =>
      cmd
        .option('pool', { type: 'string', demandOption: true })
        .option('model', { type: 'string', default: 'hash-ngram' })
        .option('output', { alias: 'o', type: 'string', demandOption: true }),
    (argv) => {
      const result = batchEmbed(defaultRegistry(), argv.pool, argv.model, argv.output);
      const failed = result.failedIds.length
        ? `, ${result.failedIds.length} flagged failed`
        : '';
      console.log(`wrote ${result.count} x ${result.dim} rows -> ${argv.output}${failed}`);
    },
  )
  .demandCommand(1)
  .strict()
  .help()
  .parseAsync();
