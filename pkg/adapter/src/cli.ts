/**
 * Adapter command line.
 *
 *   node dist/cli.js process  --videos table.csv --out dir [--stride N]
 *                             [--detector ID] [--segmenter ID] [--depth ID]
 *   node dist/cli.js annotate --videos table.csv --model model.json --out dir
 *                             [--stride N] [--detector ID] [--segmenter ID] [--depth ID]
 *
 * The videos table is CSV: video_path,speed_kmh,perspective (paths relative
 * to the table). Exit codes: 0 ok, 1 failure, 2 usage error.
 */

import { exportAnnotated } from './annotate.js';
import { processVideos } from './adapter.js';

interface Flags {
  [key: string]: string;
}

function parseFlags(argv: string[]): Flags {
  const flags: Flags = {};
  for (let i = 0; i < argv.length; i += 2) {
    const key = argv[i];
    const value = argv[i + 1];
    if (!key.startsWith('--') || value === undefined) {
      throw new UsageError(`expected --flag value pairs, got ${argv.slice(i).join(' ')}`);
    }
    flags[key.slice(2)] = value;
  }
  return flags;
}

class UsageError extends Error {}

function requireFlag(flags: Flags, name: string): string {
  const value = flags[name];
  if (value === undefined) throw new UsageError(`missing --${name}`);
  return value;
}

export function main(argv: string[]): number {
  try {
    const [command, ...rest] = argv;
    if (command === 'process') {
      const flags = parseFlags(rest);
      const summary = processVideos({
        videosTable: requireFlag(flags, 'videos'),
        outDir: requireFlag(flags, 'out'),
        frameStride: parseInt(flags['stride'] ?? '1', 10),
        detector: flags['detector'] ?? 'builtin:luma-blob',
        segmenter: flags['segmenter'] ?? 'builtin:luma-mask',
        depthEstimator: flags['depth'] ?? 'builtin:luma-depth',
      });
      console.log(
        `wrote ${summary.samples} samples, ${summary.framesProcessed} frames ` +
          `(${summary.framesWithoutDetections} without detections) -> ${summary.manifestPath}`,
      );
      return 0;
    }
    if (command === 'annotate') {
      const flags = parseFlags(rest);
      const summary = exportAnnotated({
        videosTable: requireFlag(flags, 'videos'),
        modelPath: requireFlag(flags, 'model'),
        outDir: requireFlag(flags, 'out'),
        frameStride: parseInt(flags['stride'] ?? '1', 10),
        detector: flags['detector'] ?? 'builtin:luma-blob',
        segmenter: flags['segmenter'] ?? 'builtin:luma-mask',
        depthEstimator: flags['depth'] ?? 'builtin:luma-depth',
      });
      console.log(
        `wrote ${summary.framesWritten} annotated frames ` +
          `(${summary.framesWithoutOverlay} without overlay) -> ${summary.outDirs.join(', ')}`,
      );
      return 0;
    }
    throw new UsageError(`unknown command ${command ?? '(none)'}; use process or annotate`);
  } catch (err) {
    if (err instanceof UsageError) {
      console.error(`usage error: ${err.message}`);
      return 2;
    }
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

if (import.meta.url === `file://${process.argv[1]}`) {
  process.exit(main(process.argv.slice(2)));
}
