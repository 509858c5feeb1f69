// Standalone renderer CLI.
//
//   node dist/cli.js frames --frames <dir> --target <csv> --out <dir>
//   node dist/cli.js rate   --report <csv> --out <png>

import { parseArgs } from "node:util";

import { renderFrames } from "./renderFrames.js";
import { renderRate } from "./renderRate.js";

function usage(): never {
  console.error(
    "usage:\n" +
    "  frames --frames <dir> --target <csv> --out <dir>\n" +
    "  rate   --report <csv> --out <png>");
  process.exit(2);
}

export function main(argv: string[]): number {
  const [command, ...rest] = argv;
  try {
    if (command === "frames") {
      const { values } = parseArgs({
        args: rest,
        options: {
          frames: { type: "string" },
          target: { type: "string" },
          out: { type: "string" },
        },
      });
      if (!values.frames || !values.target || !values.out) usage();
      const result = renderFrames(values.frames, values.target, values.out);
      console.log(`wrote ${result.files.length} frames to ${values.out}`);
      return 0;
    }
    if (command === "rate") {
      const { values } = parseArgs({
        args: rest,
        options: {
          report: { type: "string" },
          out: { type: "string" },
        },
      });
      if (!values.report || !values.out) usage();
      const result = renderRate(values.report, values.out);
      console.log(`${result.label} -> ${values.out}`);
      return 0;
    }
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
  usage();
}

process.exit(main(process.argv.slice(2)));
