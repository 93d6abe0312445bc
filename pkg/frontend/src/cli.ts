#!/usr/bin/env node
/** cdpde-plot <kind> <csv...> -o <out.svg>
 *
 * kinds: profile | convergence | defect-heatmap
 */
import { writeFileSync } from "node:fs";
import { CsvFormatError } from "./csv.js";
import { PlotKind, render } from "./plots.js";

export function main(argv: string[]): number {
  const args = [...argv];
  let output: string | null = null;
  const rest: string[] = [];
  while (args.length > 0) {
    const a = args.shift()!;
    if (a === "-o" || a === "--output") {
      output = args.shift() ?? null;
    } else {
      rest.push(a);
    }
  }
  const [kind, ...inputs] = rest;
  if (!kind || inputs.length === 0 || !output) {
    console.error("usage: cdpde-plot <profile|convergence|defect-heatmap> <csv...> -o <out.svg>");
    return 2;
  }
  try {
    const svg = render({ kind: kind as PlotKind, inputs, output });
    writeFileSync(output, svg);
  } catch (err) {
    if (err instanceof CsvFormatError) {
      console.error(`input error: ${err.message}`);
      return 2;
    }
    if (err instanceof Error && "code" in err) {
      console.error(`i/o error: ${err.message}`);
      return 5;
    }
    throw err;
  }
  console.log(`wrote ${output}`);
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
