/**
 * render --style <fig1..fig7|rlb> --in results.csv --out figure.svg
 *
 * Exit codes: 0 success, 1 usage or schema error, 3 I/O failure.
 */

import { readFileSync, writeFileSync, mkdirSync } from "fs";
import { dirname } from "path";
import { SchemaError } from "./csv.js";
import { STYLE_NAMES } from "./figures.js";
import { render } from "./render.js";

function parseArgs(argv: string[]): { style: string; input: string; out: string } {
  const args: Record<string, string> = {};
  for (let i = 0; i < argv.length; i += 2) {
    if (!argv[i].startsWith("--") || argv[i + 1] === undefined) {
      throw new SchemaError(`bad argument ${argv[i]}`);
    }
    args[argv[i].slice(2)] = argv[i + 1];
  }
  for (const key of ["style", "in", "out"]) {
    if (!args[key]) {
      throw new SchemaError(
        `missing --${key}; usage: render --style <${STYLE_NAMES.join("|")}> --in file.csv --out file.svg`
      );
    }
  }
  return { style: args.style, input: args.in, out: args.out };
}

export function main(argv: string[]): number {
  let opts;
  try {
    opts = parseArgs(argv);
  } catch (err) {
    console.error((err as Error).message);
    return 1;
  }
  let csv: string;
  try {
    csv = readFileSync(opts.input, "utf8");
  } catch (err) {
    console.error(`cannot read ${opts.input}: ${(err as Error).message}`);
    return 3;
  }
  let svg: string;
  try {
    svg = render(opts.style, csv);
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    throw err;
  }
  try {
    mkdirSync(dirname(opts.out), { recursive: true });
    writeFileSync(opts.out, svg);
  } catch (err) {
    console.error(`cannot write ${opts.out}: ${(err as Error).message}`);
    return 3;
  }
  console.log(`wrote ${opts.out}`);
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
