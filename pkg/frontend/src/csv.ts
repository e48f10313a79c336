/**
 * CSV reading for the two result schemas produced by the kgbandits CLI:
 * experiment results (`run`) and RLB curves (`analyze rlb`).  The format is
 * plain comma-separated text without quoting; the first line is the header.
 */

export class SchemaError extends Error {}

export const RESULT_COLUMNS = [
  "experiment",
  "family",
  "k",
  "gamma",
  "horizon",
  "param_name",
  "param_value",
  "policy",
  "mean_pct_lost",
  "stderr",
  "n_runs",
  "master_seed",
  "wall_ms",
] as const;

export const RLB_COLUMNS = ["policy", "gamma", "n1", "n2", "rlb", "rlb_gi"] as const;

export interface ResultRow {
  experiment: string;
  family: string;
  k: number;
  gamma: number;
  horizon: string;
  param_name: string;
  param_value: number;
  policy: string;
  mean_pct_lost: number;
  stderr: number;
  n_runs: number;
}

export interface RlbRow {
  policy: string;
  gamma: number;
  n1: number;
  n2: number;
  rlb: number;
  rlb_gi: number;
}

function parseTable(text: string, required: readonly string[]): Record<string, string>[] {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV: no header line");
  }
  const header = lines[0].split(",");
  const missing = required.filter((c) => !header.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(`CSV is missing required columns: ${missing.join(", ")}`);
  }
  if (lines.length === 1) {
    throw new SchemaError("empty CSV: header but no data rows");
  }
  return lines.slice(1).map((line, i) => {
    const cells = line.split(",");
    if (cells.length !== header.length) {
      throw new SchemaError(`row ${i + 1} has ${cells.length} cells, expected ${header.length}`);
    }
    const row: Record<string, string> = {};
    header.forEach((name, j) => (row[name] = cells[j]));
    return row;
  });
}

function num(row: Record<string, string>, col: string): number {
  const v = Number(row[col]);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`column ${col} holds a non-numeric value ${JSON.stringify(row[col])}`);
  }
  return v;
}

export function readResults(text: string): ResultRow[] {
  return parseTable(text, RESULT_COLUMNS).map((r) => ({
    experiment: r.experiment,
    family: r.family,
    k: num(r, "k"),
    gamma: num(r, "gamma"),
    horizon: r.horizon,
    param_name: r.param_name,
    param_value: num(r, "param_value"),
    policy: r.policy,
    mean_pct_lost: num(r, "mean_pct_lost"),
    stderr: num(r, "stderr"),
    n_runs: num(r, "n_runs"),
  }));
}

export function readRlb(text: string): RlbRow[] {
  return parseTable(text, RLB_COLUMNS).map((r) => ({
    policy: r.policy,
    gamma: num(r, "gamma"),
    n1: num(r, "n1"),
    n2: num(r, "n2"),
    rlb: num(r, "rlb"),
    rlb_gi: num(r, "rlb_gi"),
  }));
}
