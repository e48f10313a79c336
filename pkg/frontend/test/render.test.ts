import { describe, expect, it } from "vitest";
import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join, resolve } from "path";
import { SchemaError, readResults } from "../src/csv.js";
import { render } from "../src/render.js";
import { main } from "../src/cli.js";

const DESK = resolve(__dirname, "..", "..", "results", "desk");

const HEADER =
  "experiment,family,k,gamma,horizon,param_name,param_value,policy,mean_pct_lost,stderr,n_runs,master_seed,wall_ms";

function syntheticResults(): string {
  const rows = [HEADER];
  for (const k of [2, 10]) {
    for (const gamma of [0.9, 0.95, 0.99]) {
      for (const policy of ["gi", "kg", "kgi"]) {
        const loss = policy === "gi" ? 0 : gamma * (policy === "kg" ? 3 : 1);
        rows.push(
          `synthetic,bernoulli,${k},${gamma},inf,gamma,${gamma},${policy},${loss},0.05,100,1,12.5`
        );
      }
    }
  }
  return rows.join("\n") + "\n";
}

const RLB_CSV = [
  "policy,gamma,n1,n2,rlb,rlb_gi",
  "kg,0.95,1,2,0.55,0.31",
  "kg,0.95,1,3,0.58,0.45",
  "kg,0.95,1,4,0.6,0.52",
].join("\n");

describe("csv schema", () => {
  it("rejects missing columns and names the gap", () => {
    expect(() => readResults("policy,gamma\nkg,0.9\n")).toThrowError(/missing required columns/);
    try {
      readResults("experiment,family,k\na,bernoulli,2\n");
    } catch (err) {
      expect(err).toBeInstanceOf(SchemaError);
      expect((err as Error).message).toContain("gamma");
      expect((err as Error).message).toContain("mean_pct_lost");
    }
  });

  it("rejects an empty CSV", () => {
    expect(() => readResults("")).toThrowError(/empty CSV/);
    expect(() => readResults(HEADER + "\n")).toThrowError(/no data rows/);
  });

  it("rejects ragged rows and non-numeric cells", () => {
    expect(() => readResults(HEADER + "\na,b,2\n")).toThrowError(/cells/);
    const bad = HEADER + "\nx,bernoulli,2,oops,inf,gamma,0.9,kg,1,0.1,10,1,5\n";
    expect(() => readResults(bad)).toThrowError(/gamma/);
  });
});

describe("rendering", () => {
  it("is deterministic: identical input, identical bytes", () => {
    const a = render("fig1", syntheticResults());
    const b = render("fig1", syntheticResults());
    expect(a).toBe(b);
    expect(a.startsWith("<svg")).toBe(true);
  });

  it("side-by-side panels follow the panel key", () => {
    const svg = render("fig1", syntheticResults());
    expect(svg).toContain("k = 2");
    expect(svg).toContain("k = 10");
    expect((svg.match(/<polyline/g) ?? []).length).toBe(6); // 3 policies x 2 panels
  });

  it("renders the rlb style with the optimal reference curve", () => {
    const svg = render("rlb", RLB_CSV);
    expect(svg).toContain("Relative learning bonus");
    expect(svg).toContain("stroke-dasharray");
  });

  it("rejects unknown styles", () => {
    expect(() => render("fig9", syntheticResults())).toThrowError(/unknown figure style/);
  });
});

describe("desk-scale experiment CSVs", () => {
  const cases: [string, string][] = [
    ["fig1", "fig1-bernoulli-gamma-sweep.csv"],
    ["fig2", "fig2-bernoulli-beta-sweep.csv"],
    ["fig3", "fig3-bernoulli-alpha-sweep.csv"],
    ["fig4", "fig4-exponential-gamma-sweep.csv"],
    ["fig5", "fig5-gaussian-tau-sweep.csv"],
    ["fig6", "fig6-fhnmab-sweep.csv"],
    ["fig7", "fig7-correlated.csv"],
  ];
  for (const [style, file] of cases) {
    it(`renders ${style} from ${file}, byte-identical on re-render`, () => {
      const path = join(DESK, file);
      expect(existsSync(path), `expected desk-scale results at ${path}`).toBe(true);
      const csv = readFileSync(path, "utf8");
      const first = render(style, csv);
      expect(first).toContain("</svg>");
      expect(render(style, csv)).toBe(first);
    });
  }
});

describe("cli", () => {
  it("renders a file end to end and reports bad usage", () => {
    const dir = mkdtempSync(join(tmpdir(), "kgfig-"));
    const input = join(dir, "in.csv");
    writeFileSync(input, syntheticResults());
    const out = join(dir, "fig.svg");
    expect(main(["--style", "fig1", "--in", input, "--out", out])).toBe(0);
    expect(readFileSync(out, "utf8")).toContain("<svg");
    expect(main(["--style", "fig1", "--in", input])).toBe(1);
    expect(main(["--style", "fig1", "--in", join(dir, "nope.csv"), "--out", out])).toBe(3);
    writeFileSync(input, "policy,gamma\nkg,0.9\n");
    expect(main(["--style", "fig1", "--in", input, "--out", out])).toBe(1);
  });
});
