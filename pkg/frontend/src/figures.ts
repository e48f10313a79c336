/**
 * The seven experiment figure styles plus the RLB curve style.  Each style
 * declares how result rows split into side-by-side panels and what goes on
 * the axes; series are one line per policy in a fixed order and palette.
 */

import { ResultRow, RlbRow, SchemaError, readResults, readRlb } from "./csv.js";
import { Figure, Panel, Series } from "./svg.js";

const POLICY_ORDER = [
  "gi",
  "greedy",
  "kg",
  "nkg",
  "pkg",
  "kgi",
  "gibl",
  "gicg",
  "ckg",
  "ikg",
  "thompson",
];

const PALETTE: Record<string, string> = {
  gi: "#222222",
  greedy: "#999999",
  kg: "#d62728",
  nkg: "#ff7f0e",
  pkg: "#9467bd",
  kgi: "#1f77b4",
  gibl: "#2ca02c",
  gicg: "#8c564b",
  ckg: "#e377c2",
  ikg: "#17becf",
  thompson: "#bcbd22",
};

function color(policy: string): string {
  return PALETTE[policy] ?? "#000000";
}

interface ResultStyle {
  kind: "results";
  title: string;
  xLabel: string;
  yLabel: string;
  panelBy: "k" | "gamma" | "param_name";
  xLog?: (panelKey: string) => boolean;
}

interface RlbStyle {
  kind: "rlb";
  title: string;
}

export const STYLES: Record<string, ResultStyle | RlbStyle> = {
  fig1: {
    kind: "results",
    title: "Bernoulli arms, uniform priors: lost reward vs discount factor",
    xLabel: "discount factor",
    yLabel: "mean % reward lost",
    panelBy: "k",
  },
  fig2: {
    kind: "results",
    title: "Bernoulli arms, Beta(1, beta) priors at gamma=0.98",
    xLabel: "beta",
    yLabel: "mean % reward lost",
    panelBy: "k",
  },
  fig3: {
    kind: "results",
    title: "Bernoulli arms, Beta(alpha, 1) priors at gamma=0.98",
    xLabel: "alpha",
    yLabel: "mean % reward lost",
    panelBy: "k",
  },
  fig4: {
    kind: "results",
    title: "Exponential arms, Gamma(2,3) priors: lost reward vs KG",
    xLabel: "discount factor",
    yLabel: "mean % reward lost vs KG",
    panelBy: "k",
  },
  fig5: {
    kind: "results",
    title: "Gaussian arms, N(0,1) priors, k=10: lost reward vs optimal",
    xLabel: "observation precision",
    yLabel: "mean % reward lost",
    panelBy: "gamma",
    xLog: () => true,
  },
  fig6: {
    kind: "results",
    title: "Finite-horizon Gaussian arms: lost reward vs KG",
    xLabel: "",
    yLabel: "mean % reward lost vs KG",
    panelBy: "param_name",
    xLog: (panelKey) => panelKey === "tau",
  },
  fig7: {
    kind: "results",
    title: "Correlated Gaussian arms, k=10: lost reward vs Gittins on marginals",
    xLabel: "correlation decay",
    yLabel: "mean % reward lost",
    panelBy: "gamma",
  },
  rlb: { kind: "rlb", title: "Relative learning bonus thresholds" },
};

export const STYLE_NAMES = Object.keys(STYLES);

function panelKey(row: ResultRow, by: ResultStyle["panelBy"]): string {
  if (by === "k") return String(row.k);
  if (by === "gamma") return String(row.gamma);
  return row.param_name;
}

function panelTitle(by: ResultStyle["panelBy"], key: string): string {
  if (by === "k") return `k = ${key}`;
  if (by === "gamma") return `gamma = ${key}`;
  return key === "tau" ? "precision sweep (T = 50)" : "horizon sweep (tau = 1)";
}

function buildResultFigure(style: ResultStyle, rows: ResultRow[]): Figure {
  const keys = [...new Set(rows.map((r) => panelKey(r, style.panelBy)))].sort((a, b) =>
    Number.isFinite(Number(a)) && Number.isFinite(Number(b))
      ? Number(a) - Number(b)
      : a.localeCompare(b)
  );
  const panels: Panel[] = keys.map((key) => {
    const sub = rows.filter((r) => panelKey(r, style.panelBy) === key);
    const policies = POLICY_ORDER.filter((p) => sub.some((r) => r.policy === p));
    const series: Series[] = policies.map((policy) => ({
      label: policy,
      color: color(policy),
      points: sub
        .filter((r) => r.policy === policy)
        .map((r) => ({ x: r.param_value, y: r.mean_pct_lost, err: r.stderr }))
        .sort((a, b) => a.x - b.x),
    }));
    return {
      title: panelTitle(style.panelBy, key),
      xLabel: style.xLabel || (key === "tau" ? "observation precision" : "horizon T"),
      yLabel: style.yLabel,
      xLog: style.xLog ? style.xLog(key) : false,
      series,
    };
  });
  return { title: style.title, panels };
}

function buildRlbFigure(rows: RlbRow[]): Figure {
  const policies = [...new Set(rows.map((r) => r.policy))].sort();
  const series: Series[] = policies.map((policy) => ({
    label: policy,
    color: color(policy),
    points: rows
      .filter((r) => r.policy === policy)
      .map((r) => ({ x: r.n2, y: r.rlb }))
      .sort((a, b) => a.x - b.x),
  }));
  series.push({
    label: "gi (optimal)",
    color: color("gi"),
    dashed: true,
    points: rows.map((r) => ({ x: r.n2, y: r.rlb_gi })).sort((a, b) => a.x - b.x),
  });
  const g = rows[0];
  return {
    title: `Relative learning bonus, gamma = ${g.gamma}, n1 = ${g.n1}`,
    panels: [
      {
        title: "switch threshold vs rival precision",
        xLabel: "n2",
        yLabel: "mean-difference threshold",
        series,
      },
    ],
  };
}

export function buildFigure(styleId: string, csvText: string): Figure {
  const style = STYLES[styleId];
  if (!style) {
    throw new SchemaError(`unknown figure style ${JSON.stringify(styleId)}; known: ${STYLE_NAMES.join(", ")}`);
  }
  if (style.kind === "rlb") {
    return buildRlbFigure(readRlb(csvText));
  }
  return buildResultFigure(style, readResults(csvText));
}
