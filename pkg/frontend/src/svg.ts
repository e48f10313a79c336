/**
 * Deterministic SVG line charts: no timestamps, fixed number formatting,
 * output bytes are a pure function of the input spec.
 */

export interface Series {
  label: string;
  color: string;
  points: { x: number; y: number; err?: number }[];
  dashed?: boolean;
}

export interface Panel {
  title: string;
  xLabel: string;
  yLabel: string;
  xLog?: boolean;
  series: Series[];
}

export interface Figure {
  title: string;
  panels: Panel[];
}

const PANEL_W = 380;
const PANEL_H = 300;
const MARGIN = { top: 48, right: 16, bottom: 46, left: 58 };
const LEGEND_H = 26;

function fmt(x: number): string {
  if (x === 0) return "0";
  const s = x.toPrecision(6);
  return s.includes(".") ? s.replace(/\.?0+$/, "").replace(/\.?0+e/, "e") : s;
}

function niceTicks(lo: number, hi: number, n = 5): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / Math.max(1, n - 1);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * mag);
  const step = candidates.find((c) => span / c <= n) ?? candidates[candidates.length - 1];
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let t = start; t <= hi + 1e-12 * span; t += step) {
    ticks.push(Math.abs(t) < step * 1e-9 ? 0 : t);
  }
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.ceil(Math.log10(lo) - 1e-9); Math.pow(10, e) <= hi * (1 + 1e-9); e += 1) {
    ticks.push(Math.pow(10, e));
  }
  return ticks.length >= 2 ? ticks : niceTicks(lo, hi);
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function renderPanel(panel: Panel, x0: number, y0: number): string {
  const innerW = PANEL_W - MARGIN.left - MARGIN.right;
  const innerH = PANEL_H - MARGIN.top - MARGIN.bottom;
  const xs = panel.series.flatMap((s) => s.points.map((p) => p.x));
  const ys = panel.series.flatMap((s) =>
    s.points.flatMap((p) => [p.y - (p.err ?? 0), p.y + (p.err ?? 0)])
  );
  let xLo = Math.min(...xs);
  let xHi = Math.max(...xs);
  let yLo = Math.min(...ys, 0);
  let yHi = Math.max(...ys);
  if (xHi === xLo) {
    xLo -= 0.5;
    xHi += 0.5;
  }
  if (yHi === yLo) {
    yLo -= 0.5;
    yHi += 0.5;
  }
  const yPad = 0.06 * (yHi - yLo);
  yLo -= yPad;
  yHi += yPad;
  const sx = (x: number) =>
    x0 +
    MARGIN.left +
    (panel.xLog
      ? ((Math.log10(x) - Math.log10(xLo)) / (Math.log10(xHi) - Math.log10(xLo))) * innerW
      : ((x - xLo) / (xHi - xLo)) * innerW);
  const sy = (y: number) => y0 + MARGIN.top + innerH - ((y - yLo) / (yHi - yLo)) * innerH;

  const parts: string[] = [];
  parts.push(
    `<rect x="${x0 + MARGIN.left}" y="${y0 + MARGIN.top}" width="${innerW}" height="${innerH}" fill="none" stroke="#444" stroke-width="1"/>`
  );
  const xticks = panel.xLog ? logTicks(xLo, xHi) : niceTicks(xLo, xHi);
  for (const t of xticks) {
    const px = fmt(sx(t));
    parts.push(
      `<line x1="${px}" y1="${fmt(y0 + MARGIN.top + innerH)}" x2="${px}" y2="${fmt(
        y0 + MARGIN.top + innerH + 4
      )}" stroke="#444"/>`,
      `<text x="${px}" y="${fmt(y0 + MARGIN.top + innerH + 16)}" font-size="10" text-anchor="middle">${fmt(
        t
      )}</text>`
    );
  }
  for (const t of niceTicks(yLo, yHi)) {
    const py = fmt(sy(t));
    parts.push(
      `<line x1="${fmt(x0 + MARGIN.left - 4)}" y1="${py}" x2="${fmt(x0 + MARGIN.left)}" y2="${py}" stroke="#444"/>`,
      `<text x="${fmt(x0 + MARGIN.left - 7)}" y="${py}" font-size="10" text-anchor="end" dominant-baseline="middle">${fmt(
        t
      )}</text>`,
      `<line x1="${fmt(x0 + MARGIN.left)}" y1="${py}" x2="${fmt(
        x0 + MARGIN.left + innerW
      )}" y2="${py}" stroke="#ddd" stroke-width="0.5"/>`
    );
  }
  for (const s of panel.series) {
    const pts = [...s.points].sort((a, b) => a.x - b.x);
    const path = pts.map((p) => `${fmt(sx(p.x))},${fmt(sy(p.y))}`).join(" ");
    const dash = s.dashed ? ` stroke-dasharray="5,3"` : "";
    parts.push(
      `<polyline points="${path}" fill="none" stroke="${s.color}" stroke-width="1.6"${dash}/>`
    );
    for (const p of pts) {
      if (p.err && p.err > 0) {
        parts.push(
          `<line x1="${fmt(sx(p.x))}" y1="${fmt(sy(p.y - p.err))}" x2="${fmt(sx(p.x))}" y2="${fmt(
            sy(p.y + p.err)
          )}" stroke="${s.color}" stroke-width="0.8"/>`
        );
      }
      parts.push(
        `<circle cx="${fmt(sx(p.x))}" cy="${fmt(sy(p.y))}" r="2.4" fill="${s.color}"/>`
      );
    }
  }
  parts.push(
    `<text x="${fmt(x0 + PANEL_W / 2)}" y="${fmt(y0 + MARGIN.top - 10)}" font-size="12" text-anchor="middle" font-weight="bold">${esc(
      panel.title
    )}</text>`,
    `<text x="${fmt(x0 + MARGIN.left + innerW / 2)}" y="${fmt(
      y0 + PANEL_H - 12
    )}" font-size="11" text-anchor="middle">${esc(panel.xLabel)}</text>`,
    `<text x="${fmt(x0 + 14)}" y="${fmt(y0 + MARGIN.top + innerH / 2)}" font-size="11" text-anchor="middle" transform="rotate(-90 ${fmt(
      x0 + 14
    )} ${fmt(y0 + MARGIN.top + innerH / 2)})">${esc(panel.yLabel)}</text>`
  );
  return parts.join("\n");
}

export function renderFigure(fig: Figure): string {
  const width = PANEL_W * fig.panels.length;
  const labels = fig.panels[0]?.series.map((s) => ({ label: s.label, color: s.color })) ?? [];
  const height = PANEL_H + LEGEND_H;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    `<text x="${fmt(width / 2)}" y="18" font-size="14" text-anchor="middle" font-weight="bold">${esc(
      fig.title
    )}</text>`,
  ];
  fig.panels.forEach((panel, i) => {
    parts.push(renderPanel(panel, i * PANEL_W, 0));
  });
  let lx = 20;
  const ly = PANEL_H + 14;
  for (const item of labels) {
    parts.push(
      `<line x1="${lx}" y1="${ly}" x2="${lx + 18}" y2="${ly}" stroke="${item.color}" stroke-width="2"/>`,
      `<text x="${lx + 22}" y="${ly + 4}" font-size="11">${esc(item.label)}</text>`
    );
    lx += 34 + 7 * item.label.length;
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
