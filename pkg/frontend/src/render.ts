import { buildFigure } from "./figures.js";
import { renderFigure } from "./svg.js";

/** CSV text in, SVG text out: deterministic for identical inputs. */
export function render(styleId: string, csvText: string): string {
  return renderFigure(buildFigure(styleId, csvText));
}
