/** Pure heatmap helpers: safest-cell location and color scaling.
 *
 * The cell values come verbatim from the /heatmap payload; nothing here
 * recomputes expectations.
 */

import type { HeatmapDocument } from "./types";

export interface CellRef {
  weekday: number;
  hour: number;
  value: number;
}

/** Row-major argmin; first occurrence wins on exact ties. */
export function safestCell(doc: HeatmapDocument): CellRef {
  let best: CellRef | null = null;
  doc.cells.forEach((row, weekday) => {
    row.forEach((value, hour) => {
      if (best === null || value < best.value) {
        best = { weekday, hour, value };
      }
    });
  });
  if (best === null) throw new Error("heatmap payload has no cells");
  return best;
}

/** Row-major argmax; first occurrence wins on exact ties. */
export function riskiestCell(doc: HeatmapDocument): CellRef {
  let best: CellRef | null = null;
  doc.cells.forEach((row, weekday) => {
    row.forEach((value, hour) => {
      if (best === null || value > best.value) {
        best = { weekday, hour, value };
      }
    });
  });
  if (best === null) throw new Error("heatmap payload has no cells");
  return best;
}

/** Normalize a cell into [0, 1] against the payload's min/max. */
export function normalized(value: number, doc: HeatmapDocument): number {
  const span = doc.max - doc.min;
  if (span <= 0) return 0;
  return (value - doc.min) / span;
}

/** Green (safe) to red (risky) ramp used by the grid cells. */
export function colorFor(value: number, doc: HeatmapDocument): string {
  const t = normalized(value, doc);
  const hue = 120 * (1 - t); // 120 = green, 0 = red
  return `hsl(${hue.toFixed(1)}, 70%, ${(82 - 30 * t).toFixed(1)}%)`;
}
