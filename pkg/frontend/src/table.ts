/** Coefficient-table view model: sorting and emphasis, values untouched. */

import type { CoefficientRow } from "./types";

export type SortKey =
  | "name"
  | "coefficient"
  | "exp_coef"
  | "percent_change"
  | "p_value"
  | "crash_total"
  | "crash_share";

export const SIGNIFICANCE_LEVEL = 0.05;

/** Stable sort; ties keep the payload order. */
export function sortRows(
  rows: CoefficientRow[],
  key: SortKey,
  descending: boolean,
): CoefficientRow[] {
  const indexed = rows.map((row, i) => ({ row, i }));
  indexed.sort((a, b) => {
    const va = a.row[key];
    const vb = b.row[key];
    let cmp: number;
    if (typeof va === "string" || typeof vb === "string") {
      cmp = String(va).localeCompare(String(vb));
    } else {
      cmp = (va as number) - (vb as number);
    }
    if (cmp === 0) return a.i - b.i;
    return descending ? -cmp : cmp;
  });
  return indexed.map((e) => e.row);
}

/** Rows with p >= 0.05 are visually de-emphasized (not hidden). */
export function isDeEmphasized(row: CoefficientRow): boolean {
  if (row.reference) return false; // reference levels carry no test
  return row.p_value >= SIGNIFICANCE_LEVEL;
}

export function rowsForCategory(rows: CoefficientRow[], category: string): CoefficientRow[] {
  return rows.filter((r) => r.category === category);
}

/** Bar-chart geometry for one category, scaled to the largest |percent|. */
export function barSpans(rows: CoefficientRow[]): { row: CoefficientRow; span: number }[] {
  const limit = Math.max(...rows.map((r) => Math.abs(r.percent_change)), 1e-9);
  return rows.map((row) => ({ row, span: row.percent_change / limit }));
}
