/** Wire types mirroring the JSON API; the client adds no derived numbers. */

export const WEEKDAY_LABELS = ["MO", "TU", "WE", "TH", "FR", "SA", "SU"] as const;
export type WeekdayLabel = (typeof WEEKDAY_LABELS)[number];

export interface Slot {
  weekday: number; // 0 = Monday .. 6 = Sunday
  hour: number; // 0..23
  month: number; // 1..12
}

export interface RankedSlot {
  weekday: WeekdayLabel | string;
  weekday_index: number;
  hour: number;
  month: number;
  expected_count: number;
  rank: number;
  relative_risk: number;
}

export interface CoefficientRow {
  name: string;
  category: string;
  coefficient: number;
  coefficient_str?: string;
  exp_coef: number;
  percent_change: number;
  std_err: number;
  z: number;
  p_value: number;
  crash_total: number;
  crash_share: number;
  reference?: boolean;
  degenerate?: boolean;
}

export interface ModelDocument {
  family: string;
  alpha: number;
  alpha_str: string;
  rows: CoefficientRow[];
  dispersion: {
    pearson_ratio: number;
    ct_coefficient: number;
    ct_p_value: number;
    overdispersed: boolean;
  } | null;
  fit_meta: Record<string, unknown> & { caveat?: string };
  fingerprint: string;
}

export interface HeatmapDocument {
  month: number;
  precip: number;
  weekday_labels: string[];
  hours: number[];
  cells: number[][]; // row-major weekday x hour
  min: number;
  max: number;
  fingerprint: string;
}

export interface ApiErrorBody {
  code: "bad_request" | "not_found" | "model_error";
  message: string;
  detail?: Record<string, unknown>;
}
