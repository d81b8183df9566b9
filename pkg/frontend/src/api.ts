/** Typed client for the three service endpoints. No other network access. */

import type { ApiErrorBody, HeatmapDocument, ModelDocument, RankedSlot, Slot } from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(body.message);
  }
}

export const FINGERPRINT_HEADER = "X-Model-Fingerprint";

async function parse<T>(resp: Response): Promise<{ body: T; fingerprint: string }> {
  const fingerprint = resp.headers.get(FINGERPRINT_HEADER) ?? "";
  if (!resp.ok) {
    const body = (await resp.json()) as ApiErrorBody;
    throw new ApiError(resp.status, body);
  }
  return { body: (await resp.json()) as T, fingerprint };
}

export async function fetchModel(): Promise<{ body: ModelDocument; fingerprint: string }> {
  return parse<ModelDocument>(await fetch("/api/v1/model"));
}

export async function fetchHeatmap(
  month: number,
  precip: number,
): Promise<{ body: HeatmapDocument; fingerprint: string }> {
  const params = new URLSearchParams({ month: String(month), precip: String(precip) });
  return parse<HeatmapDocument>(await fetch(`/api/v1/heatmap?${params}`));
}

export async function postRank(
  slots: Slot[],
  precip: number,
): Promise<{ body: RankedSlot[]; fingerprint: string }> {
  const resp = await fetch("/api/v1/rank", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ slots, precip }),
  });
  return parse<RankedSlot[]>(resp);
}
