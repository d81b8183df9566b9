/** What-if state: pure transitions, no DOM, no arithmetic on model numbers.
 *
 * Invariants enforced here:
 *  - the visible ranking always comes from the latest successful response;
 *  - responses with a mismatched model fingerprint are discarded;
 *  - at most one ranking request is authoritative (newest token wins).
 */

import type { RankedSlot, Slot } from "./types";

export interface WhatIfState {
  month: number;
  precip: number;
  pins: Slot[];
  ranking: RankedSlot[] | null;
  rankingToken: number; // token of the displayed/awaited request
  modelFingerprint: string | null;
  error: string | null;
}

export function initialState(): WhatIfState {
  return {
    month: 6,
    precip: 0,
    pins: [],
    ranking: null,
    rankingToken: 0,
    modelFingerprint: null,
    error: null,
  };
}

export function setModelFingerprint(state: WhatIfState, fingerprint: string): WhatIfState {
  return { ...state, modelFingerprint: fingerprint };
}

export function setMonth(state: WhatIfState, month: number): WhatIfState {
  if (!Number.isInteger(month) || month < 1 || month > 12) return state;
  // pinned slots carry their month; changing months retargets the pins
  const pins = state.pins.map((p) => ({ ...p, month }));
  return { ...state, month, pins, ranking: null };
}

export function setPrecip(state: WhatIfState, precip: number): WhatIfState {
  if (!(precip >= 0)) return state;
  return { ...state, precip, ranking: null };
}

function sameSlot(a: Slot, b: Slot): boolean {
  return a.weekday === b.weekday && a.hour === b.hour && a.month === b.month;
}

export function togglePin(state: WhatIfState, weekday: number, hour: number): WhatIfState {
  const slot: Slot = { weekday, hour, month: state.month };
  const existing = state.pins.find((p) => sameSlot(p, slot));
  const pins = existing
    ? state.pins.filter((p) => !sameSlot(p, slot))
    : [...state.pins, slot];
  return { ...state, pins };
}

export function clearPins(state: WhatIfState): WhatIfState {
  return { ...state, pins: [], ranking: null };
}

/** Start a ranking request; the returned token must accompany the response. */
export function beginRanking(state: WhatIfState): { state: WhatIfState; token: number } {
  const token = state.rankingToken + 1;
  return { state: { ...state, rankingToken: token, error: null }, token };
}

/** Apply a response; stale tokens and foreign fingerprints are discarded. */
export function applyRanking(
  state: WhatIfState,
  token: number,
  fingerprint: string,
  ranked: RankedSlot[],
): WhatIfState {
  if (token !== state.rankingToken) return state; // superseded request
  if (state.modelFingerprint !== null && fingerprint !== state.modelFingerprint) {
    return { ...state, error: "model changed on the server; reload the page" };
  }
  return { ...state, ranking: ranked, error: null };
}

export function applyRankingError(
  state: WhatIfState,
  token: number,
  message: string,
): WhatIfState {
  if (token !== state.rankingToken) return state;
  return { ...state, error: message };
}

/** The shortlist table always shows the server's order, never pin order. */
export function displayedRanking(state: WhatIfState): RankedSlot[] {
  return state.ranking ?? [];
}

export function encodeQuery(state: WhatIfState): string {
  const params = new URLSearchParams();
  params.set("month", String(state.month));
  params.set("precip", String(state.precip));
  if (state.pins.length) {
    params.set(
      "pins",
      state.pins.map((p) => `${p.weekday}-${p.hour}`).join(","),
    );
  }
  return params.toString();
}

export function decodeQuery(query: string): WhatIfState {
  const params = new URLSearchParams(query);
  let state = initialState();
  const month = Number(params.get("month"));
  if (Number.isInteger(month) && month >= 1 && month <= 12) {
    state = { ...state, month };
  }
  const precip = Number(params.get("precip"));
  if (Number.isFinite(precip) && precip >= 0) {
    state = { ...state, precip };
  }
  const pins = params.get("pins");
  if (pins) {
    for (const token of pins.split(",")) {
      const [w, h] = token.split("-").map(Number);
      if (Number.isInteger(w) && w >= 0 && w <= 6 && Number.isInteger(h) && h >= 0 && h <= 23) {
        state = togglePin(state, w, h);
      }
    }
  }
  return state;
}
