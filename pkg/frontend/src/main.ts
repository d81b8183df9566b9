/** DOM wiring for the what-if explorer. All numbers displayed here come
 * verbatim from API responses; the pure modules decide order and emphasis.
 */

import { ApiError, fetchHeatmap, fetchModel, postRank } from "./api";
import { colorFor, safestCell } from "./heatmap";
import {
  WhatIfState,
  applyRanking,
  applyRankingError,
  beginRanking,
  clearPins,
  decodeQuery,
  displayedRanking,
  encodeQuery,
  setModelFingerprint,
  setMonth,
  setPrecip,
  togglePin,
} from "./state";
import { barSpans, isDeEmphasized, rowsForCategory, sortRows, SortKey } from "./table";
import { fixed, hourLabel, monthName, percent } from "./format";
import type { HeatmapDocument, ModelDocument } from "./types";
import "./style.css";

let state: WhatIfState = decodeQuery(location.search.replace(/^\?/, ""));
let model: ModelDocument | null = null;
let heatmap: HeatmapDocument | null = null;
let sortKey: SortKey = "percent_change";
let sortDescending = true;

const app = document.getElementById("app")!;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  node.append(...children);
  return node;
}

function syncUrl(): void {
  history.replaceState(null, "", `?${encodeQuery(state)}`);
}

function setState(next: WhatIfState): void {
  state = next;
  syncUrl();
  render();
}

function showError(message: string): void {
  state = { ...state, error: message };
  render();
}

async function loadModel(): Promise<void> {
  try {
    const { body, fingerprint } = await fetchModel();
    model = body;
    state = setModelFingerprint(state, fingerprint);
    render();
  } catch (err) {
    showError(err instanceof ApiError ? err.message : `model load failed: ${err}`);
  }
}

async function loadHeatmap(): Promise<void> {
  try {
    const { body } = await fetchHeatmap(state.month, state.precip);
    if (state.modelFingerprint && body.fingerprint !== state.modelFingerprint) {
      showError("model changed on the server; reload the page");
      return;
    }
    heatmap = body;
    render();
  } catch (err) {
    showError(err instanceof ApiError ? err.message : `heatmap failed: ${err}`);
  }
}

async function rankShortlist(): Promise<void> {
  if (!state.pins.length) return;
  const begun = beginRanking(state);
  state = begun.state;
  render();
  try {
    const { body, fingerprint } = await postRank(state.pins, state.precip);
    setState(applyRanking(state, begun.token, fingerprint, body));
  } catch (err) {
    const message = err instanceof ApiError ? err.message : String(err);
    setState(applyRankingError(state, begun.token, message));
  }
}

function controls(): HTMLElement {
  const monthSelect = el("select", { id: "month", "aria-label": "month" });
  for (let m = 1; m <= 12; m++) {
    const option = el("option", { value: String(m) }, monthName(m)) as HTMLOptionElement;
    option.selected = m === state.month;
    monthSelect.append(option);
  }
  monthSelect.addEventListener("change", () => {
    setState(setMonth(state, Number(monthSelect.value)));
    void loadHeatmap();
  });

  const precipToggle = el("input", {
    type: "checkbox",
    id: "precip",
    "aria-label": "assume precipitation",
  }) as HTMLInputElement;
  precipToggle.checked = state.precip > 0;
  precipToggle.addEventListener("change", () => {
    setState(setPrecip(state, precipToggle.checked ? 1 : 0));
    void loadHeatmap();
  });

  return el(
    "section",
    { class: "controls" },
    el("label", { for: "month" }, "Month "),
    monthSelect,
    el("label", { for: "precip", class: "precip-label" }, " Precipitation "),
    precipToggle,
  );
}

function heatmapSection(): HTMLElement {
  const section = el("section", { class: "heatmap" });
  section.append(el("h2", {}, `Expected crashes by weekday and hour, ${monthName(state.month)}`));
  if (!heatmap) {
    section.append(el("p", {}, "loading risk surface..."));
    return section;
  }
  const safe = safestCell(heatmap);
  const table = el("table", { class: "grid", role: "grid" });
  const header = el("tr", {}, el("th", {}, ""));
  for (const hour of heatmap.hours) header.append(el("th", {}, String(hour)));
  table.append(header);
  heatmap.cells.forEach((row, weekday) => {
    const tr = el("tr", {}, el("th", {}, heatmap!.weekday_labels[weekday]));
    row.forEach((value, hour) => {
      const pinned = state.pins.some((p) => p.weekday === weekday && p.hour === hour);
      const classes = [
        "cell",
        weekday === safe.weekday && hour === safe.hour ? "safest" : "",
        pinned ? "pinned" : "",
      ].join(" ");
      const button = el(
        "button",
        {
          class: classes,
          title: `${heatmap!.weekday_labels[weekday]} ${hourLabel(hour)}: ${fixed(value)}`,
          "aria-label": `pin ${heatmap!.weekday_labels[weekday]} ${hourLabel(hour)}`,
        },
      ) as HTMLButtonElement;
      button.style.background = colorFor(value, heatmap!);
      button.addEventListener("click", () => {
        setState(togglePin(state, weekday, hour));
      });
      tr.append(el("td", {}, button));
    });
    table.append(tr);
  });
  section.append(table);
  section.append(
    el(
      "p",
      { class: "hint" },
      `safest cell: ${heatmap.weekday_labels[safe.weekday]} ${hourLabel(safe.hour)} ` +
        `(${fixed(safe.value)} expected)`,
    ),
  );
  return section;
}

function shortlistSection(): HTMLElement {
  const section = el("section", { class: "shortlist" });
  section.append(el("h2", {}, "Shortlist"));
  const rankButton = el("button", { class: "rank" }, "Rank shortlist") as HTMLButtonElement;
  rankButton.disabled = state.pins.length === 0;
  if (rankButton.disabled) rankButton.title = "pin at least one cell from the grid";
  rankButton.addEventListener("click", () => void rankShortlist());
  const clearButton = el("button", { class: "clear" }, "Clear") as HTMLButtonElement;
  clearButton.addEventListener("click", () => setState(clearPins(state)));
  section.append(
    el(
      "p",
      {},
      `${state.pins.length} pinned slot(s) in ${monthName(state.month)} `,
      rankButton,
      " ",
      clearButton,
    ),
  );

  const ranking = displayedRanking(state);
  if (ranking.length) {
    const table = el(
      "table",
      { class: "ranking" },
      el(
        "tr",
        {},
        el("th", {}, "rank"),
        el("th", {}, "slot"),
        el("th", {}, "expected"),
        el("th", {}, "relative risk"),
      ),
    );
    const worst = Math.max(...ranking.map((r) => r.relative_risk));
    for (const row of ranking) {
      const bar = el("div", { class: "bar" });
      bar.style.width = `${(100 * row.relative_risk) / worst}%`;
      table.append(
        el(
          "tr",
          {},
          el("td", {}, String(row.rank)),
          el("td", {}, `${row.weekday} ${hourLabel(row.hour)}`),
          el("td", {}, fixed(row.expected_count)),
          el("td", { class: "riskcell" }, fixed(row.relative_risk), bar),
        ),
      );
    }
    section.append(table);
  }
  return section;
}

function coefficientsSection(): HTMLElement {
  const section = el("section", { class: "coefficients" });
  section.append(el("h2", {}, "Model coefficients"));
  if (!model) {
    section.append(el("p", {}, "loading model..."));
    return section;
  }
  const meta = el(
    "p",
    { class: "meta" },
    `family ${model.family}, dispersion alpha = ${fixed(model.alpha, 5)}` +
      (model.dispersion ? `, overdispersed: ${model.dispersion.overdispersed}` : ""),
  );
  section.append(meta);
  if (model.fit_meta.caveat) {
    section.append(el("p", { class: "caveat" }, String(model.fit_meta.caveat)));
  }

  for (const category of ["hour", "weekday", "month"]) {
    const rows = rowsForCategory(model.rows, category);
    if (!rows.length) continue;
    const chart = el("div", { class: "chart" }, el("h3", {}, category));
    for (const { row, span } of barSpans(rows)) {
      const bar = el("div", { class: span >= 0 ? "cbar pos" : "cbar neg" });
      bar.style.width = `${Math.abs(span) * 100}%`;
      const line = el(
        "div",
        { class: "chart-row" + (isDeEmphasized(row) ? " dim" : "") },
        el("span", { class: "lbl" }, row.name),
        bar,
        el("span", { class: "val" }, percent(row.percent_change)),
      );
      chart.append(line);
    }
    section.append(chart);
  }

  const table = el("table", { class: "coef-table" });
  const headers: [string, SortKey][] = [
    ["name", "name"],
    ["coefficient", "coefficient"],
    ["exp(coef)", "exp_coef"],
    ["percent change", "percent_change"],
    ["p-value", "p_value"],
    ["crashes", "crash_total"],
    ["share", "crash_share"],
  ];
  const headRow = el("tr", {});
  for (const [label, key] of headers) {
    const th = el("th", { tabindex: "0", role: "button" }, label + (sortKey === key ? (sortDescending ? " v" : " ^") : ""));
    const toggle = () => {
      if (sortKey === key) sortDescending = !sortDescending;
      else {
        sortKey = key;
        sortDescending = true;
      }
      render();
    };
    th.addEventListener("click", toggle);
    th.addEventListener("keydown", (ev) => {
      if (ev.key === "Enter" || ev.key === " ") {
        ev.preventDefault();
        toggle();
      }
    });
    headRow.append(th);
  }
  table.append(headRow);
  for (const row of sortRows(model.rows, sortKey, sortDescending)) {
    table.append(
      el(
        "tr",
        { class: isDeEmphasized(row) ? "dim" : "" },
        el("td", {}, row.name),
        el("td", {}, fixed(row.coefficient)),
        el("td", {}, fixed(row.exp_coef)),
        el("td", {}, percent(row.percent_change)),
        el("td", {}, fixed(row.p_value)),
        el("td", {}, String(row.crash_total)),
        el("td", {}, percent(100 * row.crash_share)),
      ),
    );
  }
  section.append(table);
  return section;
}

function render(): void {
  app.replaceChildren();
  app.append(el("h1", {}, "Commute risk explorer"));
  if (state.error) {
    app.append(el("div", { class: "banner", role: "alert" }, state.error));
  }
  app.append(controls(), heatmapSection(), shortlistSection(), coefficientsSection());
}

render();
void loadModel().then(() => loadHeatmap());
