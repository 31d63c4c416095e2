/**
 * Panel wiring. All pixel work happens server-side; this file moves text,
 * JSON, and PNG blobs between the controls and the service, one in-flight
 * request per control lane.
 */

import * as api from "./api.js";
import { NOISE_MODES, SOURCES, describeStage, parse, roundTrip } from "./grammar.js";
import type { NoiseMode, Source } from "./grammar.js";
import { Debouncer, LatestWins } from "./inflight.js";
import { gridAxes, sweepQuery, sweepRangeError } from "./ranges.js";
import {
  deconvFromCell,
  exportBundle,
  interpFromSliders,
  replaceFirstKind,
  stageBody,
  stageLine,
} from "./stages.js";

const BASE = ""; // served from the same origin as the API

function $<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

const state = {
  sid: "",
  step: 4,
  uploadName: "",
  hasReference: false,
  text: "",
  undoStack: [] as string[],
};

const previewLane = new LatestWins();
const pipelineLane = new LatestWins();
const sweepLane = new LatestWins();

// ---------------------------------------------------------------------------
// status + preview
// ---------------------------------------------------------------------------

function setStatus(message: string, isError = false): void {
  const el = $<HTMLSpanElement>("status");
  el.textContent = message;
  el.classList.toggle("error", isError);
}

function describeFailure(e: unknown): string {
  if (e instanceof api.RequestFailed) {
    return e.err.field ? `${e.err.message} (field ${e.err.field})` : e.err.message;
  }
  return e instanceof Error ? e.message : String(e);
}

let previewUrl = "";

function refreshPreview(): void {
  previewLane.submit(async () => {
    try {
      const blob = await api.fetchPreview(BASE, state.sid);
      const url = URL.createObjectURL(blob);
      const img = $<HTMLImageElement>("preview");
      img.src = url;
      if (previewUrl) URL.revokeObjectURL(previewUrl);
      previewUrl = url;
      setStatus("");
    } catch (e) {
      setStatus(describeFailure(e), true);
    }
  });
}

// ---------------------------------------------------------------------------
// pipeline text panel
// ---------------------------------------------------------------------------

function renderStages(): void {
  const list = $<HTMLOListElement>("stage-list");
  list.textContent = "";
  try {
    for (const stage of parse(state.text)) {
      const li = document.createElement("li");
      li.textContent = describeStage(stage);
      list.appendChild(li);
    }
  } catch {
    // server text should always parse; leave the list empty if not
  }
  $<HTMLButtonElement>("undo").disabled = state.undoStack.length === 0;
}

function setText(text: string): void {
  state.text = text;
  $<HTMLTextAreaElement>("pipeline-text").value = text;
  $<HTMLDivElement>("pipeline-error").textContent = "";
  renderStages();
}

function pushUndo(prior: string): void {
  if (state.undoStack[state.undoStack.length - 1] !== prior) {
    state.undoStack.push(prior);
  }
}

/** PUT `text`; the server stores it byte for byte on success. */
function commitText(text: string, recordUndo = true): void {
  const prior = state.text;
  pipelineLane.submit(async () => {
    try {
      await api.putPipeline(BASE, state.sid, text);
      if (recordUndo) pushUndo(prior);
      setText(text);
      refreshPreview();
    } catch (e) {
      $<HTMLDivElement>("pipeline-error").textContent = describeFailure(e);
    }
  });
}

function appendStageAndRefresh(body: Record<string, unknown>): void {
  const prior = state.text;
  pipelineLane.submit(async () => {
    try {
      const resp = await api.appendStage(BASE, state.sid, body);
      pushUndo(prior);
      setText(resp.text);
      refreshPreview();
    } catch (e) {
      setStatus(describeFailure(e), true);
    }
  });
}

const editDebounce = new Debouncer(300);

function wirePipelinePanel(): void {
  const area = $<HTMLTextAreaElement>("pipeline-text");
  const errorBox = $<HTMLDivElement>("pipeline-error");
  const apply = $<HTMLButtonElement>("apply-text");

  area.addEventListener("input", () => {
    editDebounce.schedule(() => {
      const rt = roundTrip(area.value);
      if (rt.ok) {
        errorBox.textContent = `${rt.stages.length} stage${rt.stages.length === 1 ? "" : "s"}, ok`;
        errorBox.classList.remove("error");
        apply.disabled = false;
      } else {
        errorBox.textContent = rt.error.message;
        errorBox.classList.add("error");
        apply.disabled = true;
      }
    });
  });

  apply.addEventListener("click", () => {
    const rt = roundTrip(area.value);
    if (!rt.ok) {
      errorBox.textContent = rt.error.message;
      errorBox.classList.add("error");
      return;
    }
    commitText(area.value);
  });

  $<HTMLButtonElement>("undo").addEventListener("click", () => {
    const prior = state.undoStack.pop();
    if (prior === undefined) return;
    commitText(prior, false);
  });

  $<HTMLButtonElement>("load-preset").addEventListener("click", () => {
    const name = $<HTMLSelectElement>("preset-list").value;
    if (!name) return;
    pipelineLane.submit(async () => {
      try {
        const preset = await api.fetchPreset(BASE, name);
        await api.putPipeline(BASE, state.sid, preset.text);
        pushUndo(state.text);
        setText(preset.text);
        refreshPreview();
      } catch (e) {
        setStatus(describeFailure(e), true);
      }
    });
  });

  $<HTMLButtonElement>("export").addEventListener("click", () => {
    const rt = roundTrip(state.text);
    if (!rt.ok) {
      errorBox.textContent = `not exporting: ${rt.error.message}`;
      errorBox.classList.add("error");
      return;
    }
    const bundle = exportBundle(state.text, state.uploadName, state.step);
    const blob = new Blob([bundle.text], { type: "text/plain" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = bundle.filename;
    a.click();
    URL.revokeObjectURL(a.href);
    $<HTMLElement>("cli-hint").textContent = bundle.cliHint;
  });
}

// ---------------------------------------------------------------------------
// threshold sliders
// ---------------------------------------------------------------------------

const sliderDebounce = new Debouncer(150);

function wireSliders(): void {
  const inputs = ["p2", "p3", "p4"].map((id) => $<HTMLInputElement>(id));
  const labels = ["p2-value", "p3-value", "p4-value"].map((id) => $<HTMLSpanElement>(id));

  const commit = (): void => {
    const [p2, p3, p4] = inputs.map((el) => parseInt(el.value, 10));
    const level = $<HTMLSelectElement>("interp-level").value === "interp2" ? 2 : 1;
    const stage = interpFromSliders(level as 1 | 2, p2, p3, p4);
    const replaced = replaceFirstKind(state.text, stage.kind, stageLine(stage));
    if (replaced === null) {
      appendStageAndRefresh(stageBody(stage));
    } else if (replaced !== state.text) {
      commitText(replaced);
    }
  };

  inputs.forEach((el, i) => {
    el.addEventListener("input", () => {
      labels[i].textContent = el.value;
      sliderDebounce.schedule(commit);
    });
  });
}

// ---------------------------------------------------------------------------
// sweep panel
// ---------------------------------------------------------------------------

function sweepSettings(): { source: Source; noise: NoiseMode; applyAmount: number } {
  return {
    source: $<HTMLSelectElement>("sweep-source").value as Source,
    noise: $<HTMLSelectElement>("sweep-noise").value as NoiseMode,
    applyAmount: parseInt($<HTMLSelectElement>("apply-amount").value, 10),
  };
}

function renderSweep(manifest: api.SweepManifest): void {
  const { Ls, thetas } = gridAxes(manifest.cells);
  const grid = $<HTMLDivElement>("sweep-grid");
  grid.textContent = "";
  grid.style.gridTemplateColumns = `auto repeat(${thetas.length}, min-content)`;

  const corner = document.createElement("div");
  corner.className = "axis";
  corner.textContent = "L \\ theta";
  grid.appendChild(corner);
  for (const th of thetas) {
    const head = document.createElement("div");
    head.className = "axis";
    head.textContent = `${th}`;
    grid.appendChild(head);
  }

  const best = manifest.cells.reduce<api.SweepCell | null>(
    (acc, c) => (c.objective !== null && (acc === null || c.objective < acc.objective!) ? c : acc),
    null,
  );

  for (const L of Ls) {
    const label = document.createElement("div");
    label.className = "axis";
    label.textContent = `${L}`;
    grid.appendChild(label);
    for (const th of thetas) {
      const cell = manifest.cells.find((c) => c.L === L && c.theta === th);
      if (!cell) continue;
      const img = document.createElement("img");
      img.src = `data:image/png;base64,${cell.png}`;
      img.width = manifest.cell_width;
      img.height = manifest.cell_height;
      img.className = "cell";
      if (best && cell.L === best.L && cell.theta === best.theta) img.classList.add("best");
      img.title =
        `L=${cell.L} theta=${cell.theta}` +
        (cell.objective !== null ? ` objective=${cell.objective.toFixed(1)}` : "");
      img.addEventListener("click", () => {
        const s = sweepSettings();
        appendStageAndRefresh(
          stageBody(
            deconvFromCell(cell.L, cell.theta, {
              source: s.source,
              amount: s.applyAmount,
              noise: s.noise,
            }),
          ),
        );
      });
      grid.appendChild(img);
    }
  }
}

function runSweep(): void {
  const errorBox = $<HTMLDivElement>("sweep-error");
  const req = {
    L: [
      parseInt($<HTMLInputElement>("L-from").value, 10),
      parseInt($<HTMLInputElement>("L-to").value, 10),
    ] as [number, number],
    theta: [
      parseInt($<HTMLInputElement>("theta-from").value, 10),
      parseInt($<HTMLInputElement>("theta-to").value, 10),
    ] as [number, number],
    amount: $<HTMLInputElement>("full-quality").checked ? 300 : 25,
    source: sweepSettings().source,
    noise: sweepSettings().noise,
  };
  const rangeError = sweepRangeError(req);
  if (rangeError) {
    errorBox.textContent = rangeError;
    return;
  }
  errorBox.textContent = "rendering...";
  sweepLane.submit(async () => {
    try {
      const manifest = await api.fetchSweep(BASE, state.sid, sweepQuery(req));
      renderSweep(manifest);
      errorBox.textContent = `${manifest.cells.length} cells at amount=${manifest.amount}; click one to append its deconv stage`;
    } catch (e) {
      errorBox.textContent = describeFailure(e);
    }
  });
}

function wireSweep(): void {
  $<HTMLButtonElement>("run-sweep").addEventListener("click", runSweep);
  $<HTMLInputElement>("full-quality").addEventListener("change", () => {
    if ($<HTMLDivElement>("sweep-grid").childElementCount > 0) runSweep();
  });
}

// ---------------------------------------------------------------------------
// search panel
// ---------------------------------------------------------------------------

let pollTimer: ReturnType<typeof setInterval> | null = null;

function wireSearch(): void {
  const button = $<HTMLButtonElement>("optimize");
  const statusBox = $<HTMLDivElement>("search-status");

  button.addEventListener("click", async () => {
    // compact grid so interactive runs stay in the seconds range
    const config = {
      p_step: 15,
      L_values: [0, 2, 4, 6, 8],
      theta_values: [0, 30, 60, 90, 120, 150],
      amount_values: [0, 25, 100],
      gamma_values: [1.0, 2.0, 2.25, 3.0],
      source_values: ["DVC"],
      noise_values: ["NO", "LO"],
      max_occurrences: 2,
    };
    try {
      button.disabled = true;
      const runId = await api.startSearch(BASE, state.sid, config);
      if (pollTimer !== null) clearInterval(pollTimer);
      pollTimer = setInterval(async () => {
        try {
          const run = await api.fetchRun(BASE, runId);
          const last = run.trace[run.trace.length - 1];
          statusBox.textContent =
            `${run.status}, ${run.trace.length} trace rows` +
            (last && last.total !== null ? `, total ${last.total.toFixed(3)}` : "");
          if (run.status !== "running") {
            if (pollTimer !== null) clearInterval(pollTimer);
            pollTimer = null;
            button.disabled = false;
            if (run.status === "done") {
              statusBox.textContent += run.spec ? " - applying result" : " - nothing beat the baseline";
              if (run.spec) commitText(run.spec);
            } else {
              statusBox.textContent = `failed: ${run.error ?? "unknown error"}`;
            }
          }
        } catch (e) {
          if (pollTimer !== null) clearInterval(pollTimer);
          pollTimer = null;
          button.disabled = false;
          statusBox.textContent = describeFailure(e);
        }
      }, 500);
    } catch (e) {
      button.disabled = false;
      statusBox.textContent = describeFailure(e);
    }
  });
}

// ---------------------------------------------------------------------------
// upload panel
// ---------------------------------------------------------------------------

function wireUpload(): void {
  const button = $<HTMLButtonElement>("start");
  const errorBox = $<HTMLSpanElement>("upload-error");

  button.addEventListener("click", async () => {
    errorBox.textContent = "";
    const file = $<HTMLInputElement>("file").files?.[0];
    if (!file) {
      errorBox.textContent = "choose a PNG or .lab file first";
      return;
    }
    if (file.size > api.MAX_UPLOAD) {
      errorBox.textContent = `${file.name} is ${file.size} bytes; the upload cap is ${api.MAX_UPLOAD}`;
      return;
    }
    const reference = $<HTMLInputElement>("reference").files?.[0];
    const step = parseInt($<HTMLSelectElement>("step").value, 10);
    try {
      button.disabled = true;
      const info = await api.createSession(BASE, file, step, reference);
      state.sid = info.id;
      state.step = info.step;
      state.uploadName = file.name;
      state.hasReference = info.has_reference;
      state.undoStack = [];
      $<HTMLDivElement>("meta").textContent =
        `${info.width}x${info.height}, ${info.channels} channel${info.channels === 1 ? "" : "s"}, ` +
        `step ${info.step}${info.has_reference ? ", reference attached" : ""}`;
      $<HTMLButtonElement>("optimize").disabled = !info.has_reference;
      $<HTMLDivElement>("search-status").textContent = info.has_reference
        ? ""
        : "upload a reference image to enable the search";
      setText(await api.fetchPipeline(BASE, state.sid));
      $<HTMLElement>("workbench").hidden = false;
      refreshPreview();
    } catch (e) {
      errorBox.textContent = describeFailure(e);
    } finally {
      button.disabled = false;
    }
  });
}

async function populatePresets(): Promise<void> {
  try {
    const names = await api.listPresets(BASE);
    const select = $<HTMLSelectElement>("preset-list");
    for (const name of names) {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      select.appendChild(opt);
    }
  } catch {
    // presets are a convenience; the panel still works without them
  }
}

function populateEnums(): void {
  for (const [id, values] of [
    ["sweep-source", SOURCES],
    ["sweep-noise", NOISE_MODES],
  ] as const) {
    const select = $<HTMLSelectElement>(id);
    for (const v of values) {
      const opt = document.createElement("option");
      opt.value = v;
      opt.textContent = v;
      select.appendChild(opt);
    }
  }
}

export function boot(): void {
  populateEnums();
  wireUpload();
  wirePipelinePanel();
  wireSliders();
  wireSweep();
  wireSearch();
  void populatePresets();
}

boot();
