/**
 * Client-side mirror of the pipeline text grammar.
 *
 * The server owns the text and stores it byte for byte; this parser exists
 * so edits can be validated and stage lists rendered without a round trip.
 * It accepts what the server accepts: one stage per line, `#` comments,
 * and the same split between malformed lines (syntax, line number only)
 * and well-formed lines with out-of-range values (range, named field).
 */

export const L_MAX = 20;
export const SOURCES = ["DVC", "OFC"] as const;
export const NOISE_MODES = ["NO", "YES", "DO", "LO", "AUTO"] as const;
export const AMOUNTS: readonly number[] = Array.from({ length: 13 }, (_, i) => i * 25);

export type Source = (typeof SOURCES)[number];
export type NoiseMode = (typeof NOISE_MODES)[number];

export interface InterpStage {
  kind: "interp1" | "interp2";
  p2: number;
  p3: number;
  p4: number;
  geometry: "even-step" | "step3";
}

export interface MagnifyStage {
  kind: "magnify";
  gamma: number;
}

export interface DeconvStage {
  kind: "deconv";
  L: number;
  theta: number;
  source: Source;
  amount: number;
  noise: NoiseMode;
}

export type Stage = InterpStage | MagnifyStage | DeconvStage;

export class PipelineTextError extends Error {
  /** 1-based line number; 0 for whole-pipeline constraint violations. */
  readonly line: number;
  /** Set only for range errors, naming the offending key. */
  readonly field?: string;

  constructor(message: string, line = 0, field?: string) {
    super(line > 0 ? `line ${line}: ${message}` : message);
    this.name = "PipelineTextError";
    this.line = line;
    this.field = field;
  }
}

const INT = /^[+-]?\d+$/;
const FLOAT = /^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$/;

function splitFields(tokens: string[], line: number): Map<string, string> {
  const kv = new Map<string, string>();
  for (const tok of tokens) {
    const i = tok.indexOf("=");
    const key = i < 0 ? "" : tok.slice(0, i);
    const value = i < 0 ? "" : tok.slice(i + 1);
    if (!key || !value) {
      throw new PipelineTextError(`expected key=value, got '${tok}'`, line);
    }
    if (kv.has(key)) {
      throw new PipelineTextError(`duplicate field '${key}'`, line);
    }
    kv.set(key, value);
  }
  return kv;
}

function takeInt(kv: Map<string, string>, key: string, lo: number, hi: number, line: number): number {
  const raw = kv.get(key);
  if (raw === undefined) {
    throw new PipelineTextError(`missing field '${key}'`, line);
  }
  kv.delete(key);
  if (!INT.test(raw)) {
    throw new PipelineTextError(`field '${key}' expects an integer, got '${raw}'`, line);
  }
  const v = parseInt(raw, 10);
  if (v < lo || v > hi) {
    throw new PipelineTextError(`${key} must be in ${lo}..${hi}, got ${v}`, line, key);
  }
  return v;
}

function takeEnum<T extends string>(
  kv: Map<string, string>,
  key: string,
  allowed: readonly T[],
  line: number,
): T {
  const raw = kv.get(key);
  if (raw === undefined) {
    throw new PipelineTextError(`missing field '${key}'`, line);
  }
  kv.delete(key);
  if (!(allowed as readonly string[]).includes(raw)) {
    throw new PipelineTextError(`${key} must be one of ${allowed.join("|")}, got '${raw}'`, line, key);
  }
  return raw as T;
}

export function parse(text: string): Stage[] {
  const stages: Stage[] = [];
  const lines = text.split(/\r?\n/);
  for (let n = 0; n < lines.length; n++) {
    const body = lines[n].split("#", 1)[0].trim();
    if (!body) continue;
    const no = n + 1;
    const tokens = body.split(/\s+/);
    const kind = tokens[0];
    const kv = splitFields(tokens.slice(1), no);

    if (kind === "interp1" || kind === "interp2") {
      const p2 = takeInt(kv, "p2", 0, 255, no);
      const p3 = takeInt(kv, "p3", 0, 255, no);
      const p4 = takeInt(kv, "p4", 0, 255, no);
      let geometry: InterpStage["geometry"] = "even-step";
      if (kind === "interp1" && kv.has("geom")) {
        const geom = kv.get("geom")!;
        kv.delete("geom");
        if (geom !== "step3") {
          throw new PipelineTextError(`geom must be step3, got '${geom}'`, no, "geom");
        }
        geometry = "step3";
      }
      stages.push({ kind, p2, p3, p4, geometry });
    } else if (kind === "magnify") {
      const raw = kv.get("gamma");
      if (raw === undefined) {
        throw new PipelineTextError("missing field 'gamma'", no);
      }
      kv.delete("gamma");
      if (!FLOAT.test(raw)) {
        throw new PipelineTextError(`field 'gamma' expects a number, got '${raw}'`, no);
      }
      const gamma = parseFloat(raw);
      if (!(gamma >= 1 && gamma <= 4)) {
        throw new PipelineTextError(`gamma must be in [1, 4], got ${gamma}`, no, "gamma");
      }
      stages.push({ kind, gamma });
    } else if (kind === "deconv") {
      const L = takeInt(kv, "L", 0, L_MAX, no);
      const theta = takeInt(kv, "theta", 0, 175, no);
      const source = takeEnum(kv, "source", SOURCES, no);
      const amount = takeInt(kv, "amount", 0, 300, no);
      if (amount % 25 !== 0) {
        throw new PipelineTextError(`amount must be a multiple of 25, got ${amount}`, no, "amount");
      }
      const noise = takeEnum(kv, "noise", NOISE_MODES, no);
      stages.push({ kind, L, theta, source, amount, noise });
    } else {
      throw new PipelineTextError(`unknown stage '${kind}'`, no);
    }

    if (kv.size > 0) {
      const keys = [...kv.keys()].sort().join(", ");
      throw new PipelineTextError(`unknown field(s) for ${kind}: ${keys}`, no);
    }
  }

  const magnifiers: number[] = [];
  stages.forEach((s, i) => {
    if (s.kind === "magnify" && s.gamma > 1) magnifiers.push(i);
  });
  if (magnifiers.length > 1) {
    throw new PipelineTextError("at most one stage may magnify (gamma > 1)");
  }
  const firstDeconv = stages.findIndex((s) => s.kind === "deconv");
  if (magnifiers.length > 0 && firstDeconv >= 0 && magnifiers[0] > firstDeconv) {
    throw new PipelineTextError("magnification must precede the first deconvolution");
  }
  return stages;
}

/** printf-style %g; exact for the magnitudes the grammar allows. */
export function fmtG(x: number): string {
  return String(parseFloat(x.toPrecision(6)));
}

export function serialize(stages: readonly Stage[]): string {
  const lines = stages.map((s) => {
    switch (s.kind) {
      case "interp1":
      case "interp2": {
        const geom = s.geometry === "step3" ? " geom=step3" : "";
        return `${s.kind} p2=${s.p2} p3=${s.p3} p4=${s.p4}${geom}`;
      }
      case "magnify":
        return `magnify gamma=${fmtG(s.gamma)}`;
      case "deconv":
        return `deconv L=${s.L} theta=${s.theta} source=${s.source} amount=${s.amount} noise=${s.noise}`;
    }
  });
  return lines.length > 0 ? lines.join("\n") + "\n" : "";
}

export type RoundTrip =
  | { ok: true; stages: Stage[]; normalized: string }
  | { ok: false; error: PipelineTextError };

/**
 * Validate an edit: the text must parse, and parse(serialize(parse(text)))
 * must land on the same serialization. Run on every pipeline edit before
 * anything is sent to the server.
 */
export function roundTrip(text: string): RoundTrip {
  try {
    const stages = parse(text);
    const normalized = serialize(stages);
    if (serialize(parse(normalized)) !== normalized) {
      throw new PipelineTextError("text does not round-trip through the grammar");
    }
    return { ok: true, stages, normalized };
  } catch (e) {
    if (e instanceof PipelineTextError) return { ok: false, error: e };
    throw e;
  }
}

export function describeStage(s: Stage): string {
  switch (s.kind) {
    case "interp1":
    case "interp2": {
      const level = s.kind === "interp1" ? "level 1" : "level 2";
      const geom = s.geometry === "step3" ? ", 3x2x2 blocks" : "";
      return `interpolate ${level} (p2=${s.p2} p3=${s.p3} p4=${s.p4}${geom})`;
    }
    case "magnify":
      return `magnify x${fmtG(s.gamma)}`;
    case "deconv":
      return `deconvolve L=${s.L} theta=${s.theta} ${s.source} ${s.amount}% noise=${s.noise}`;
  }
}
