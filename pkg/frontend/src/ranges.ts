/** Integer ranges in the server's "first..last" query convention. */

import { L_MAX } from "./grammar.js";

export function intRange(first: number, last: number, step: number): number[] {
  if (!Number.isInteger(first) || !Number.isInteger(last)) {
    throw new RangeError("range endpoints must be integers");
  }
  if (!Number.isInteger(step) || step <= 0) {
    throw new RangeError("step must be a positive integer");
  }
  const out: number[] = [];
  for (let v = first; v <= last; v += step) out.push(v);
  return out;
}

export function rangeParam(first: number, last: number): string {
  return first === last ? String(first) : `${first}..${last}`;
}

export interface SweepRequest {
  L: [number, number];
  theta: [number, number];
  amount: number;
  source: string;
  noise: string;
}

/**
 * Pre-flight check mirroring the server's bounds, so a bad range never
 * leaves the browser. Returns a message for inline display, or null.
 */
export function sweepRangeError(req: SweepRequest): string | null {
  const [l0, l1] = req.L;
  const [t0, t1] = req.theta;
  for (const v of [l0, l1, t0, t1]) {
    if (!Number.isInteger(v)) return "ranges must be integers";
  }
  if (l0 > l1) return "L range is empty";
  if (t0 > t1) return "theta range is empty";
  if (l0 < 0 || l1 > L_MAX) return `L must lie in 0..${L_MAX}`;
  if (t0 < 0 || t1 > 175) return "theta must lie in 0..175";
  return null;
}

export function sweepQuery(req: SweepRequest): string {
  const q = new URLSearchParams();
  q.set("L", rangeParam(req.L[0], req.L[1]));
  q.set("theta", rangeParam(req.theta[0], req.theta[1]));
  q.set("amount", String(req.amount));
  q.set("source", req.source);
  q.set("noise", req.noise);
  return q.toString();
}

/**
 * Row/column axes of a sweep manifest; cells arrive row-major by L, theta
 * stepped by 5, so the axes are recovered from the labels themselves.
 */
export function gridAxes(cells: readonly { L: number; theta: number }[]): {
  Ls: number[];
  thetas: number[];
} {
  const Ls = [...new Set(cells.map((c) => c.L))].sort((a, b) => a - b);
  const thetas = [...new Set(cells.map((c) => c.theta))].sort((a, b) => a - b);
  return { Ls, thetas };
}
