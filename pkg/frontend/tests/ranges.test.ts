import { describe, expect, it } from "vitest";

import { gridAxes, intRange, rangeParam, sweepQuery, sweepRangeError } from "../src/ranges.js";

describe("intRange", () => {
  it("is inclusive and stepped from the first value", () => {
    expect(intRange(0, 20, 1)).toHaveLength(21);
    expect(intRange(0, 175, 5)).toHaveLength(36);
    expect(intRange(3, 13, 5)).toEqual([3, 8, 13]);
    expect(intRange(9, 16, 1)[0]).toBe(9);
    expect(intRange(9, 16, 1).at(-1)).toBe(16);
  });

  it("is empty when first exceeds last", () => {
    expect(intRange(5, 4, 1)).toEqual([]);
  });

  it("rejects non-integers and bad steps", () => {
    expect(() => intRange(0.5, 4, 1)).toThrow(RangeError);
    expect(() => intRange(0, 4, 0)).toThrow(RangeError);
    expect(() => intRange(0, 4, -2)).toThrow(RangeError);
  });
});

describe("rangeParam", () => {
  it("collapses single-value ranges", () => {
    expect(rangeParam(9, 16)).toBe("9..16");
    expect(rangeParam(7, 7)).toBe("7");
  });
});

describe("sweepQuery", () => {
  it("builds the query in the server's parameter names", () => {
    const q = sweepQuery({
      L: [9, 16],
      theta: [0, 175],
      amount: 25,
      source: "DVC",
      noise: "NO",
    });
    expect(q).toBe("L=9..16&theta=0..175&amount=25&source=DVC&noise=NO");
  });
});

describe("sweepRangeError", () => {
  const base = { amount: 25, source: "DVC", noise: "NO" };

  it("passes well-formed requests", () => {
    expect(sweepRangeError({ ...base, L: [0, 20], theta: [0, 175] })).toBeNull();
    expect(sweepRangeError({ ...base, L: [13, 13], theta: [105, 105] })).toBeNull();
  });

  it("names the problem for inline display", () => {
    expect(sweepRangeError({ ...base, L: [5, 4], theta: [0, 175] })).toBe("L range is empty");
    expect(sweepRangeError({ ...base, L: [0, 21], theta: [0, 175] })).toBe("L must lie in 0..20");
    expect(sweepRangeError({ ...base, L: [0, 20], theta: [10, 5] })).toBe("theta range is empty");
    expect(sweepRangeError({ ...base, L: [0, 20], theta: [0, 180] }))
      .toBe("theta must lie in 0..175");
    expect(sweepRangeError({ ...base, L: [0.5 as number, 20], theta: [0, 175] }))
      .toBe("ranges must be integers");
  });
});

describe("gridAxes", () => {
  it("recovers sorted unique axes from manifest cells", () => {
    const cells = [
      { L: 13, theta: 105 },
      { L: 12, theta: 100 },
      { L: 13, theta: 100 },
      { L: 12, theta: 105 },
    ];
    expect(gridAxes(cells)).toEqual({ Ls: [12, 13], thetas: [100, 105] });
  });

  it("handles a single cell", () => {
    expect(gridAxes([{ L: 5, theta: 45 }])).toEqual({ Ls: [5], thetas: [45] });
  });
});
