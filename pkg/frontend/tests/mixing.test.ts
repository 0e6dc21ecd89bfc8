import { describe, expect, it } from "vitest";
import { crossoverPosition, isPureSeedA, isPureSeedB } from "../src/mixing.js";
import { lerpVector, requestFromState } from "../src/protocol.js";
import { defaultState } from "../src/state.js";

const info = { styleLayers: 12, aggregationLayer: 4 };

describe("crossover slider", () => {
  it("labels pre-aggregation indices as geometry", () => {
    for (let i = 0; i < info.aggregationLayer; i++) {
      expect(crossoverPosition(i, info).label)
        .toBe("geometry (pre-aggregation)");
    }
  });

  it("labels the aggregation index and later as appearance", () => {
    for (let i = info.aggregationLayer; i <= info.styleLayers; i++) {
      expect(crossoverPosition(i, info).label)
        .toBe("appearance (post-aggregation)");
    }
  });

  it("clamps out-of-range indices and flags the clamp", () => {
    expect(crossoverPosition(-3, info)).toMatchObject({
      index: 0, clamped: true,
    });
    expect(crossoverPosition(99, info)).toMatchObject({
      index: info.styleLayers, clamped: true,
    });
    expect(crossoverPosition(5, info).clamped).toBe(false);
  });

  it("identifies the pure-seed endpoints", () => {
    expect(isPureSeedA(info.styleLayers, info)).toBe(true);
    expect(isPureSeedA(info.styleLayers - 1, info)).toBe(false);
    expect(isPureSeedB(0)).toBe(true);
    expect(isPureSeedB(1)).toBe(false);
  });
});

describe("request construction", () => {
  it("omits the mixing spec at the pure-seed-A endpoint", () => {
    const state = defaultState();
    state.seedB = 7;
    state.crossover = info.styleLayers;
    const req = requestFromState(state, info.styleLayers);
    expect(req.mixing).toBeUndefined();
    expect(req.seed).toBe(state.seedA);
  });

  it("attaches the mixing spec mid-range", () => {
    const state = defaultState();
    state.seedB = 7;
    state.crossover = 3;
    const req = requestFromState(state, info.styleLayers);
    expect(req.mixing).toEqual({ seed_b: 7, crossover_layer: 3 });
  });
});

describe("latent interpolation", () => {
  it("sends an interpolated w instead of a seed when scrubbing", () => {
    const state = defaultState();
    state.seedB = 7;
    state.interp = 0.25;
    const latents = { wA: [0, 4], wB: [4, 0] };
    const req = requestFromState(state, info.styleLayers, latents);
    expect(req.seed).toBeUndefined();
    expect(req.w).toEqual([1, 3]);
    expect(req.mixing).toBeUndefined();
  });

  it("keeps the plain seed request at scrub position zero", () => {
    const state = defaultState();
    state.seedB = 7;
    state.interp = 0;
    const req = requestFromState(state, info.styleLayers,
                                 { wA: [0], wB: [1] });
    expect(req.seed).toBe(state.seedA);
    expect(req.w).toBeUndefined();
  });

  it("rejects mismatched vector lengths", () => {
    expect(() => lerpVector([1, 2], [1], 0.5)).toThrow();
  });
});
