import { describe, expect, it } from "vitest";
import { defaultState, stateFromQuery, stateToQuery } from "../src/state.js";

describe("viewer state URL round-trip", () => {
  it("is lossless for every shareable field", () => {
    const state = defaultState();
    state.theta = -2.718281828459045;
    state.phi = 0.1 + 0.2; // deliberately non-representable sum
    state.radius = 1.25;
    state.fov = 33.3;
    state.seedA = 123456789;
    state.seedB = -7;
    state.crossover = 9;
    state.interp = 1 / 3;
    state.resolution = 128;
    const back = stateFromQuery(stateToQuery(state));
    expect(back.theta).toBe(state.theta);
    expect(back.phi).toBe(state.phi);
    expect(back.radius).toBe(state.radius);
    expect(back.fov).toBe(state.fov);
    expect(back.seedA).toBe(state.seedA);
    expect(back.seedB).toBe(state.seedB);
    expect(back.crossover).toBe(state.crossover);
    expect(back.interp).toBe(state.interp);
    expect(back.resolution).toBe(state.resolution);
  });

  it("double round-trip is a fixed point", () => {
    const state = defaultState();
    state.theta = Math.PI / 7;
    const q1 = stateToQuery(state);
    const q2 = stateToQuery(stateFromQuery(q1));
    expect(q2).toBe(q1);
  });

  it("ignores malformed fields and keeps the base value", () => {
    const base = defaultState();
    base.fov = 45;
    const back = stateFromQuery("fov=banana&seedA=3", base);
    expect(back.fov).toBe(45);
    expect(back.seedA).toBe(3);
  });

  it("runtime-only fields stay out of the URL", () => {
    const state = defaultState();
    state.connection = "reconnecting";
    state.lastLatencyMs = 12.5;
    const q = stateToQuery(state);
    expect(q).not.toContain("connection");
    expect(q).not.toContain("lastLatency");
  });
});
