/** The service's HTTP/WS wire types and request construction. */

import type { ViewerState } from "./state.js";

export interface PoseJson {
  theta: number;
  phi: number;
  radius: number;
  fov: number;
}

export interface MixingJson {
  seed_b: number;
  crossover_layer: number;
}

export interface RenderRequestJson {
  pose: PoseJson;
  seed?: number;
  w?: number[];
  resolution: number;
  mixing?: MixingJson;
}

export interface StreamRequest extends RenderRequestJson {
  seq: number;
}

export interface StreamFrame {
  seq: number;
  millis: number;
  format: "png" | "jpeg";
  image_b64: string;
}

export interface HealthInfo {
  status: string;
  model: string;
  resolutions: number[];
  style_layers: number;
  aggregation_layer: number;
}

/** Build the render request the current viewer state asks for.
 *
 * The mixing spec is attached only when it changes the result: a
 * crossover at the top of the layer range is exactly seed A, so the
 * plain request is sent instead (and the service's own boundary
 * semantics make crossover 0 exactly seed B).
 */
export function requestFromState(state: ViewerState,
                                 styleLayers: number,
                                 latents?: SeedLatents): RenderRequestJson {
  const req: RenderRequestJson = {
    pose: {
      theta: state.theta,
      phi: state.phi,
      radius: state.radius,
      fov: state.fov,
    },
    seed: state.seedA,
    resolution: state.resolution,
  };
  if (state.interp > 0 && state.seedB !== state.seedA && latents) {
    delete req.seed;
    req.w = lerpVector(latents.wA, latents.wB, state.interp);
    return req;
  }
  if (state.crossover < styleLayers && state.seedB !== state.seedA) {
    req.mixing = { seed_b: state.seedB, crossover_layer: state.crossover };
  }
  return req;
}

/** Latent vectors for the two picked seeds, fetched from /styles/sample. */
export interface SeedLatents {
  wA: number[];
  wB: number[];
}

/** Linear interpolation between two equal-length vectors. */
export function lerpVector(a: number[], b: number[], t: number): number[] {
  if (a.length !== b.length) {
    throw new Error(`vector length mismatch: ${a.length} vs ${b.length}`);
  }
  return a.map((v, i) => v * (1 - t) + b[i] * t);
}
