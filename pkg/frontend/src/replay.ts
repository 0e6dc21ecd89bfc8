/** Scripted orbit replay: drive a fixed pose script through any frame
 * source and collect the frame-hash sequence. Used to verify that the
 * WS stream serves exactly what direct render calls produce.
 */

import { fnv1a64 } from "./hash.js";
import type { RenderRequestJson, PoseJson } from "./protocol.js";

export interface FrameSource {
  render(req: RenderRequestJson): Promise<Uint8Array>;
}

/** A deterministic n-step orbit: evenly spaced yaw, fixed pitch. */
export function orbitScript(
    steps: number,
    base: PoseJson = { theta: 0, phi: 0.1, radius: 1.0, fov: 12 },
): PoseJson[] {
  const poses: PoseJson[] = [];
  for (let i = 0; i < steps; i++) {
    poses.push({ ...base, theta: -Math.PI + (2 * Math.PI * i) / steps });
  }
  return poses;
}

export async function replayHashes(source: FrameSource, poses: PoseJson[],
                                   seed: number,
                                   resolution: number): Promise<string[]> {
  const hashes: string[] = [];
  for (const pose of poses) {
    const bytes = await source.render({ pose, seed, resolution });
    hashes.push(fnv1a64(bytes));
  }
  return hashes;
}
