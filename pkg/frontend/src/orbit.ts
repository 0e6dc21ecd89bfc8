/** Orbit camera control: drag maps to yaw/pitch deltas, scroll to FOV. */

export interface OrbitLimits {
  /** radians of yaw per pixel of horizontal drag */
  dragScale: number;
  /** pitch support declared by the service (symmetric, radians) */
  pitchMax: number;
  fovMin: number;
  fovMax: number;
  /** degrees of FOV per scroll-wheel line */
  scrollScale: number;
}

export function defaultLimits(): OrbitLimits {
  return {
    dragScale: 0.005,
    pitchMax: 0.5,
    fovMin: 6,
    fovMax: 60,
    scrollScale: 0.5,
  };
}

/** Wrap an angle into (-pi, pi]; a full-turn drag lands exactly back. */
export function canonicalAngle(angle: number): number {
  const tau = 2 * Math.PI;
  let a = angle % tau;
  if (a <= -Math.PI) a += tau;
  if (a > Math.PI) a -= tau;
  // normalize the negative-zero that % can produce
  return a === 0 ? 0 : a;
}

export function applyDrag(
  pose: { theta: number; phi: number },
  dxPixels: number,
  dyPixels: number,
  limits: OrbitLimits,
): { theta: number; phi: number } {
  const theta = canonicalAngle(pose.theta + dxPixels * limits.dragScale);
  const phi = Math.min(limits.pitchMax,
    Math.max(-limits.pitchMax, pose.phi + dyPixels * limits.dragScale));
  return { theta, phi };
}

export function applyScroll(fov: number, deltaLines: number,
                            limits: OrbitLimits): number {
  return Math.min(limits.fovMax,
    Math.max(limits.fovMin, fov + deltaLines * limits.scrollScale));
}

/** Coalesce rapid pose updates down to the service's frame cadence.
 *
 * feed() absorbs every input event; take() returns the newest pending
 * pose if the cadence allows sending, else null. Nothing pending means
 * nothing is ever sent (idle quiescence).
 */
export class PoseThrottle<T> {
  private pending: T | null = null;
  private lastSent = -Infinity;

  constructor(private cadenceMs: number,
              private now: () => number = () => Date.now()) {}

  feed(pose: T): void {
    this.pending = pose;
  }

  take(): T | null {
    if (this.pending === null) return null;
    const t = this.now();
    if (t - this.lastSent < this.cadenceMs) return null;
    this.lastSent = t;
    const out = this.pending;
    this.pending = null;
    return out;
  }

  hasPending(): boolean {
    return this.pending !== null;
  }
}
