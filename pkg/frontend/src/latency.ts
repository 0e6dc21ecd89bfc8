/** Latency readout: the service-reported render time per frame.
 *
 * Interactive rates are the point of the approximated render path, so
 * the number stays first-class in the UI. The value shown is the
 * service's own measurement (X-Render-Millis header over HTTP, the
 * `millis` field over WS), not a client-side clock, so it excludes
 * network time and matches the service to the digit.
 */

export class LatencyReadout {
  private last: number | null = null;
  private smoothed: number | null = null;

  constructor(private smoothing = 0.3) {}

  update(serviceMillis: number): void {
    this.last = serviceMillis;
    this.smoothed = this.smoothed === null
      ? serviceMillis
      : this.smoothing * serviceMillis + (1 - this.smoothing) * this.smoothed;
  }

  lastMillis(): number | null {
    return this.last;
  }

  smoothedMillis(): number | null {
    return this.smoothed;
  }

  text(): string {
    return this.last === null ? "-- ms" : `${this.last.toFixed(1)} ms`;
  }
}
