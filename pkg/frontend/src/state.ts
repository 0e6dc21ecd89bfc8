/** Viewer state and its lossless URL round-trip.
 *
 * Only the shareable part of the state goes in the URL: pose, seeds,
 * mixing crossover, interpolation position, resolution. Connection
 * status and the latency readout are runtime-only.
 */

export type ConnectionStatus = "connecting" | "ready" | "reconnecting" | "closed";

export interface ViewerState {
  theta: number;
  phi: number;
  radius: number;
  fov: number;
  seedA: number;
  seedB: number;
  /** style-mixing crossover layer index */
  crossover: number;
  /** interpolation position between seed A and seed B, in [0, 1] */
  interp: number;
  resolution: number;
  connection: ConnectionStatus;
  lastLatencyMs: number | null;
}

export function defaultState(): ViewerState {
  return {
    theta: 0,
    phi: 0,
    radius: 1,
    fov: 12,
    seedA: 0,
    seedB: 1,
    crossover: 0,
    interp: 0,
    resolution: 64,
    connection: "connecting",
    lastLatencyMs: null,
  };
}

/** Fields that are shared via the URL, in a fixed order. */
const URL_FIELDS = [
  "theta", "phi", "radius", "fov",
  "seedA", "seedB", "crossover", "interp", "resolution",
] as const;

type UrlField = (typeof URL_FIELDS)[number];

/** Serialize the shareable state to a query string.
 *
 * Numbers go through String(), which JavaScript guarantees to be
 * re-parseable to the exact same double, so the round-trip is lossless.
 */
export function stateToQuery(state: ViewerState): string {
  const params = new URLSearchParams();
  for (const field of URL_FIELDS) {
    params.set(field, String(state[field]));
  }
  return params.toString();
}

/** Rebuild state from a query string; missing or malformed fields fall
 * back to the provided base (default state if omitted). */
export function stateFromQuery(query: string, base?: ViewerState): ViewerState {
  const state = { ...(base ?? defaultState()) };
  const params = new URLSearchParams(query);
  for (const field of URL_FIELDS) {
    const raw = params.get(field);
    if (raw === null) continue;
    const value = Number(raw);
    if (Number.isFinite(value)) {
      state[field as UrlField] = value;
    }
  }
  return state;
}
