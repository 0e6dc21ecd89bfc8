/** Style-mixing panel model: crossover slider over generator layers.
 *
 * Layers before the aggregation index control geometry; layers at or
 * after it control appearance only. The service's /health reports both
 * the layer count and the aggregation index.
 */

export interface LayerInfo {
  styleLayers: number;
  aggregationLayer: number;
}

export interface CrossoverPosition {
  index: number;
  /** true when the requested index had to be clamped into range */
  clamped: boolean;
  label: "geometry (pre-aggregation)" | "appearance (post-aggregation)";
}

export function crossoverPosition(requested: number,
                                  info: LayerInfo): CrossoverPosition {
  const index = Math.min(info.styleLayers, Math.max(0, Math.round(requested)));
  return {
    index,
    clamped: index !== requested,
    label: index < info.aggregationLayer
      ? "geometry (pre-aggregation)"
      : "appearance (post-aggregation)",
  };
}

/** Crossover at the top of the range injects nothing from seed B. */
export function isPureSeedA(index: number, info: LayerInfo): boolean {
  return index >= info.styleLayers;
}

/** Crossover 0 takes every layer from seed B. */
export function isPureSeedB(index: number): boolean {
  return index <= 0;
}
