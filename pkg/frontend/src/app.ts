/** Browser wiring: DOM events in, frames out. All imagery comes from
 * the service; this file only routes state. */

import { stateFromQuery, stateToQuery, ViewerState } from "./state.js";
import { applyDrag, applyScroll, defaultLimits, PoseThrottle } from "./orbit.js";
import { crossoverPosition, LayerInfo } from "./mixing.js";
import { requestFromState, HealthInfo, PoseJson, SeedLatents } from "./protocol.js";
import { FrameStream } from "./stream.js";
import { LatencyReadout } from "./latency.js";

const FRAME_CADENCE_MS = 100;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export async function startViewer(): Promise<void> {
  const img = el<HTMLImageElement>("frame");
  const latencyLabel = el<HTMLElement>("latency");
  const statusLabel = el<HTMLElement>("status");
  const seedA = el<HTMLInputElement>("seed-a");
  const seedB = el<HTMLInputElement>("seed-b");
  const crossover = el<HTMLInputElement>("crossover");
  const crossoverLabel = el<HTMLElement>("crossover-label");
  const interp = el<HTMLInputElement>("interp");
  const resolutionSel = el<HTMLSelectElement>("resolution");

  const health: HealthInfo = await (await fetch("/health")).json();
  const layers: LayerInfo = {
    styleLayers: health.style_layers,
    aggregationLayer: health.aggregation_layer,
  };

  let state: ViewerState = stateFromQuery(location.search.slice(1));
  state.connection = "connecting";

  // resolution choices come from the checkpoint's supported chain
  resolutionSel.innerHTML = "";
  for (const res of health.resolutions) {
    const opt = document.createElement("option");
    opt.value = String(res);
    opt.textContent = `${res} x ${res}`;
    resolutionSel.appendChild(opt);
  }

  crossover.max = String(layers.styleLayers);
  const limits = defaultLimits();
  const throttle = new PoseThrottle<PoseJson>(FRAME_CADENCE_MS);
  const latency = new LatencyReadout();

  const scheme = location.protocol === "https:" ? "wss" : "ws";
  const stream = new FrameStream(`${scheme}://${location.host}/stream`, {
    socketFactory: (url) => new WebSocket(url) as never,
  });

  stream.onStatus = (s) => {
    state.connection = s;
    statusLabel.textContent = s;
  };
  stream.onFrame = (frame) => {
    img.src = `data:image/${frame.format};base64,${frame.image_b64}`;
    latency.update(frame.millis);
    state.lastLatencyMs = frame.millis;
    latencyLabel.textContent = latency.text();
  };

  function syncControls(): void {
    seedA.value = String(state.seedA);
    seedB.value = String(state.seedB);
    crossover.value = String(state.crossover);
    interp.value = String(state.interp);
    resolutionSel.value = String(state.resolution);
    const pos = crossoverPosition(state.crossover, layers);
    crossoverLabel.textContent = `${pos.index}: ${pos.label}`;
    crossoverLabel.classList.toggle("clamped", pos.clamped);
  }

  // latent vectors for the interpolation scrubber, keyed by the seed
  // pair they were sampled for so stale fetches are ignored
  let latents: SeedLatents | undefined;
  let latentsKey = "";
  async function refreshLatents(): Promise<void> {
    const key = `${state.seedA}:${state.seedB}`;
    if (key === latentsKey) return;
    const [a, b] = await Promise.all([state.seedA, state.seedB].map(
      async (seed) => {
        const resp = await fetch(`/styles/sample?seed=${seed}`);
        return (await resp.json()).w as number[];
      }));
    if (`${state.seedA}:${state.seedB}` !== key) return;
    latents = { wA: a, wB: b };
    latentsKey = key;
    push();
  }

  function push(): void {
    history.replaceState(null, "", `?${stateToQuery(state)}`);
    stream.request(requestFromState(state, layers.styleLayers, latents));
    if (state.interp > 0) void refreshLatents();
  }

  // -- orbit: drag for yaw/pitch, scroll for FOV -------------------------
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  img.addEventListener("pointerdown", (ev) => {
    dragging = true;
    lastX = ev.clientX;
    lastY = ev.clientY;
    img.setPointerCapture(ev.pointerId);
  });
  img.addEventListener("pointerup", () => { dragging = false; });
  img.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    const next = applyDrag(state, ev.clientX - lastX, ev.clientY - lastY,
                           limits);
    lastX = ev.clientX;
    lastY = ev.clientY;
    state.theta = next.theta;
    state.phi = next.phi;
    throttle.feed({ theta: state.theta, phi: state.phi,
                    radius: state.radius, fov: state.fov });
  });
  img.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    state.fov = applyScroll(state.fov, ev.deltaY / 100, limits);
    throttle.feed({ theta: state.theta, phi: state.phi,
                    radius: state.radius, fov: state.fov });
  });
  setInterval(() => {
    if (throttle.take() !== null) push();
  }, FRAME_CADENCE_MS / 2);

  // -- panels ------------------------------------------------------------
  const onControl = (): void => {
    state.seedA = Number(seedA.value);
    state.seedB = Number(seedB.value);
    state.crossover = crossoverPosition(Number(crossover.value), layers).index;
    state.interp = Number(interp.value);
    state.resolution = Number(resolutionSel.value);
    syncControls();
    push();
  };
  for (const node of [seedA, seedB, crossover, interp, resolutionSel]) {
    node.addEventListener("input", onControl);
  }

  syncControls();
  push();
}

if (typeof document !== "undefined" && document.getElementById("frame")) {
  startViewer().catch((err) => {
    console.error("viewer failed to start", err);
  });
}
