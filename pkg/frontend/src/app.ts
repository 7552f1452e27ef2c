// Browser entry point: wires the connection, state store, renderers, and
// controls to the DOM. All synchrony math lives in the engine; this file
// only displays what arrives on the socket.

import { ChordPlayer } from "./chord.js";
import { EngineConnection } from "./connection.js";
import { SessionControls } from "./controls.js";
import { drawRing } from "./ring.js";
import { ConsoleState } from "./state.js";
import { CONDITIONS, type RingSpec } from "./types.js";

const NEUTRAL_RING: RingSpec = {
  base_radius: 0.8,
  wave_amplitude: 0,
  spike_count: 24,
  color: "orange",
};

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) {
    throw new Error(`missing element #${id}`);
  }
  return el as T;
}

function main(): void {
  const params = new URLSearchParams(location.search);
  const url = params.get("engine") ?? `ws://${location.hostname || "127.0.0.1"}:8787`;

  const state = new ConsoleState();
  const connection = new EngineConnection(url, (u) => new WebSocket(u));
  const controls = new SessionControls(connection, state);
  const player = new ChordPlayer();

  const ringCanvas = byId<HTMLCanvasElement>("ring");
  const traceCanvas = byId<HTMLCanvasElement>("trace");
  const statusEl = byId<HTMLSpanElement>("status");
  const bannerEl = byId<HTMLDivElement>("banner");
  const valueEl = byId<HTMLSpanElement>("value");
  const levelEl = byId<HTMLSpanElement>("level");
  const conditionEl = byId<HTMLSpanElement>("condition");
  const trialEl = byId<HTMLSpanElement>("trial");
  const hapticBadge = byId<HTMLDivElement>("haptic-badge");

  const conditionSelect = byId<HTMLSelectElement>("condition-select");
  for (const condition of CONDITIONS) {
    const option = document.createElement("option");
    option.value = condition;
    option.textContent = condition;
    conditionSelect.appendChild(option);
  }
  byId<HTMLButtonElement>("apply-condition").onclick = () =>
    controls.setCondition(conditionSelect.value);
  byId<HTMLButtonElement>("trial-start").onclick = () => controls.markTrial("start");
  byId<HTMLButtonElement>("trial-stop").onclick = () => controls.markTrial("stop");

  const soundToggle = byId<HTMLInputElement>("sound-toggle");
  soundToggle.onchange = () => {
    if (soundToggle.checked) {
      player.enable();
      if (player.unavailable) {
        state.banner = "audio unavailable: visual-only mode";
        soundToggle.checked = false;
      }
    } else {
      player.disable();
    }
  };

  const slider = byId<HTMLInputElement>("coupling");
  const sliderLabel = byId<HTMLSpanElement>("coupling-label");
  slider.oninput = () => {
    sliderLabel.textContent = Number(slider.value).toFixed(2);
  };
  slider.onchange = () => controls.setCoupling(Number(slider.value));

  connection.onStatus((connected) => {
    state.status = connected ? "connected" : "disconnected";
  });
  connection.onMessage((message) => {
    state.absorb(message);
    if (message.type === "update" && message.chord && !state.isStale()) {
      player.play(message.chord);
    }
  });
  connection.connect();

  let lastRing: RingSpec = NEUTRAL_RING;
  const started = performance.now();

  function drawTrace(): void {
    const ctx = traceCanvas.getContext("2d");
    if (!ctx) {
      return;
    }
    const { width, height } = traceCanvas;
    ctx.clearRect(0, 0, width, height);
    ctx.strokeStyle = "#888";
    ctx.strokeRect(0.5, 0.5, width - 1, height - 1);
    const values = state.traceValues();
    if (values.length < 2) {
      return;
    }
    ctx.beginPath();
    values.forEach((v, i) => {
      const x = (i / (values.length - 1)) * (width - 8) + 4;
      const y = height - 4 - Math.min(Math.max(v, 0), 1) * (height - 8);
      if (i === 0) {
        ctx.moveTo(x, y);
      } else {
        ctx.lineTo(x, y);
      }
    });
    ctx.strokeStyle = "#2a7";
    ctx.lineWidth = 2;
    ctx.stroke();
  }

  function frame(): void {
    const now = performance.now();
    const stale = state.isStale();
    const update = state.latest;

    statusEl.textContent = `${state.status}${stale ? " (stale)" : ""}`;
    statusEl.className = state.status === "connected" && !stale ? "ok" : "warn";
    bannerEl.textContent = state.banner ?? "";
    bannerEl.style.display = state.banner ? "block" : "none";

    if (update) {
      valueEl.textContent = update.valid
        ? `${update.value.toFixed(3)}${update.held ? " (held)" : ""}`
        : "invalid";
      levelEl.textContent = String(update.level);
      if (update.ring) {
        lastRing = update.ring;
      }
      if (update.haptic) {
        hapticBadge.style.display = "inline-block";
        hapticBadge.style.animationDuration = `${60 / update.haptic.bpm}s`;
        hapticBadge.textContent = `${update.haptic.bpm} BPM / ${update.haptic.intensity}%`;
      } else {
        hapticBadge.style.display = "none";
      }
    }
    conditionEl.textContent = controls.displayedCondition();
    trialEl.textContent = controls.trialOpen()
      ? `trial ${state.session?.trial_id ?? "?"} open`
      : "between trials";

    const ctx = ringCanvas.getContext("2d");
    if (ctx) {
      drawRing(ctx, lastRing, (now - started) / 1000, ringCanvas.width, ringCanvas.height, stale);
    }
    drawTrace();
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

main();
