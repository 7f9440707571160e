// DOM wiring. Everything interesting happens in the view model; this
// file just paints it at 20 Hz and forwards operator input.

import { ConsoleClient } from "./client.js";
import { drawChart, Series } from "./chart.js";
import { NUM_CHANNELS, NUM_FE } from "./protocol.js";
import { ConsoleViewModel, TRACE_CAPACITY } from "./viewmodel.js";

const CHANNEL_NAMES = ["index", "middle", "ring", "little", "thumb", "thumb abd"];
const PALETTE = ["#4fc3f7", "#81c784", "#ffb74d", "#e57373", "#ba68c8", "#90a4ae"];
const RENDER_MS = 50;

const $ = (id: string) => document.getElementById(id)!;

let client: ConsoleClient | null = null;
const vm = new ConsoleViewModel();

function connect(): void {
  client?.stop();
  const url = ($("url") as HTMLInputElement).value.trim();
  client = new ConsoleClient(url, vm, {
    socketFactory: (u) => new WebSocket(u),
  });
  vm.connection = "connecting";
  client.connect();
}

function buildChannelRows(): void {
  const rows = $("channels");
  for (let ch = 0; ch < NUM_CHANNELS; ch++) {
    const row = document.createElement("div");
    row.className = "channel";
    row.innerHTML = `
      <span class="name">${CHANNEL_NAMES[ch]}</span>
      <input type="range" id="slider-${ch}" min="0" max="1" step="0.01" value="0"
             title="arrow keys nudge when focused">
      <span class="val" id="sliderval-${ch}">0.00</span>
      ${ch < NUM_FE ? `
        <button id="block-${ch}" class="block">block</button>
        <span class="dot" id="contact-${ch}"></span>
        <span class="badge" id="gain-${ch}">contact</span>
        <span class="tau" id="tau-${ch}">0.0</span>` : ""}
    `;
    rows.appendChild(row);

    const slider = row.querySelector<HTMLInputElement>(`#slider-${ch}`)!;
    slider.addEventListener("input", () => {
      client?.send(vm.setSlider(ch, Number(slider.value)));
    });
    if (ch < NUM_FE) {
      row.querySelector<HTMLButtonElement>(`#block-${ch}`)!.addEventListener("click", () => {
        client?.send(vm.toggleBlock(ch));
      });
    }
  }
}

function render(): void {
  const now = Date.now();
  vm.pruneToasts(now);

  const status = $("status");
  status.textContent = vm.connection;
  status.className = `status ${vm.connection}`;
  $("role").textContent = vm.role;
  $("stale").style.display = vm.isStale(now) ? "block" : "none";

  if (vm.session) {
    $("session").textContent =
      `${vm.session.profile} / ${vm.session.scenario} — ${vm.session.session_id}`;
  }

  for (let ch = 0; ch < NUM_CHANNELS; ch++) {
    const slider = $(`slider-${ch}`) as HTMLInputElement;
    slider.disabled = !vm.canControl;
    if (document.activeElement !== slider) slider.value = String(vm.sliders[ch]);
    $(`sliderval-${ch}`).textContent = vm.sliders[ch].toFixed(2);
  }
  for (let ch = 0; ch < NUM_FE; ch++) {
    const blockBtn = $(`block-${ch}`) as HTMLButtonElement;
    blockBtn.disabled = !vm.canControl;
    blockBtn.textContent = vm.blocks[ch] === null ? "block" : `unblock @${vm.blocks[ch]}`;
    $(`contact-${ch}`).className = `dot ${vm.contact[ch] ? "on" : ""}`;
    const badge = $(`gain-${ch}`);
    badge.textContent = vm.gainMode[ch];
    badge.className = `badge ${vm.gainMode[ch]}`;
    $(`tau-${ch}`).textContent = (vm.tau[ch].last() ?? 0).toFixed(1);
  }

  const recBtn = $("rec-start") as HTMLButtonElement;
  const stopOk = $("rec-stop-ok") as HTMLButtonElement;
  const stopFail = $("rec-stop-fail") as HTMLButtonElement;
  recBtn.disabled = !vm.canControl || vm.recording;
  stopOk.disabled = stopFail.disabled = !vm.canControl || !vm.recording;
  $("rec-indicator").className = vm.recording ? "rec on" : "rec";

  const ranges = vm.session?.ranges ?? [];
  const qLo = Math.min(...ranges.map((r) => r.q_min), 0);
  const qHi = Math.max(...ranges.map((r) => r.q_max), 4096);
  const tauMax = vm.session?.params["tau_max"] ?? 1000;

  const qSeries: Series[] = [];
  for (let ch = 0; ch < NUM_CHANNELS; ch++) {
    qSeries.push({ points: vm.qOperator[ch].toArray(), color: PALETTE[ch] });
  }
  drawChart($("chart-q") as HTMLCanvasElement, qSeries, qLo, qHi, TRACE_CAPACITY);

  const uSeries: Series[] = [];
  const tauSeries: Series[] = [];
  for (let ch = 0; ch < NUM_FE; ch++) {
    uSeries.push({ points: vm.uActual[ch].toArray(), color: PALETTE[ch] });
    tauSeries.push({ points: vm.tau[ch].toArray(), color: PALETTE[ch] });
  }
  drawChart($("chart-u") as HTMLCanvasElement, uSeries, 0, 1, TRACE_CAPACITY);
  drawChart($("chart-tau") as HTMLCanvasElement, tauSeries, 0, tauMax, TRACE_CAPACITY);

  const list = $("episodes");
  if (list.childElementCount !== vm.episodes.length) {
    list.innerHTML = vm.episodes
      .map((p) => `<li>${p.split("/").pop()}</li>`)
      .join("");
  }

  const toasts = $("toasts");
  toasts.innerHTML = vm.toasts.map((t) => `<div class="toast">${t.text}</div>`).join("");
}

function init(): void {
  buildChannelRows();
  $("connect").addEventListener("click", connect);
  $("rec-start").addEventListener("click", () => {
    client?.send(vm.record(($("task") as HTMLInputElement).value));
  });
  $("rec-stop-ok").addEventListener("click", () => client?.send(vm.stopRecord(true)));
  $("rec-stop-fail").addEventListener("click", () => client?.send(vm.stopRecord(false)));
  connect();
  setInterval(render, RENDER_MS);
}

init();
