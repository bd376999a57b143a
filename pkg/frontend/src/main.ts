import { StudioClient } from './api.js';
import { CoalescingRunner, debounce } from './flight.js';
import { buildFilmstrip } from './filmstrip.js';
import { GALLERY_CAP, SessionGallery } from './gallery.js';
import { buildBindings, payloadAttributes, SliderBinding, withValue } from './sliders.js';
import { ApiError, GenerateRequest, NegativeMode } from './types.js';
import {
  renderBanner,
  renderFilmstrip,
  renderGallery,
  renderInlineError,
  renderSliders,
} from './view.js';

const serviceUrl =
  new URLSearchParams(window.location.search).get('service') ?? 'http://127.0.0.1:8000';

const client = new StudioClient(serviceUrl);
const gallery = new SessionGallery(GALLERY_CAP);
const runner = new CoalescingRunner();

let bindings: SliderBinding[] = [];

const el = {
  banner: byId('banner'),
  sliders: byId('sliders'),
  template: byId('template') as HTMLInputElement,
  seed: byId('seed') as HTMLInputElement,
  seedLock: byId('seed-lock') as HTMLInputElement,
  steps: byId('steps') as HTMLInputElement,
  scale: byId('scale') as HTMLInputElement,
  negativeMode: byId('negative-mode') as HTMLSelectElement,
  generate: byId('generate') as HTMLButtonElement,
  inlineErrors: byId('inline-errors'),
  preview: byId('preview'),
  gallery: byId('gallery'),
  sweepAttr: byId('sweep-attr') as HTMLSelectElement,
  sweepFrom: byId('sweep-from') as HTMLInputElement,
  sweepTo: byId('sweep-to') as HTMLInputElement,
  sweepFrames: byId('sweep-frames') as HTMLInputElement,
  sweepRun: byId('sweep-run') as HTMLButtonElement,
  filmstrip: byId('filmstrip'),
};

function byId(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function currentRequest(): GenerateRequest {
  return {
    template: el.template.value,
    attributes: payloadAttributes(bindings),
    seed: Number(el.seed.value),
    steps: Number(el.steps.value),
    guidance_scale: Number(el.scale.value),
    negative_mode: el.negativeMode.value as NegativeMode,
  };
}

function rollSeedIfUnlocked(): void {
  if (!el.seedLock.checked) {
    el.seed.value = String(Math.floor(Math.random() * 2 ** 31));
  }
}

function showError(err: unknown): void {
  if (err instanceof ApiError) {
    el.inlineErrors.innerHTML = renderInlineError(err.detail);
    return;
  }
  el.banner.innerHTML = renderBanner(`Service unreachable at ${serviceUrl}`);
}

function clearErrors(): void {
  el.inlineErrors.innerHTML = '';
  el.banner.innerHTML = '';
}

function scheduleGenerate(): void {
  runner.submit(async () => {
    clearErrors();
    rollSeedIfUnlocked();
    const request = currentRequest();
    try {
      const resp = await client.generate(request);
      gallery.add({ request, image: resp.image, timestamp: Date.now() });
      el.preview.innerHTML = `<img src="data:image/png;base64,${resp.image}" alt="latest" />`;
      el.gallery.innerHTML = renderGallery(gallery.newestFirst());
    } catch (err) {
      showError(err);
    }
  });
}

const generateOnRelease = debounce(scheduleGenerate);

function wireSliders(): void {
  el.sliders.innerHTML = renderSliders(bindings);
  el.sliders.querySelectorAll<HTMLInputElement>('input[type="range"]').forEach((input) => {
    input.addEventListener('input', () => {
      const name = input.dataset.attribute ?? '';
      bindings = bindings.map((b) => (b.attribute === name ? withValue(b, Number(input.value)) : b));
      const row = input.closest('.control-row');
      const output = row?.querySelector('output');
      if (output) output.textContent = input.value;
    });
    input.addEventListener('change', () => generateOnRelease());
  });
}

async function loadAttributes(): Promise<void> {
  clearErrors();
  try {
    const attrs = await client.getAttributes();
    bindings = buildBindings(attrs);
    wireSliders();
    el.sweepAttr.innerHTML = attrs
      .map((a) => `<option value="${a.name}">${a.name}</option>`)
      .join('');
    const first = attrs[0];
    if (first) {
      el.sweepFrom.value = String(first.min);
      el.sweepTo.value = String(first.max);
    }
  } catch (err) {
    el.banner.innerHTML = renderBanner(`Cannot load attributes from ${serviceUrl}`);
    el.banner.querySelector('[data-action="retry"]')?.addEventListener('click', () => {
      void loadAttributes();
    });
  }
}

function runSweep(): void {
  runner.submit(async () => {
    clearErrors();
    const base = currentRequest();
    try {
      const resp = await client.sweep({
        ...base,
        sweep_attribute: el.sweepAttr.value,
        from: Number(el.sweepFrom.value),
        to: Number(el.sweepTo.value),
        frames: Number(el.sweepFrames.value),
      });
      const frames = buildFilmstrip(resp.frames);
      el.filmstrip.innerHTML = renderFilmstrip(frames);
      el.filmstrip.querySelectorAll<HTMLElement>('.film-frame').forEach((node) => {
        node.addEventListener('click', () => {
          const value = Number(node.dataset.value);
          const name = el.sweepAttr.value;
          bindings = bindings.map((b) => (b.attribute === name ? withValue(b, value) : b));
          wireSliders();
          generateOnRelease();
        });
      });
    } catch (err) {
      showError(err);
    }
  });
}

el.generate.addEventListener('click', () => scheduleGenerate());
el.sweepRun.addEventListener('click', () => runSweep());
void loadAttributes();
