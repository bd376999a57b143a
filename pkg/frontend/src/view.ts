import { SessionEntry } from './gallery.js';
import { FilmstripFrame } from './filmstrip.js';
import { SliderBinding, widgetKind } from './sliders.js';
import { ApiErrorDetail } from './types.js';

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function renderSliderRow(binding: SliderBinding): string {
  const kind = widgetKind(binding);
  const dial = kind === 'dial' ? ' dial' : '';
  return `
<div class="control-row${dial}" data-attribute="${escapeHtml(binding.attribute)}" data-widget="${kind}">
  <label>${escapeHtml(binding.attribute)}${kind === 'dial' ? ' ↺' : ''}</label>
  <input type="range" min="${binding.min}" max="${binding.max}" step="${binding.step}"
         value="${binding.value}" data-attribute="${escapeHtml(binding.attribute)}" />
  <output>${binding.value}</output>
</div>`;
}

export function renderSliders(bindings: SliderBinding[]): string {
  if (bindings.length === 0) {
    return renderEmptyState();
  }
  return bindings.map(renderSliderRow).join('\n');
}

export function renderEmptyState(): string {
  return `
<div class="empty-state">
  <p>The loaded checkpoint declares no continuous attributes.</p>
  <p>Train a model with attribute slots to get sliders here; prompt-only generation still works below.</p>
</div>`;
}

export function renderBanner(message: string): string {
  return `
<div class="banner error" role="alert">
  <span>${escapeHtml(message)}</span>
  <button type="button" data-action="retry">Retry</button>
</div>`;
}

/** Inline field error; names the attribute and its bounds when known. */
export function renderInlineError(detail: ApiErrorDetail): string {
  let text = detail.message;
  if (detail.attribute !== undefined && detail.min !== undefined && detail.max !== undefined) {
    text = `${detail.attribute}: ${detail.message} (allowed range ${detail.min} to ${detail.max})`;
  } else if (detail.position !== undefined) {
    text = `${detail.message} at position ${detail.position}`;
  }
  return `<div class="inline-error"${detail.attribute ? ` data-attribute="${escapeHtml(detail.attribute)}"` : ''}>${escapeHtml(text)}</div>`;
}

export function renderGalleryEntry(entry: SessionEntry, index: number): string {
  const attrs = Object.entries(entry.request.attributes)
    .map(([k, v]) => `${escapeHtml(k)}=${v}`)
    .join(' ');
  return `
<figure class="gallery-entry" data-index="${index}">
  <img src="data:image/png;base64,${entry.image}" alt="generated image" />
  <figcaption>
    <code>${escapeHtml(entry.request.template)}</code>
    <span>${attrs}</span>
    <span>seed ${entry.request.seed}</span>
  </figcaption>
</figure>`;
}

export function renderGallery(entries: SessionEntry[]): string {
  return entries.map((entry, i) => renderGalleryEntry(entry, i)).join('\n');
}

export function renderFilmstrip(frames: FilmstripFrame[]): string {
  return frames
    .map(
      (frame, i) => `
<figure class="film-frame" data-index="${i}" data-value="${frame.value}">
  <img src="data:image/png;base64,${frame.image}" alt="sweep frame" />
  <figcaption>${escapeHtml(frame.caption)}</figcaption>
</figure>`,
    )
    .join('\n');
}
