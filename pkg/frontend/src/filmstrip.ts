import { SweepFrame } from './types.js';

export interface FilmstripFrame {
  value: number;
  image: string;
  caption: string;
}

/** Captions come straight from the server's per-frame values. */
export function buildFilmstrip(frames: SweepFrame[]): FilmstripFrame[] {
  return frames.map((frame) => ({
    value: frame.value,
    image: frame.image,
    caption: formatValue(frame.value),
  }));
}

/** Shortest round-trip decimal, matching the wire (JSON float) representation.

Non-integral doubles already print identically in both runtimes; integral
floats need the trailing ".0" the service emits. */
export function formatValue(value: number): string {
  if (Number.isInteger(value) && Number.isFinite(value) && Math.abs(value) < 1e16) {
    return value.toFixed(1);
  }
  return String(value);
}

/** The arithmetic progression the server promises for a sweep. */
export function expectedProgression(from: number, to: number, frames: number): number[] {
  if (frames < 2) {
    throw new Error('a sweep needs at least 2 frames');
  }
  const out: number[] = [];
  for (let i = 0; i < frames; i++) {
    out.push(from + ((to - from) * i) / (frames - 1));
  }
  return out;
}
