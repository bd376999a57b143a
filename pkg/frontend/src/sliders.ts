import { AttributeInfo } from './types.js';

/** One slider bound to a registered attribute. */
export interface SliderBinding {
  attribute: string;
  min: number;
  max: number;
  periodic: boolean;
  value: number;
  step: number;
}

/** Widget kind: periodic attributes render as wrap-around dials. */
export function widgetKind(binding: SliderBinding): 'dial' | 'slider' {
  return binding.periodic ? 'dial' : 'slider';
}

/** Build bindings from the registry; values start at the domain midpoint. */
export function buildBindings(attributes: AttributeInfo[]): SliderBinding[] {
  return attributes.map((attr) => ({
    attribute: attr.name,
    min: attr.min,
    max: attr.max,
    periodic: attr.periodic,
    value: defaultValue(attr),
    step: stepResolution(attr),
  }));
}

export function defaultValue(attr: AttributeInfo): number {
  return attr.min + (attr.max - attr.min) / 2;
}

/** Fine enough to move between neighboring training-grid values. */
export function stepResolution(attr: AttributeInfo): number {
  const cells = Math.max(attr.grid_size - 1, 1);
  return (attr.max - attr.min) / (cells * 8);
}

/** Clamp into the domain; periodic values wrap instead of clamping. */
export function clampValue(binding: SliderBinding, value: number): number {
  const span = binding.max - binding.min;
  if (binding.periodic) {
    const wrapped = (((value - binding.min) % span) + span) % span;
    return binding.min + wrapped;
  }
  return Math.min(binding.max, Math.max(binding.min, value));
}

/** Set a binding's value (immutably), never leaving the domain. */
export function withValue(binding: SliderBinding, value: number): SliderBinding {
  return { ...binding, value: clampValue(binding, value) };
}

/** Request payload: slider positions map to values exactly, no rounding. */
export function payloadAttributes(bindings: SliderBinding[]): Record<string, number> {
  const out: Record<string, number> = {};
  for (const b of bindings) {
    out[b.attribute] = b.value;
  }
  return out;
}
