import { describe, expect, it } from 'vitest';

import {
  buildBindings,
  clampValue,
  defaultValue,
  payloadAttributes,
  stepResolution,
  widgetKind,
  withValue,
} from '../src/sliders.js';
import { AttributeInfo } from '../src/types.js';

const POSE: AttributeInfo = { name: 'pose', min: 0, max: 1, periodic: false, grid_size: 18 };
const ANGLE: AttributeInfo = { name: 'angle', min: 0, max: 360, periodic: true, grid_size: 12 };

describe('buildBindings', () => {
  it('creates one binding per attribute with domain defaults', () => {
    const bindings = buildBindings([POSE, ANGLE]);
    expect(bindings).toHaveLength(2);
    expect(bindings[0]).toMatchObject({ attribute: 'pose', min: 0, max: 1, periodic: false });
    expect(bindings[0]!.value).toBe(defaultValue(POSE));
    expect(bindings[1]!.value).toBe(180);
  });

  it('step resolution subdivides grid cells', () => {
    expect(stepResolution(POSE)).toBeCloseTo(1 / (17 * 8), 12);
  });

  it('periodic attributes render as wrap-around dials', () => {
    const [pose, angle] = buildBindings([POSE, ANGLE]);
    expect(widgetKind(pose!)).toBe('slider');
    expect(widgetKind(angle!)).toBe('dial');
  });
});

describe('clamping and wrapping', () => {
  it('clamps non-periodic values to the domain', () => {
    const [pose] = buildBindings([POSE]);
    expect(clampValue(pose!, 1.5)).toBe(1);
    expect(clampValue(pose!, -0.2)).toBe(0);
    expect(clampValue(pose!, 0.37)).toBe(0.37);
  });

  it('wraps periodic values instead of clamping', () => {
    const [angle] = buildBindings([ANGLE]);
    expect(clampValue(angle!, 450)).toBe(90);
    expect(clampValue(angle!, -30)).toBe(330);
  });

  it('withValue never leaves the domain', () => {
    const [pose] = buildBindings([POSE]);
    expect(withValue(pose!, 99).value).toBe(1);
  });
});

describe('payloadAttributes', () => {
  it('maps slider positions to payload values exactly', () => {
    const bindings = buildBindings([POSE, ANGLE]);
    const moved = [withValue(bindings[0]!, 0.123456789), withValue(bindings[1]!, 271.25)];
    const payload = payloadAttributes(moved);
    expect(payload).toEqual({ pose: 0.123456789, angle: 271.25 });
    expect(payload.pose).toBe(moved[0]!.value);
    expect(payload.angle).toBe(moved[1]!.value);
  });
});
