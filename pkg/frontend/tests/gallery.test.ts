import { describe, expect, it } from 'vitest';

import { GALLERY_CAP, SessionGallery, SessionEntry } from '../src/gallery.js';
import { GenerateRequest } from '../src/types.js';

function entry(seed: number): SessionEntry {
  const request: GenerateRequest = {
    template: 'a <attr:pose> photo of <obj>',
    attributes: { pose: 0.5 },
    seed,
    steps: 25,
    guidance_scale: 2.0,
    negative_mode: 'null_text',
  };
  return { request, image: `img-${seed}`, timestamp: seed };
}

describe('SessionGallery', () => {
  it('keeps every image traceable to its request snapshot', () => {
    const gallery = new SessionGallery();
    gallery.add(entry(1));
    gallery.add(entry(2));
    expect(gallery.entries[0]!.request.seed).toBe(1);
    expect(gallery.entries[1]!.image).toBe('img-2');
  });

  it('caps at 200 entries with FIFO eviction', () => {
    const gallery = new SessionGallery();
    for (let i = 0; i < GALLERY_CAP + 25; i++) {
      gallery.add(entry(i));
    }
    expect(gallery.size).toBe(200);
    expect(gallery.entries[0]!.request.seed).toBe(25); // oldest 25 evicted
    expect(gallery.entries[199]!.request.seed).toBe(224);
  });

  it('newestFirst reverses without mutating', () => {
    const gallery = new SessionGallery();
    gallery.add(entry(1));
    gallery.add(entry(2));
    expect(gallery.newestFirst().map((e) => e.request.seed)).toEqual([2, 1]);
    expect(gallery.entries.map((e) => e.request.seed)).toEqual([1, 2]);
  });
});
