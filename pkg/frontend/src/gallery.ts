import { GenerateRequest } from './types.js';

/** A generated image plus the exact request snapshot that produced it. */
export interface SessionEntry {
  request: GenerateRequest;
  image: string;
  timestamp: number;
}

export const GALLERY_CAP = 200;

/** In-memory session log with FIFO eviction at the cap. */
export class SessionGallery {
  private items: SessionEntry[] = [];

  constructor(private readonly cap: number = GALLERY_CAP) {}

  add(entry: SessionEntry): void {
    this.items.push(entry);
    while (this.items.length > this.cap) {
      this.items.shift();
    }
  }

  get entries(): readonly SessionEntry[] {
    return this.items;
  }

  get size(): number {
    return this.items.length;
  }

  newestFirst(): SessionEntry[] {
    return [...this.items].reverse();
  }

  clear(): void {
    this.items = [];
  }
}
