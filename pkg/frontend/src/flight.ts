/** Single-flight task runner with latest-only coalescing.

At most one task runs at a time; tasks submitted while one is in flight
replace each other so only the newest runs afterwards. Slider scrubbing
therefore never queues a backlog of stale requests. */
export class CoalescingRunner {
  private inFlight = false;
  private pending: (() => Promise<void>) | null = null;
  lastError: unknown = null;

  submit(task: () => Promise<void>): void {
    if (this.inFlight) {
      this.pending = task;
      return;
    }
    void this.run(task);
  }

  get busy(): boolean {
    return this.inFlight;
  }

  private async run(task: () => Promise<void>): Promise<void> {
    this.inFlight = true;
    try {
      await task();
      this.lastError = null;
    } catch (err) {
      // Tasks are expected to handle their own errors; keep the runner alive.
      this.lastError = err;
    } finally {
      this.inFlight = false;
      const next = this.pending;
      this.pending = null;
      if (next) {
        void this.run(next);
      }
    }
  }
}

/** Trailing-edge debounce; the studio fires generation 250 ms after release. */
export const DEBOUNCE_MS = 250;

export function debounce<A extends unknown[]>(
  fn: (...args: A) => void,
  waitMs: number = DEBOUNCE_MS,
): (...args: A) => void {
  let timer: ReturnType<typeof setTimeout> | null = null;
  return (...args: A) => {
    if (timer !== null) {
      clearTimeout(timer);
    }
    timer = setTimeout(() => {
      timer = null;
      fn(...args);
    }, waitMs);
  };
}
