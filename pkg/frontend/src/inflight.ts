/**
 * Keeps interactive controls to at most one server request at a time.
 *
 * A Debouncer delays the last call of a burst; LatestWins runs one async
 * task at a time and remembers only the newest task submitted while one is
 * in flight, so a slider drag ends on the final position and stale frames
 * are never rendered.
 */

export class Debouncer {
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(private readonly delayMs: number) {}

  schedule(fn: () => void): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      fn();
    }, this.delayMs);
  }

  cancel(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  get pending(): boolean {
    return this.timer !== null;
  }
}

export type Task = () => Promise<void>;

export class LatestWins {
  private running = false;
  private next: Task | null = null;

  get inFlight(): boolean {
    return this.running;
  }

  /** Run `task` now, or park it if one is already in flight; a parked task
   * is replaced by any newer submission instead of queueing up. */
  submit(task: Task): void {
    if (this.running) {
      this.next = task;
      return;
    }
    this.running = true;
    void this.drain(task);
  }

  private async drain(task: Task): Promise<void> {
    let current: Task | null = task;
    while (current !== null) {
      try {
        await current();
      } catch {
        // tasks surface their own errors; a rejection must not wedge the lane
      }
      current = this.next;
      this.next = null;
    }
    this.running = false;
  }
}
