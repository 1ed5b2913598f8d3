// Auto-sync: run reconciliation after a quiet period (1000 ms by default).
// A lone solution is applied automatically; several open the menu. Later
// edits supersede pending timers and in-flight requests.

export interface AutoSyncCallbacks {
  reconcile(): Promise<void>;
}

export class AutoSyncTimer {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private generation = 0;
  private inFlight = false;

  constructor(
    private callbacks: AutoSyncCallbacks,
    public delayMs: number = 1000,
  ) {}

  /** Call on every output edit while auto-sync is enabled. */
  poke(): void {
    this.cancel();
    const gen = ++this.generation;
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.fire(gen);
    }, this.delayMs);
  }

  private async fire(gen: number): Promise<void> {
    if (gen !== this.generation || this.inFlight) return;
    this.inFlight = true;
    try {
      await this.callbacks.reconcile();
    } finally {
      this.inFlight = false;
    }
  }

  /** Call when auto-sync is toggled off or an edit invalidates a pending run. */
  cancel(): void {
    this.generation++;
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  get pending(): boolean {
    return this.timer !== null;
  }
}
