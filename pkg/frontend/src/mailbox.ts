/**
 * One-slot latest-value mailbox decoupling the network receiver from the
 * render loop: the renderer always reads the newest snapshot, never queues.
 */

export class Mailbox<T> {
  private slot: T | null = null;
  private dropped = 0;

  put(value: T): void {
    if (this.slot !== null) this.dropped += 1;
    this.slot = value;
  }

  /** Take the latest value, leaving the slot empty. */
  take(): T | null {
    const v = this.slot;
    this.slot = null;
    return v;
  }

  /** Read without consuming. */
  peek(): T | null {
    return this.slot;
  }

  get droppedCount(): number {
    return this.dropped;
  }
}
