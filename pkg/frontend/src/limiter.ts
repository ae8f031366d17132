/** Command rate limiting: pointer events arrive at device rate (often 120+
 *  per second) but at most `maxHz` messages may reach the wire. The latest
 *  value always wins; a trailing flush makes sure the final pose lands.
 */

export class RateLimiter {
  private lastMs = -Infinity;

  constructor(readonly maxHz: number) {}

  allow(nowMs: number): boolean {
    if (nowMs - this.lastMs >= 1000 / this.maxHz - 1e-9) {
      this.lastMs = nowMs;
      return true;
    }
    return false;
  }
}

/** Latest-wins outbox: push() any number of times, the limiter decides when
 *  the pending value is handed to `send`. poll() drives trailing flushes. */
export class CommandOutbox<T> {
  private pending: T | null = null;
  private limiter: RateLimiter;
  sent = 0;

  constructor(maxHz: number, private send: (value: T) => void) {
    this.limiter = new RateLimiter(maxHz);
  }

  push(value: T, nowMs: number): void {
    this.pending = value;
    this.poll(nowMs);
  }

  poll(nowMs: number): void {
    if (this.pending !== null && this.limiter.allow(nowMs)) {
      const v = this.pending;
      this.pending = null;
      this.sent += 1;
      this.send(v);
    }
  }
}
