// Fixed-capacity ring buffer for live trace data. Push is O(1); the
// oldest sample falls off once capacity is reached.

export class Ring<T> {
  private buf: T[];
  private head = 0; // next write slot
  private count = 0;

  constructor(readonly capacity: number) {
    if (capacity <= 0) throw new Error("ring capacity must be positive");
    this.buf = new Array<T>(capacity);
  }

  push(value: T): void {
    this.buf[this.head] = value;
    this.head = (this.head + 1) % this.capacity;
    if (this.count < this.capacity) this.count++;
  }

  get size(): number {
    return this.count;
  }

  last(): T | undefined {
    if (this.count === 0) return undefined;
    return this.buf[(this.head - 1 + this.capacity) % this.capacity];
  }

  // Oldest to newest.
  toArray(): T[] {
    const out: T[] = [];
    const start = (this.head - this.count + this.capacity) % this.capacity;
    for (let i = 0; i < this.count; i++) {
      out.push(this.buf[(start + i) % this.capacity]);
    }
    return out;
  }

  clear(): void {
    this.head = 0;
    this.count = 0;
  }
}
