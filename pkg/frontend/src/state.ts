// Shared view state. Invariants enforced on every update: the visible
// window stays inside the session span, and the cursor stays inside the
// visible window after any seek.

export interface ViewState {
  sessionId: string | null;
  spanStartMs: number;
  spanEndMs: number;
  windowStartMs: number;
  windowEndMs: number;
  cursorMs: number;
  selectedPacketId: string | null;
  selectedAnnotationId: string | null;
  pendingJobs: string[];
}

export type Listener = (state: ViewState) => void;

const MIN_WINDOW_MS = 100;

export class ViewStore {
  private state: ViewState = {
    sessionId: null,
    spanStartMs: 0,
    spanEndMs: 0,
    windowStartMs: 0,
    windowEndMs: 0,
    cursorMs: 0,
    selectedPacketId: null,
    selectedAnnotationId: null,
    pendingJobs: [],
  };
  private listeners: Listener[] = [];

  get current(): ViewState {
    return { ...this.state, pendingJobs: [...this.state.pendingJobs] };
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    const snapshot = this.current;
    for (const listener of this.listeners) listener(snapshot);
  }

  openSession(sessionId: string, spanStartMs: number, spanEndMs: number): void {
    this.state.sessionId = sessionId;
    this.state.spanStartMs = spanStartMs;
    this.state.spanEndMs = spanEndMs;
    this.state.windowStartMs = spanStartMs;
    this.state.windowEndMs = spanEndMs;
    this.state.cursorMs = spanStartMs;
    this.state.selectedPacketId = null;
    this.state.selectedAnnotationId = null;
    this.emit();
  }

  private clampWindow(startMs: number, endMs: number): [number, number] {
    const span = this.state.spanEndMs - this.state.spanStartMs;
    let width = Math.max(MIN_WINDOW_MS, Math.min(endMs - startMs, span || MIN_WINDOW_MS));
    let start = Math.max(this.state.spanStartMs, startMs);
    if (start + width > this.state.spanEndMs) start = this.state.spanEndMs - width;
    if (start < this.state.spanStartMs) {
      start = this.state.spanStartMs;
      width = Math.min(width, this.state.spanEndMs - start);
    }
    return [start, start + width];
  }

  setWindow(startMs: number, endMs: number): void {
    [this.state.windowStartMs, this.state.windowEndMs] = this.clampWindow(startMs, endMs);
    this.state.cursorMs = Math.min(
      Math.max(this.state.cursorMs, this.state.windowStartMs),
      this.state.windowEndMs,
    );
    this.emit();
  }

  zoomBy(factor: number): void {
    const { windowStartMs, windowEndMs, cursorMs } = this.state;
    const width = (windowEndMs - windowStartMs) / factor;
    this.setWindow(cursorMs - width / 2, cursorMs + width / 2);
  }

  /** Seek: recenters the window around t if t is outside it, then clamps. */
  seek(tMs: number): void {
    const width = this.state.windowEndMs - this.state.windowStartMs;
    if (tMs < this.state.windowStartMs || tMs > this.state.windowEndMs) {
      [this.state.windowStartMs, this.state.windowEndMs] = this.clampWindow(
        tMs - width / 2,
        tMs + width / 2,
      );
    }
    this.state.cursorMs = Math.min(
      Math.max(tMs, this.state.windowStartMs),
      this.state.windowEndMs,
    );
    this.emit();
  }

  selectPacket(packetId: string | null): void {
    this.state.selectedPacketId = packetId;
    this.emit();
  }

  selectAnnotation(annotationId: string | null): void {
    this.state.selectedAnnotationId = annotationId;
    this.emit();
  }

  jobStarted(jobId: string): void {
    this.state.pendingJobs.push(jobId);
    this.emit();
  }

  jobFinished(jobId: string): void {
    this.state.pendingJobs = this.state.pendingJobs.filter((j) => j !== jobId);
    this.emit();
  }
}
