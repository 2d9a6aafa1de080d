// Annotation jobs are asynchronous on the backend; the UI polls at a fixed
// interval (the API intentionally has no push channel).

import { ApiClient } from "./api";
import type { ViewStore } from "./state";
import type { Job } from "./types";

export const POLL_INTERVAL_MS = 500;

export class JobPoller {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private api: ApiClient,
    private store: ViewStore,
    private onJobDone: (job: Job) => void,
    private intervalMs: number = POLL_INTERVAL_MS,
  ) {}

  track(jobId: string): void {
    this.store.jobStarted(jobId);
    if (this.timer === null) {
      this.timer = setInterval(() => void this.pollOnce(), this.intervalMs);
    }
  }

  async pollOnce(): Promise<void> {
    const pending = this.store.current.pendingJobs;
    for (const jobId of pending) {
      let job: Job;
      try {
        job = await this.api.getJob(jobId);
      } catch {
        continue; // transient fetch failure: retry on the next tick
      }
      if (job.state === "pending") continue;
      this.store.jobFinished(jobId);
      this.onJobDone(job);
    }
    if (this.store.current.pendingJobs.length === 0 && this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
