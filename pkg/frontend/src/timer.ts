/** Active-time tracking for one editing session.
 *
 * Semantics match the service's interval arithmetic: seconds_active is the
 * sum of start/resume -> pause/stop intervals, and out-of-order events
 * (start while running, pause while idle) are ignored rather than rejected.
 * The tab pauses on blur and resumes on focus, so only time with the
 * document in front of the rater is counted.
 */

import { TimerKind } from "./types.js";

export type Clock = () => number; // epoch seconds

export const wallClock: Clock = () => Date.now() / 1000;

export class SessionTimer {
  readonly events: [number, TimerKind][] = [];
  private runningSince: number | null = null;
  private completed = 0;

  constructor(private readonly clock: Clock = wallClock) {}

  get running(): boolean {
    return this.runningSince !== null;
  }

  /** Returns true when the event changed state (and should be reported). */
  record(kind: TimerKind): boolean {
    const ts = this.clock();
    if (kind === "start" || kind === "resume") {
      if (this.runningSince !== null) return false;
      this.runningSince = ts;
    } else {
      if (this.runningSince === null) return false;
      this.completed += ts - this.runningSince;
      this.runningSince = null;
    }
    this.events.push([ts, kind]);
    return true;
  }

  start(): boolean {
    return this.record("start");
  }

  pause(): boolean {
    return this.record("pause");
  }

  resume(): boolean {
    return this.record("resume");
  }

  stop(): boolean {
    return this.record("stop");
  }

  /** Completed intervals plus the live tail when running. */
  secondsActive(): number {
    if (this.runningSince === null) return this.completed;
    return this.completed + (this.clock() - this.runningSince);
  }
}

export function formatSeconds(total: number): string {
  const s = Math.max(0, Math.floor(total));
  const m = Math.floor(s / 60);
  return `${m}:${String(s % 60).padStart(2, "0")}`;
}
