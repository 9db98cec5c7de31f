import { describe, expect, it } from "vitest";

import { SessionTimer, formatSeconds } from "../src/timer.js";

/** Clock that returns scripted instants, then keeps returning the last one. */
function scriptedClock(instants: number[]): () => number {
  let i = 0;
  return () => instants[Math.min(i++, instants.length - 1)]!;
}

describe("SessionTimer", () => {
  it("sums start to pause intervals", () => {
    const t = new SessionTimer(scriptedClock([100.0, 107.5]));
    expect(t.start()).toBe(true);
    expect(t.pause()).toBe(true);
    expect(t.secondsActive()).toBeCloseTo(7.5, 9);
  });

  it("accumulates across resume and stop", () => {
    const t = new SessionTimer(scriptedClock([100.0, 107.5, 110.0, 111.0]));
    t.start();
    t.pause();
    t.resume();
    t.stop();
    expect(t.secondsActive()).toBeCloseTo(8.5, 9);
    expect(t.events.map(([, k]) => k)).toEqual(["start", "pause", "resume", "stop"]);
  });

  it("ignores a start while already running", () => {
    const t = new SessionTimer(scriptedClock([100.0, 101.0, 105.0]));
    expect(t.start()).toBe(true);
    expect(t.start()).toBe(false);
    t.stop();
    expect(t.secondsActive()).toBeCloseTo(5.0, 9);
    expect(t.events).toHaveLength(2);
  });

  it("ignores a pause while idle", () => {
    const t = new SessionTimer(scriptedClock([100.0]));
    expect(t.pause()).toBe(false);
    expect(t.stop()).toBe(false);
    expect(t.events).toHaveLength(0);
    expect(t.secondsActive()).toBe(0);
  });

  it("includes the live tail while running", () => {
    const t = new SessionTimer(scriptedClock([100.0, 103.0, 104.0]));
    t.start();
    expect(t.secondsActive()).toBeCloseTo(3.0, 9); // reads the clock once
    expect(t.running).toBe(true);
    t.stop(); // at 104
    expect(t.secondsActive()).toBeCloseTo(4.0, 9);
    expect(t.running).toBe(false);
  });

  it("formats whole minutes and zero-padded seconds", () => {
    expect(formatSeconds(0)).toBe("0:00");
    expect(formatSeconds(7.9)).toBe("0:07");
    expect(formatSeconds(65)).toBe("1:05");
    expect(formatSeconds(600)).toBe("10:00");
  });
});
