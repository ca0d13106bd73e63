import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { debounce } from "../src/debounce.js";

describe("debounce", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("collapses a burst into exactly one trailing call", () => {
    const calls: number[] = [];
    const d = debounce((n: number) => calls.push(n), 300);
    d(1);
    vi.advanceTimersByTime(100);
    d(2);
    vi.advanceTimersByTime(100);
    d(3);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(300);
    expect(calls).toEqual([3]);
    vi.advanceTimersByTime(1000);
    expect(calls).toEqual([3]);
  });

  it("fires once per separated window", () => {
    const calls: number[] = [];
    const d = debounce((n: number) => calls.push(n), 300);
    d(1);
    vi.advanceTimersByTime(301);
    d(2);
    vi.advanceTimersByTime(301);
    expect(calls).toEqual([1, 2]);
  });

  it("cancel drops the pending call", () => {
    const calls: number[] = [];
    const d = debounce((n: number) => calls.push(n), 300);
    d(1);
    d.cancel();
    vi.advanceTimersByTime(1000);
    expect(calls).toEqual([]);
  });

  it("flush fires the pending call immediately", () => {
    const calls: number[] = [];
    const d = debounce((n: number) => calls.push(n), 300);
    d(7);
    d.flush();
    expect(calls).toEqual([7]);
    vi.advanceTimersByTime(1000);
    expect(calls).toEqual([7]);
  });
});
