import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import {
  clampThreshold,
  heightToSlider,
  positiveSet,
  sliderToHeight,
  ViewState,
} from "../src/state.js";
import type { ScoresResponse } from "../src/types.js";

const scores = JSON.parse(
  readFileSync(new URL("./fixtures/scores.json", import.meta.url), "utf8"),
) as ScoresResponse;

describe("threshold scale conversions", () => {
  it("maps the score scale onto tree heights and back", () => {
    expect(sliderToHeight(0)).toBe(1);
    expect(sliderToHeight(100)).toBe(0);
    expect(sliderToHeight(50)).toBeCloseTo(0.5, 12);
    for (const t of [0, 3.7, 41.2, 78.8, 100]) {
      expect(heightToSlider(sliderToHeight(t))).toBeCloseTo(t, 10);
    }
  });

  it("clamps out-of-range and NaN thresholds", () => {
    expect(clampThreshold(-5)).toBe(0);
    expect(clampThreshold(104)).toBe(100);
    expect(clampThreshold(Number.NaN)).toBe(0);
    expect(clampThreshold(42.5)).toBe(42.5);
  });
});

describe("positiveSet", () => {
  it("keeps exactly the rows at or above the threshold", () => {
    const ids = new Set(positiveSet(scores.rows, 60));
    for (const row of scores.rows) {
      expect(ids.has(row.track_id)).toBe(row.ensemble_score >= 60);
    }
  });

  it("grows monotonically as the threshold drops", () => {
    let previous = new Set<string>();
    for (const t of [100, 80, 60, 40, 20, 0]) {
      const current = new Set(positiveSet(scores.rows, t));
      for (const id of previous) expect(current.has(id)).toBe(true);
      previous = current;
    }
    expect(previous.size).toBe(scores.rows.length);
  });

  it("always includes the reference at any threshold up to 100", () => {
    expect(positiveSet(scores.rows, 100)).toContain(scores.reference_id);
  });
});

describe("ViewState", () => {
  it("starts dirty until a commit is recorded", () => {
    const state = new ViewState();
    expect(state.dirty).toBe(true);
    expect(state.threshold).toBe(50);
  });

  it("is dirty iff the slider differs from the committed value", () => {
    const state = new ViewState();
    state.selectWork("w", 78.8);
    expect(state.threshold).toBe(78.8);
    expect(state.dirty).toBe(false);
    state.setThreshold(78.9);
    expect(state.dirty).toBe(true);
    state.setThreshold(78.8);
    expect(state.dirty).toBe(false);
  });

  it("clamps slider input into [0, 100]", () => {
    const state = new ViewState();
    state.setThreshold(250);
    expect(state.threshold).toBe(100);
    state.setThreshold(-3);
    expect(state.threshold).toBe(0);
  });

  it("markCommitted clears the dirty flag at the stored value", () => {
    const state = new ViewState();
    state.setThreshold(33.3);
    state.markCommitted(33.3);
    expect(state.dirty).toBe(false);
    expect(state.threshold).toBe(33.3);
  });

  it("selecting a work without an annotation resets to the default", () => {
    const state = new ViewState();
    state.selectWork("a", 70);
    state.hoveredTrack = "t0001";
    state.pathTrack = "t0002";
    state.selectWork("b", null);
    expect(state.workId).toBe("b");
    expect(state.threshold).toBe(50);
    expect(state.dirty).toBe(true);
    expect(state.hoveredTrack).toBeNull();
    expect(state.pathTrack).toBeNull();
  });
});
