import { expect, test } from "vitest";

import { funnelBars } from "../src/funnel.js";

test("bars scale relative to the target count", () => {
  const bars = funnelBars([
    { criterion: "target", remaining: 1000 },
    { criterion: "anc >= 1.5", remaining: 800 },
    { criterion: "hgb >= 10", remaining: 600 },
  ]);
  expect(bars.map((b) => b.fraction)).toEqual([1.0, 0.8, 0.6]);
  expect(bars[2].label).toBe("hgb >= 10");
});

test("empty funnel and empty target are handled", () => {
  expect(funnelBars([])).toEqual([]);
  expect(funnelBars([{ criterion: "target", remaining: 0 }])[0].fraction).toBe(0);
});
