import { existsSync, mkdtempSync, readFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import { main } from "../src/cli.js";
import { renderConvergence, renderDefectHeatmap, renderProfile } from "../src/plots.js";

const FIX = join(__dirname, "fixtures");

describe("figure kinds", () => {
  it("renders the profile overlay with one curve per parameter value", () => {
    const svg = renderProfile([join(FIX, "profile.csv")]);
    expect(svg).toContain("<svg");
    expect(svg).toContain("profile along the ray");
    expect(svg).toContain("kdv_4_2 p=1");
    const curves = svg.match(/<polyline/g) ?? [];
    expect(curves.length).toBeGreaterThanOrEqual(3);
  });

  it("renders a monotone log-scale contraction curve", () => {
    const svg = renderConvergence([join(FIX, "convergence.csv")]);
    expect(svg).toContain("fixed-point contraction");
    expect(svg).toContain("iteration");
    expect(svg).toMatch(/1e-?\d/); // log-scale tick labels
  });

  it("renders the defect heatmap over orders and identities", () => {
    const svg = renderDefectHeatmap([
      join(FIX, "defects.csv"),
      join(FIX, "defects_r3.csv"),
    ]);
    expect(svg).toContain("identity defects");
    expect(svg).toContain("m=1");
    expect(svg).toContain("m=3");
    const cells = svg.match(/<rect/g) ?? [];
    expect(cells.length).toBeGreaterThan(10);
  });
});

describe("determinism", () => {
  it("rerendering is byte-stable", () => {
    for (const render of [
      () => renderProfile([join(FIX, "profile.csv")]),
      () => renderConvergence([join(FIX, "convergence.csv")]),
      () => renderDefectHeatmap([join(FIX, "defects.csv")]),
    ]) {
      expect(render()).toBe(render());
    }
  });
});

describe("cli", () => {
  it("writes a figure and returns 0", () => {
    const dir = mkdtempSync(join(tmpdir(), "cdpde-plot-"));
    const out = join(dir, "fig.svg");
    const rc = main(["convergence", join(FIX, "convergence.csv"), "-o", out]);
    expect(rc).toBe(0);
    expect(existsSync(out)).toBe(true);
    expect(readFileSync(out, "utf-8")).toContain("<svg");
  });

  it("usage errors exit 2", () => {
    expect(main(["profile"])).toBe(2);
    const dir = mkdtempSync(join(tmpdir(), "cdpde-plot-"));
    expect(main(["nope", join(FIX, "profile.csv"), "-o", join(dir, "x.svg")]))
      .toBe(2);
  });
});
