import { describe, expect, it } from "vitest";

import { heatColor, renderHeatmap } from "../src/heatmap.js";
import { channelSum } from "./colors.js";

describe("heatColor", () => {
  it("gets strictly darker as the weight grows", () => {
    let previous = Infinity;
    for (let i = 0; i <= 20; i++) {
      const sum = channelSum(heatColor(i / 20, 1));
      expect(sum).toBeLessThan(previous);
      previous = sum;
    }
  });

  it("clamps weights outside [0, max]", () => {
    expect(heatColor(-1, 1)).toBe(heatColor(0, 1));
    expect(heatColor(2, 1)).toBe(heatColor(1, 1));
  });

  it("treats an all-zero matrix as all-light", () => {
    expect(heatColor(0, 0)).toBe(heatColor(0, 1));
  });
});

describe("renderHeatmap", () => {
  const matrix = [
    [0.05, 0.4, 0.2],
    [0.9, 0.1, 0.3],
  ];

  function render(): HTMLElement {
    const host = document.createElement("div");
    renderHeatmap(host, matrix, ["r0", "r1"], ["c0", "c1", "c2"]);
    return host;
  }

  it("renders one labeled cell per matrix entry", () => {
    const host = render();
    const cells = host.querySelectorAll("td.heatmap-cell");
    expect(cells).toHaveLength(6);
    const headers = [...host.querySelectorAll("thead th")].map(
      (th) => th.textContent,
    );
    expect(headers).toEqual(["", "c0", "c1", "c2"]);
    const rowHeaders = [...host.querySelectorAll("tbody th")].map(
      (th) => th.textContent,
    );
    expect(rowHeaders).toEqual(["r0", "r1"]);
  });

  it("stores the raw weight on each cell", () => {
    const host = render();
    const weights = [...host.querySelectorAll<HTMLElement>("td.heatmap-cell")].map(
      (td) => Number(td.dataset.weight),
    );
    expect(weights).toEqual(matrix.flat());
  });

  it("ranks cell colors exactly like the weights", () => {
    const host = render();
    const cells = [...host.querySelectorAll<HTMLElement>("td.heatmap-cell")];
    const byColor = cells
      .map((td, i) => ({ i, darkness: -channelSum(td.style.backgroundColor) }))
      .sort((a, b) => a.darkness - b.darkness)
      .map((entry) => entry.i);
    const byWeight = matrix
      .flat()
      .map((value, i) => ({ i, value }))
      .sort((a, b) => a.value - b.value)
      .map((entry) => entry.i);
    expect(byColor).toEqual(byWeight);
  });

  it("shows the hovered cell in the readout", () => {
    const host = render();
    document.body.appendChild(host);
    const cell = host.querySelectorAll<HTMLElement>("td.heatmap-cell")[3]!;
    cell.dispatchEvent(new MouseEvent("mouseover", { bubbles: true }));
    expect(host.querySelector(".heatmap-readout")!.textContent).toContain(
      "0.9",
    );
    host.remove();
  });
});
