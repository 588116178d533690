// End-to-end flows: the real App wired to a local HTTP stub of the
// inference service. Every number the UI shows is recomputed here from the
// stub's sentinel formulas, so a fabricated or misplaced value fails loudly.
import { afterEach, beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import { channelSum } from "./colors.js";
import {
  sentinelAttention,
  sentinelHeadMatrix,
  sentinelProbability,
  StubServer,
  STUB_CHAMPIONS,
  STUB_ITEMS,
} from "./stub_server.js";

let stub: StubServer;
let root: HTMLElement;
let app: App;

beforeEach(async () => {
  stub = new StubServer();
  await stub.start();
  document.body.innerHTML = '<div id="app"></div>';
  root = document.getElementById("app")!;
  app = new App(root, new ApiClient(stub.baseUrl));
});

afterEach(async () => {
  await stub.stop();
});

async function waitFor(cond: () => boolean, timeoutMs = 3000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("timed out waiting for condition");
    }
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

function slotRows(): HTMLElement[] {
  return [...root.querySelectorAll<HTMLElement>(".slot")];
}

function submitButton(): HTMLButtonElement {
  return root.querySelector<HTMLButtonElement>("#submit")!;
}

function setChampion(slot: number, name: string): void {
  const select = slotRows()[slot]!.querySelector<HTMLSelectElement>(
    ".champ-select",
  )!;
  select.value = name;
  select.dispatchEvent(new Event("change"));
}

function setRole(slot: number, role: string): void {
  const select = slotRows()[slot]!.querySelector<HTMLSelectElement>(
    ".role-select",
  )!;
  select.value = role;
  select.dispatchEvent(new Event("change"));
}

/** Slot i picks STUB_CHAMPIONS[i]; names 10 and 11 stay free for what-ifs. */
function fillDraft(): void {
  for (let i = 0; i < 10; i++) setChampion(i, STUB_CHAMPIONS[i]!);
}

function slotError(slot: number): string {
  return slotRows()[slot]!.querySelector(".slot-error")!.textContent ?? "";
}

function cards(): HTMLElement[] {
  return [...root.querySelectorAll<HTMLElement>(".rec-card")];
}

function heatmapCells(): HTMLElement[] {
  return [...root.querySelectorAll<HTMLElement>("td.heatmap-cell")];
}

function heatmapColumnLabels(): string[] {
  return [...root.querySelectorAll(".heatmap thead th")]
    .slice(1) // corner cell
    .map((th) => th.textContent ?? "");
}

function heatmapRowLabels(): string[] {
  return [...root.querySelectorAll(".heatmap tbody th")].map(
    (th) => th.textContent ?? "",
  );
}

function attentionView(): HTMLSelectElement {
  return root.querySelector<HTMLSelectElement>("#att-view")!;
}

describe("draft composition and submit", () => {
  it("renders six items per requested slot with probabilities straight from the server", async () => {
    await app.init();
    expect(slotRows()).toHaveLength(10);
    expect(submitButton().disabled).toBe(true);
    expect(root.querySelector<HTMLElement>("#results")!.hidden).toBe(true);

    fillDraft();
    expect(submitButton().disabled).toBe(false);
    submitButton().click();
    await waitFor(() => cards().length === 5);

    expect(stub.recommendCalls).toBe(1);
    cards().forEach((card, slot) => {
      const header = card.querySelector("h3")!.textContent!;
      expect(header).toContain(STUB_CHAMPIONS[slot]!);
      const items = [...card.querySelectorAll<HTMLElement>(".rec-item")];
      expect(items).toHaveLength(6);
      const names = items.map(
        (li) => li.querySelector(".rec-name")!.textContent,
      );
      expect(new Set(names).size).toBe(6);
      items.forEach((li, rank) => {
        const expected = sentinelProbability(slot, rank);
        expect(li.dataset.prob).toBe(String(expected));
        expect(li.querySelector(".rec-name")!.textContent).toBe(
          STUB_ITEMS[(slot * 6 + rank) % STUB_ITEMS.length],
        );
        expect(li.querySelector(".rec-prob")!.textContent).toBe(
          `${(expected * 100).toFixed(1)}%`,
        );
      });
    });
  });

  it("shows the head-averaged heatmap with requesting rows, all-slot columns, and weight-ranked colors", async () => {
    await app.init();
    fillDraft();
    submitButton().click();
    await waitFor(() => heatmapCells().length > 0);

    expect(heatmapRowLabels()).toEqual(STUB_CHAMPIONS.slice(0, 5));
    expect(heatmapColumnLabels()).toEqual(STUB_CHAMPIONS.slice(0, 10));

    const sentinel = sentinelAttention(5, 10).flat();
    const cells = heatmapCells();
    expect(cells).toHaveLength(50);
    expect(cells.map((td) => td.dataset.weight)).toEqual(
      sentinel.map(String),
    );

    // lightest-to-darkest must be exactly smallest-to-largest weight
    const byColor = cells
      .map((td, i) => ({ i, sum: channelSum(td.style.backgroundColor) }))
      .sort((a, b) => b.sum - a.sum)
      .map((entry) => entry.i);
    const byWeight = sentinel
      .map((value, i) => ({ i, value }))
      .sort((a, b) => a.value - b.value)
      .map((entry) => entry.i);
    expect(byColor).toEqual(byWeight);
  });

  it("blocks submit on a duplicate role and says so on every slot involved", async () => {
    await app.init();
    fillDraft();
    setRole(1, "TOP"); // BLUE already has TOP in slot 0

    expect(submitButton().disabled).toBe(true);
    expect(slotError(0)).toBe("TOP picked twice on BLUE");
    expect(slotError(1)).toBe("TOP picked twice on BLUE");
    expect(slotError(2)).toBe("");

    submitButton().click();
    await app.submit(); // the guard holds even when called directly
    expect(stub.recommendCalls).toBe(0);

    setRole(1, "MID");
    expect(submitButton().disabled).toBe(false);
    expect(slotError(0)).toBe("");
    expect(slotError(1)).toBe("");
  });

  it("sends the requesting team from the toggle and shows that team's rows", async () => {
    await app.init();
    fillDraft();
    const radios = [
      ...root.querySelectorAll<HTMLInputElement>(
        'input[name="requesting-team"]',
      ),
    ];
    expect(radios.map((r) => r.value)).toEqual(["BLUE", "RED"]);
    radios[1]!.checked = true;
    radios[1]!.dispatchEvent(new Event("change"));

    submitButton().click();
    await waitFor(() => cards().length === 5);

    const body = stub.requests.find((r) => r.path === "/recommend")!
      .body as { requesting_team: string };
    expect(body.requesting_team).toBe("RED");
    expect(cards().map((c) => c.querySelector("h3")!.textContent)).toEqual(
      STUB_CHAMPIONS.slice(5, 10).map((name, i) => `${name} · ${slotRows()[
        5 + i
      ]!.querySelector<HTMLSelectElement>(".role-select")!.value}`),
    );
    expect(heatmapRowLabels()).toEqual(STUB_CHAMPIONS.slice(5, 10));
  });
});

describe("what-if edits", () => {
  it("re-submits an edited enemy pick and updates in place without a reload", async () => {
    await app.init();
    fillDraft();
    submitButton().click();
    await waitFor(() => cards().length === 5);

    const draftNode = slotRows()[0]!;
    setChampion(5, STUB_CHAMPIONS[10]!); // swap one RED pick
    submitButton().click();
    await waitFor(
      () => heatmapColumnLabels()[5] === STUB_CHAMPIONS[10],
    );

    expect(stub.recommendCalls).toBe(2);
    expect(cards()).toHaveLength(5);
    // same document, same draft nodes: content swapped, page not rebuilt
    expect(document.getElementById("app")).toBe(root);
    expect(slotRows()[0]).toBe(draftNode);
  });

  it("drops a stale in-flight answer when a newer submit overtakes it", async () => {
    await app.init();
    fillDraft();
    stub.nextDelays = [120]; // first answer dawdles
    submitButton().click();
    // let the first request reach the server before overtaking it
    await waitFor(() => stub.recommendCalls === 1);
    setChampion(9, STUB_CHAMPIONS[11]!);
    submitButton().click();

    await waitFor(() => heatmapColumnLabels()[9] === STUB_CHAMPIONS[11]);
    expect(stub.recommendCalls).toBe(2);

    // give the slow first answer time to land; it must not clobber the view
    await new Promise((resolve) => setTimeout(resolve, 250));
    expect(heatmapColumnLabels()[9]).toBe(STUB_CHAMPIONS[11]);
    expect(root.querySelector("#status")!.textContent).toBe("");
  });
});

describe("attention drill-down", () => {
  it("offers only the heads the model has and fetches the picked one", async () => {
    await app.init();
    fillDraft();
    expect(attentionView().disabled).toBe(true);

    submitButton().click();
    await waitFor(() => cards().length === 5);
    const view = attentionView();
    expect(view.disabled).toBe(false);
    expect([...view.options].map((o) => o.value)).toEqual([
      "mean",
      "0:0",
      "0:1",
    ]);

    view.value = "0:1";
    view.dispatchEvent(new Event("change"));
    const headRows = sentinelHeadMatrix(0, 1, 10).slice(0, 5).flat();
    await waitFor(
      () => heatmapCells()[0]?.dataset.weight === String(headRows[0]),
    );

    const call = stub.requests.find((r) => r.path === "/attention")!;
    expect(call.body).toMatchObject({
      layer: 0,
      head: 1,
      requesting_team: "BLUE",
    });
    expect(heatmapCells().map((td) => td.dataset.weight)).toEqual(
      headRows.map(String),
    );
    expect(heatmapRowLabels()).toEqual(STUB_CHAMPIONS.slice(0, 5));
    expect(heatmapColumnLabels()).toEqual(STUB_CHAMPIONS.slice(0, 10));

    // back to the mean view: the submit-time matrix returns unchanged
    view.value = "mean";
    view.dispatchEvent(new Event("change"));
    const meanFlat = sentinelAttention(5, 10).flat();
    await waitFor(
      () => heatmapCells()[0]?.dataset.weight === String(meanFlat[0]),
    );
    expect(heatmapCells().map((td) => td.dataset.weight)).toEqual(
      meanFlat.map(String),
    );
    expect(
      stub.requests.filter((r) => r.path === "/attention"),
    ).toHaveLength(1);
  });

  it("shows the requesting team's rows for a RED drill-down", async () => {
    await app.init();
    fillDraft();
    const radios = [
      ...root.querySelectorAll<HTMLInputElement>(
        'input[name="requesting-team"]',
      ),
    ];
    radios[1]!.checked = true;
    radios[1]!.dispatchEvent(new Event("change"));
    submitButton().click();
    await waitFor(() => cards().length === 5);

    const view = attentionView();
    view.value = "0:0";
    view.dispatchEvent(new Event("change"));
    const redRows = sentinelHeadMatrix(0, 0, 10).slice(5, 10).flat();
    await waitFor(
      () => heatmapCells()[0]?.dataset.weight === String(redRows[0]),
    );
    expect(heatmapCells().map((td) => td.dataset.weight)).toEqual(
      redRows.map(String),
    );
    expect(heatmapRowLabels()).toEqual(STUB_CHAMPIONS.slice(5, 10));
  });
});

describe("server errors", () => {
  it("pins a 400 with a field path to the offending slot and allows a retry", async () => {
    await app.init();
    fillDraft();
    stub.failNext = {
      status: 400,
      payload: {
        error: {
          code: "unknown_name",
          message: "unknown champion: Zoe",
          fields: ["participants.3.champion_name"],
        },
      },
    };
    submitButton().click();
    await waitFor(() => slotError(3) !== "");

    expect(slotError(3)).toContain("unknown champion");
    expect(slotError(2)).toBe("");
    expect(submitButton().disabled).toBe(false);
    expect(root.querySelector<HTMLElement>("#banner")!.hidden).toBe(true);

    submitButton().click(); // stub is healthy again
    await waitFor(() => cards().length === 5);
    expect(slotError(3)).toBe("");
  });

  it("falls back to a banner when the server blames no slot", async () => {
    await app.init();
    fillDraft();
    stub.failNext = {
      status: 400,
      payload: {
        error: { code: "bad_request", message: "malformed draft", fields: [] },
      },
    };
    submitButton().click();
    const banner = root.querySelector<HTMLElement>("#banner")!;
    await waitFor(() => !banner.hidden);
    expect(banner.textContent).toBe("bad_request: malformed draft");
  });

  it("explains a 503 at startup and recovers through the retry button", async () => {
    stub.failNext = {
      status: 503,
      payload: {
        error: {
          code: "model_not_loaded",
          message: "no checkpoint loaded",
          fields: [],
        },
      },
    };
    await app.init();

    const banner = root.querySelector<HTMLElement>("#banner")!;
    expect(banner.textContent).toContain("still loading");
    expect(slotRows()).toHaveLength(0);

    banner.querySelector("button")!.click();
    await waitFor(() => slotRows().length === 10);
    expect(submitButton().disabled).toBe(true); // fresh empty draft
  });
});
