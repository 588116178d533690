import { ApiClient, ApiRequestError, LatestWins } from "./api.js";
import {
  draftIssues,
  emptyDraft,
  slotOfFieldPath,
  toParticipants,
  TEAMS,
} from "./draft.js";
import type { SlotState, TeamName } from "./draft.js";
import { renderHeatmap } from "./heatmap.js";
import type {
  AttentionBlock,
  MetaResponse,
  RecommendRequest,
  RecommendResponse,
} from "./types.js";

/**
 * Wires the draft composer, recommendation lists, and attention heatmap to
 * the inference API. The DOM is built once from /meta; submits and
 * drill-downs swap content in place, never reloading the page.
 */
export class App {
  private meta: MetaResponse | null = null;
  private slots: SlotState[] = [];
  private requestingTeam: TeamName = "BLUE";
  private lastRequest: RecommendRequest | null = null;
  private lastResponse: RecommendResponse | null = null;
  private readonly inflight = new LatestWins();
  // slot index -> message blamed on that slot by a server 400
  private serverIssues = new Map<number, string>();

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async init(): Promise<void> {
    try {
      this.meta = await this.api.getMeta();
    } catch (err) {
      this.root.innerHTML = `<div class="banner error" id="banner"></div>`;
      const banner = this.root.querySelector<HTMLElement>("#banner")!;
      banner.textContent =
        err instanceof ApiRequestError && err.status === 503
          ? "model is still loading, try again shortly"
          : `cannot reach the inference service: ${(err as Error).message}`;
      const retry = document.createElement("button");
      retry.textContent = "retry";
      retry.addEventListener("click", () => void this.init());
      banner.appendChild(retry);
      return;
    }
    this.slots = emptyDraft(this.meta.roles);
    this.buildLayout();
    this.refreshValidity();
  }

  private buildLayout(): void {
    const meta = this.meta!;
    this.root.innerHTML = `
      <div class="banner" id="banner" hidden></div>
      <section class="draft" id="draft">
        <div class="teams"></div>
        <div class="controls">
          <span class="team-toggle" id="team-toggle"></span>
          <button id="submit" disabled>recommend items</button>
          <span id="status" class="status"></span>
        </div>
      </section>
      <section class="results" id="results" hidden>
        <h2>recommended items</h2>
        <div class="cards" id="cards"></div>
      </section>
      <section class="explanation" id="explanation" hidden>
        <h2>attention</h2>
        <label>view
          <select id="att-view" disabled></select>
        </label>
        <div id="heatmap"></div>
      </section>`;

    const teams = this.root.querySelector<HTMLElement>(".teams")!;
    for (const team of TEAMS) {
      const fieldset = document.createElement("fieldset");
      fieldset.className = `team team-${team.toLowerCase()}`;
      const legend = document.createElement("legend");
      legend.textContent = team;
      fieldset.appendChild(legend);
      this.slots.forEach((slot, i) => {
        if (slot.team !== team) return;
        fieldset.appendChild(this.buildSlotRow(slot, i, meta));
      });
      teams.appendChild(fieldset);
    }

    const toggle = this.root.querySelector<HTMLElement>("#team-toggle")!;
    for (const team of TEAMS) {
      const label = document.createElement("label");
      const radio = document.createElement("input");
      radio.type = "radio";
      radio.name = "requesting-team";
      radio.value = team;
      radio.checked = team === this.requestingTeam;
      radio.addEventListener("change", () => {
        this.requestingTeam = team;
      });
      label.appendChild(radio);
      label.appendChild(document.createTextNode(` for ${team}`));
      toggle.appendChild(label);
    }

    this.root
      .querySelector<HTMLButtonElement>("#submit")!
      .addEventListener("click", () => void this.submit());
    this.root
      .querySelector<HTMLSelectElement>("#att-view")!
      .addEventListener("change", () => void this.drillDown());
  }

  private buildSlotRow(
    slot: SlotState,
    index: number,
    meta: MetaResponse,
  ): HTMLElement {
    const row = document.createElement("div");
    row.className = "slot";
    row.dataset.slot = String(index);

    const roleSelect = document.createElement("select");
    roleSelect.className = "role-select";
    for (const role of meta.roles) {
      const opt = document.createElement("option");
      opt.value = role;
      opt.textContent = role;
      opt.selected = role === slot.role;
      roleSelect.appendChild(opt);
    }
    roleSelect.addEventListener("change", () => {
      this.slots[index]!.role = roleSelect.value;
      this.serverIssues.delete(index);
      this.refreshValidity();
    });

    const champSelect = document.createElement("select");
    champSelect.className = "champ-select";
    const blank = document.createElement("option");
    blank.value = "";
    blank.textContent = "-- champion --";
    champSelect.appendChild(blank);
    for (const name of meta.champions) {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      champSelect.appendChild(opt);
    }
    champSelect.addEventListener("change", () => {
      this.slots[index]!.champion = champSelect.value || null;
      this.serverIssues.delete(index);
      this.refreshValidity();
    });

    const error = document.createElement("span");
    error.className = "slot-error";

    row.appendChild(roleSelect);
    row.appendChild(champSelect);
    row.appendChild(error);
    return row;
  }

  /** Re-derives inline messages and the submit gate from the draft. */
  private refreshValidity(): void {
    const issues = draftIssues(this.slots);
    const bySlot = new Map<number, string>();
    for (const issue of issues) {
      if (!bySlot.has(issue.slot)) bySlot.set(issue.slot, issue.message);
    }
    for (const [slot, message] of this.serverIssues) {
      if (!bySlot.has(slot)) bySlot.set(slot, message);
    }
    this.root.querySelectorAll<HTMLElement>(".slot").forEach((row) => {
      const index = Number(row.dataset.slot);
      row.querySelector<HTMLElement>(".slot-error")!.textContent =
        bySlot.get(index) ?? "";
    });
    // only client-side validity gates the button; a server rejection may be
    // retried after an edit
    this.root.querySelector<HTMLButtonElement>("#submit")!.disabled =
      issues.length > 0;
  }

  private setBanner(message: string | null): void {
    const banner = this.root.querySelector<HTMLElement>("#banner")!;
    banner.hidden = message === null;
    banner.textContent = message ?? "";
    banner.className = message ? "banner error" : "banner";
  }

  private setStatus(text: string): void {
    this.root.querySelector<HTMLElement>("#status")!.textContent = text;
  }

  async submit(): Promise<void> {
    if (draftIssues(this.slots).length > 0) return;
    const request: RecommendRequest = {
      participants: toParticipants(this.slots),
      requesting_team: this.requestingTeam,
    };
    this.setBanner(null);
    this.setStatus("asking the model…");
    let response: RecommendResponse | null;
    try {
      response = await this.inflight.run((signal) =>
        this.api.recommend(request, signal),
      );
    } catch (err) {
      this.setStatus("");
      this.handleRequestError(err);
      return;
    }
    if (response === null) return; // a newer submit took over
    this.setStatus("");
    this.lastRequest = request;
    this.lastResponse = response;
    this.serverIssues.clear();
    this.refreshValidity();
    this.renderResults(response);
    this.resetAttentionControls();
    this.renderAttentionBlock(response.attention);
  }

  private handleRequestError(err: unknown): void {
    if (err instanceof ApiRequestError) {
      this.serverIssues.clear();
      let blamedSomeSlot = false;
      for (const path of err.fields) {
        const slot = slotOfFieldPath(path);
        if (slot !== null) {
          this.serverIssues.set(slot, err.message);
          blamedSomeSlot = true;
        }
      }
      this.refreshValidity();
      if (!blamedSomeSlot) this.setBanner(`${err.code}: ${err.message}`);
      return;
    }
    this.setBanner(`request failed: ${(err as Error).message}`);
  }

  private renderResults(response: RecommendResponse): void {
    this.root.querySelector<HTMLElement>("#results")!.hidden = false;
    const cards = this.root.querySelector<HTMLElement>("#cards")!;
    cards.textContent = "";
    for (const rec of response.recommendations) {
      const card = document.createElement("article");
      card.className = "rec-card";
      const header = document.createElement("h3");
      header.textContent = `${rec.champion_name} · ${rec.role}`;
      card.appendChild(header);
      const list = document.createElement("ol");
      for (const item of rec.items) {
        const li = document.createElement("li");
        li.className = "rec-item";
        li.dataset.prob = String(item.probability);
        const name = document.createElement("span");
        name.className = "rec-name";
        name.textContent = item.name;
        const prob = document.createElement("span");
        prob.className = "rec-prob";
        prob.textContent = `${(item.probability * 100).toFixed(1)}%`;
        li.appendChild(name);
        li.appendChild(prob);
        list.appendChild(li);
      }
      card.appendChild(list);
      cards.appendChild(card);
    }
  }

  /** The view menu offers the head-averaged matrix plus every (layer, head)
   * the served model actually has; nothing out of range is selectable. */
  private resetAttentionControls(): void {
    const config = this.meta!.config;
    const select = this.root.querySelector<HTMLSelectElement>("#att-view")!;
    select.textContent = "";
    const mean = document.createElement("option");
    mean.value = "mean";
    mean.textContent = "mean over heads";
    select.appendChild(mean);
    for (let layer = 0; layer < config.n_layers; layer++) {
      for (let head = 0; head < config.n_heads; head++) {
        const opt = document.createElement("option");
        opt.value = `${layer}:${head}`;
        opt.textContent = `layer ${layer}, head ${head}`;
        select.appendChild(opt);
      }
    }
    select.value = "mean";
    select.disabled = false;
    this.root.querySelector<HTMLElement>("#explanation")!.hidden = false;
  }

  private renderAttentionBlock(block: AttentionBlock): void {
    renderHeatmap(
      this.root.querySelector<HTMLElement>("#heatmap")!,
      block.rows,
      block.row_labels,
      block.column_labels,
    );
  }

  /** Row indices of the requesting team inside the canonical slot order. */
  private requestingRows(): number[] {
    const config = this.meta!.config;
    const requesting = this.lastRequest!.requesting_team;
    const offset = config.allies_only || requesting === "BLUE" ? 0 : 5;
    return [0, 1, 2, 3, 4].map((r) => r + offset);
  }

  async drillDown(): Promise<void> {
    const request = this.lastRequest;
    const response = this.lastResponse;
    if (!request || !response) return;
    const select = this.root.querySelector<HTMLSelectElement>("#att-view")!;
    if (select.value === "mean") {
      this.renderAttentionBlock(response.attention);
      return;
    }
    const [layer, head] = select.value.split(":").map(Number);
    let answer;
    try {
      answer = await this.inflight.run((signal) =>
        this.api.attention({ ...request, layer, head }, signal),
      );
    } catch (err) {
      this.handleRequestError(err);
      return;
    }
    if (answer === null) return;
    const weights = answer.matrices[0]!.weights;
    const rows = this.requestingRows();
    renderHeatmap(
      this.root.querySelector<HTMLElement>("#heatmap")!,
      rows.map((r) => weights[r]!),
      rows.map((r) => answer!.labels[r] ?? ""),
      answer.labels,
    );
  }
}
