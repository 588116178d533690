import type { ParticipantPayload } from "./types.js";

export const TEAMS = ["BLUE", "RED"] as const;
export type TeamName = (typeof TEAMS)[number];

export interface SlotState {
  team: TeamName;
  role: string;
  champion: string | null;
}

export interface SlotIssue {
  slot: number;
  message: string;
}

/** The ten slots in canonical order: Blue over the roles, then Red. */
export function emptyDraft(roles: string[]): SlotState[] {
  const slots: SlotState[] = [];
  for (const team of TEAMS) {
    for (const role of roles) {
      slots.push({ team, role, champion: null });
    }
  }
  return slots;
}

/**
 * Everything that blocks a submit, slot by slot. A duplicate role flags
 * every slot involved, not just the second one, so both selectors show
 * the message.
 */
export function draftIssues(slots: SlotState[]): SlotIssue[] {
  const issues: SlotIssue[] = [];
  slots.forEach((slot, i) => {
    if (!slot.champion) {
      issues.push({ slot: i, message: "pick a champion" });
    }
  });
  for (const team of TEAMS) {
    const byRole = new Map<string, number[]>();
    slots.forEach((slot, i) => {
      if (slot.team !== team) return;
      const seen = byRole.get(slot.role) ?? [];
      seen.push(i);
      byRole.set(slot.role, seen);
    });
    for (const [role, indices] of byRole) {
      if (indices.length > 1) {
        for (const i of indices) {
          issues.push({ slot: i, message: `${role} picked twice on ${team}` });
        }
      }
    }
  }
  return issues;
}

export function draftIsValid(slots: SlotState[]): boolean {
  return draftIssues(slots).length === 0;
}

/** Request payload rows, in the same array order as the UI slots so the
 * server's participants.N field paths map straight back. */
export function toParticipants(slots: SlotState[]): ParticipantPayload[] {
  return slots.map((slot) => ({
    champion_name: slot.champion ?? "",
    role: slot.role,
    team: slot.team,
  }));
}

/** participants.3.champion_name -> slot 3; anything else -> null. */
export function slotOfFieldPath(path: string): number | null {
  const match = /^participants\.(\d+)(\.|$)/.exec(path);
  return match ? Number(match[1]) : null;
}
