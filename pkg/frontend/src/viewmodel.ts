// Render-side state. Strictly server-authoritative: the view model stores
// the latest confirmed StateUpdate and derives display state from it; the
// client never predicts joint motion locally.

import type { ServerMessage, StateUpdate, TaskStatus } from "./protocol";

export type Connection = "connecting" | "open" | "closed";

// Hand-direction line color by task progress: red while aligning (Task 1),
// yellow once aligned and approaching (Task 2), green at the grasp point /
// grasped (Task 3 underway or done).
export const TASK_COLORS = {
  aligning: "#e04040",
  approaching: "#e0b830",
  grasping: "#30c050",
} as const;

export function handDirectionColor(
  status: Record<string, TaskStatus>,
): string {
  if (status["2"] === "success" || status["3"] === "success") {
    return TASK_COLORS.grasping;
  }
  if (status["1"] === "success") return TASK_COLORS.approaching;
  return TASK_COLORS.aligning;
}

export class ViewModel {
  latest: StateUpdate | null = null;
  connection: Connection = "connecting";
  lastError: string | null = null;
  tickHz = 30;
  scene = "";
  updatesSeen = 0;
  staleSeq = 0;

  apply(msg: ServerMessage): void {
    if (msg.type === "hello") {
      this.tickHz = msg.tick_hz;
      this.scene = msg.scene;
      return;
    }
    if (msg.type === "error") {
      this.lastError = msg.reason;
      return;
    }
    // drop stale or replayed updates; seq is strictly increasing
    if (this.latest !== null && msg.seq <= this.latest.seq) {
      this.staleSeq += 1;
      return;
    }
    this.latest = msg;
    this.updatesSeen += 1;
  }

  setConnection(c: Connection): void {
    this.connection = c;
  }

  get terminal(): string | null {
    return this.latest?.terminal ?? null;
  }

  get recording(): boolean {
    return this.latest?.recording ?? false;
  }

  get dragEnabled(): boolean {
    return this.connection === "open" && this.terminal === null;
  }

  lineColor(): string {
    if (!this.latest) return TASK_COLORS.aligning;
    return handDirectionColor(this.latest.task_status);
  }

  statusText(): string {
    if (this.connection !== "open") return this.connection;
    if (!this.latest) return "waiting for state";
    if (this.latest.terminal === "success") return "grasp complete";
    if (this.latest.terminal !== null) return `episode over: ${this.latest.terminal}`;
    return `task ${this.latest.active_task} | step ${this.latest.step_count}`;
  }
}
