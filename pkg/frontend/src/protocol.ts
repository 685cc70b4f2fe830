// Wire protocol v1 shared with the teleop server. JSON text frames,
// sequence numbers strictly increasing per direction.

export const WIRE_VERSION = 1;

export interface WirePose {
  p: [number, number, number];
  q: [number, number, number, number]; // w, x, y, z
}

export type TaskStatus = "success" | "in_progress" | "violated";

export interface StateUpdate {
  type: "state";
  seq: number;
  tick: number;
  step_count: number;
  joints: number[];
  entities: {
    arm: WirePose[];
    gripper: WirePose;
    ee: WirePose;
    target: WirePose;
  };
  grasp_point: [number, number, number];
  grasp_direction: [number, number, number];
  task_status: Record<string, TaskStatus>;
  active_task: number;
  terminal: string | null;
  recording: boolean;
  gripper_open: number;
  ik_target: WirePose | null;
}

export interface HelloMessage {
  type: "hello";
  seq: number;
  version: number;
  tick_hz: number;
  scene: string;
  session: string;
}

export interface ErrorMessage {
  type: "error";
  seq: number;
  reason: string;
}

export type ServerMessage = StateUpdate | HelloMessage | ErrorMessage;

export type ClientMessage =
  | { type: "hello"; seq: number; version: number }
  | { type: "set_target"; seq: number; p: number[]; q: number[] }
  | { type: "set_gripper"; seq: number; open: number }
  | { type: "record_start"; seq: number }
  | { type: "record_stop"; seq: number }
  | { type: "reset"; seq: number; seed?: number };

export function parseServerMessage(raw: string): ServerMessage | null {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const t = (msg as { type?: unknown }).type;
  if (t === "state" || t === "hello" || t === "error") {
    return msg as ServerMessage;
  }
  return null;
}
