// Pointer/keyboard -> wire messages. Drags move the IK target in the
// camera-aligned plane (modifier switches to rotation about the view axis);
// keys ramp the gripper. Outgoing traffic is coalesced so at most one
// message per server tick leaves the client.

import type { ClientMessage } from "./protocol";

export interface Vec3 {
  x: number;
  y: number;
  z: number;
}

export interface CameraBasis {
  right: Vec3;
  up: Vec3;
}

function add(a: Vec3, b: Vec3, s: number): Vec3 {
  return { x: a.x + b.x * s, y: a.y + b.y * s, z: a.z + b.z * s };
}

export class RateLimiter {
  private readonly interval: number;
  private nextAllowed = 0;

  constructor(ratePerSecond: number) {
    this.interval = 1000 / ratePerSecond;
  }

  allow(nowMs: number): boolean {
    if (nowMs >= this.nextAllowed) {
      this.nextAllowed = nowMs + this.interval;
      return true;
    }
    return false;
  }
}

export interface MapperConfig {
  metersPerPixel: number;
  gripperCloseRate: number; // open-fraction per second while the key is held
  tickHz: number;
}

export const DEFAULT_MAPPER: MapperConfig = {
  metersPerPixel: 0.0012,
  gripperCloseRate: 0.8,
  tickHz: 30,
};

// Quaternion multiply (w, x, y, z arrays).
function qmul(a: number[], b: number[]): number[] {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

function axisAngleQuat(axis: Vec3, angle: number): number[] {
  const h = angle / 2;
  const s = Math.sin(h);
  return [Math.cos(h), axis.x * s, axis.y * s, axis.z * s];
}

export class InputMapper {
  seq = 0;
  private pendingTarget: { p: Vec3; q: number[] } | null = null;
  private pendingGripper: number | null = null;
  private readonly limiter: RateLimiter;
  target: { p: Vec3; q: number[] } | null = null;
  gripperOpen = 1.0;

  constructor(private readonly cfg: MapperConfig = DEFAULT_MAPPER) {
    this.limiter = new RateLimiter(cfg.tickHz);
  }

  private next(): number {
    this.seq += 1;
    return this.seq;
  }

  // Adopt the server-confirmed end-effector pose as the drag origin.
  syncTarget(p: Vec3, q: number[]): void {
    if (this.target === null) this.target = { p, q: [...q] };
  }

  resetTarget(): void {
    this.target = null;
    this.pendingTarget = null;
  }

  drag(dxPx: number, dyPx: number, basis: CameraBasis, rotate: boolean): void {
    if (this.target === null) return;
    if (rotate) {
      // rotation mode: horizontal drag spins about the world vertical
      const angle = dxPx * this.cfg.metersPerPixel * 10;
      const q = qmul(axisAngleQuat({ x: 0, y: 0, z: 1 }, angle), this.target.q);
      this.target = { p: this.target.p, q };
    } else {
      const m = this.cfg.metersPerPixel;
      let p = add(this.target.p, basis.right, dxPx * m);
      p = add(p, basis.up, -dyPx * m); // screen y grows downward
      this.target = { p, q: this.target.q };
    }
    this.pendingTarget = this.target;
  }

  gripperKey(holdSeconds: number, closing: boolean): void {
    const delta = this.cfg.gripperCloseRate * holdSeconds;
    this.gripperOpen = Math.min(
      1,
      Math.max(0, this.gripperOpen + (closing ? -delta : delta)),
    );
    this.pendingGripper = this.gripperOpen;
  }

  // Called on an interval; emits at most one coalesced message per allowance.
  flush(nowMs: number): ClientMessage[] {
    const out: ClientMessage[] = [];
    if (this.pendingTarget === null && this.pendingGripper === null) return out;
    if (!this.limiter.allow(nowMs)) return out;
    if (this.pendingTarget !== null) {
      const t = this.pendingTarget;
      out.push({
        type: "set_target",
        seq: this.next(),
        p: [t.p.x, t.p.y, t.p.z],
        q: normalize(t.q),
      });
      this.pendingTarget = null;
    } else if (this.pendingGripper !== null) {
      out.push({ type: "set_gripper", seq: this.next(), open: this.pendingGripper });
      this.pendingGripper = null;
    }
    return out;
  }

  immediate(type: "record_start" | "record_stop" | "reset"): ClientMessage {
    return { type, seq: this.next() } as ClientMessage;
  }

  hello(): ClientMessage {
    return { type: "hello", seq: this.next(), version: 1 };
  }
}

function normalize(q: number[]): number[] {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  return q.map((v) => v / n);
}
