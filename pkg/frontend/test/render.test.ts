// Renders 1,000 streamed state updates into the three.js scene graph and
// checks the displayed joint positions never diverge from what the server
// reported (the client performs no prediction, so they must match exactly
// up to float32 scene-graph storage).

import { describe, expect, it } from "vitest";
import { applyUpdate, buildScene, jointPositionsFromUpdate } from "../src/scene";
import { ViewModel } from "../src/viewmodel";
import { makeUpdate } from "./viewmodel.test";

function streamedUpdate(seq: number) {
  // a moving arm: deterministic smooth trajectories per joint
  const t = seq * 0.03;
  const arm = Array.from({ length: 6 }, (_, i) => ({
    p: [
      0.1 * (i + 1) * Math.cos(t * (1 + 0.1 * i)),
      0.08 * Math.sin(t * (1.3 + 0.1 * i)),
      0.15 + 0.05 * i + 0.02 * Math.sin(t),
    ] as [number, number, number],
    q: [1, 0, 0, 0] as [number, number, number, number],
  }));
  return makeUpdate(seq, {
    entities: {
      arm,
      gripper: { p: [0.5, 0.01 * Math.sin(t), 0.2], q: [1, 0, 0, 0] },
      ee: { p: [0.55 * Math.cos(t * 0.2), 0.02, 0.25], q: [1, 0, 0, 0] },
      target: { p: [0.45, 0.1 * Math.sin(t * 0.1), 0], q: [1, 0, 0, 0] },
    },
  });
}

describe("scene rendering from streamed updates", () => {
  it("1000 updates render without divergence from server-reported poses", () => {
    const refs = buildScene();
    const vm = new ViewModel();
    const SCREEN_PRECISION = 1e-6; // float32 scene-graph storage
    for (let seq = 1; seq <= 1000; seq += 1) {
      const update = streamedUpdate(seq);
      vm.apply(update);
      applyUpdate(refs, vm.latest!);
      const reported = jointPositionsFromUpdate(update);
      for (let j = 0; j < 6; j += 1) {
        const shown = refs.joints[j].position;
        expect(Math.abs(shown.x - reported[j][0])).toBeLessThan(SCREEN_PRECISION);
        expect(Math.abs(shown.y - reported[j][1])).toBeLessThan(SCREEN_PRECISION);
        expect(Math.abs(shown.z - reported[j][2])).toBeLessThan(SCREEN_PRECISION);
      }
      const cup = refs.cup.position;
      expect(cup.x).toBeCloseTo(update.entities.target.p[0], 6);
      expect(cup.y).toBeCloseTo(update.entities.target.p[1], 6);
    }
    expect(vm.updatesSeen).toBe(1000);
  });

  it("link meshes span consecutive joint positions", () => {
    const refs = buildScene();
    const update = streamedUpdate(42);
    applyUpdate(refs, update);
    const a = update.entities.arm[1].p;
    const b = update.entities.arm[2].p;
    const mid = refs.links[2].position;
    expect(mid.x).toBeCloseTo((a[0] + b[0]) / 2, 6);
    expect(mid.y).toBeCloseTo((a[1] + b[1]) / 2, 6);
    expect(mid.z).toBeCloseTo((a[2] + b[2]) / 2, 6);
  });

  it("hand-direction arrow recolors with task state", () => {
    const refs = buildScene();
    const lineColor = () =>
      (refs.handDir.line.material as unknown as {
        color: { getHexString(): string };
      }).color.getHexString();
    applyUpdate(refs, makeUpdate(1));
    const red = lineColor();
    applyUpdate(refs, makeUpdate(2, {
      task_status: { "1": "success", "2": "in_progress", "3": "in_progress" },
    }));
    expect(red).not.toBe(lineColor());
  });
});
