"""Full-stack teleop test: a scripted client drives a real websocket
session through a complete grasp; the recorded demo file loads, validates
and is usable as training data."""

import asyncio
import json
import threading

import numpy as np
import pytest
import websockets

from graspcascade.configio import preset_path, sha256_file
from graspcascade.demonstrations import load as load_demos
from graspcascade.environment import GraspEnv, load_scene
from graspcascade.kinematics import load_chain
from graspcascade.scripted import grasp_orientation
from graspcascade.teleop import serve_async

SCENE = preset_path("scene_cup_toy.yaml")
CHAIN = preset_path("chain_generic6r.yaml")
PORT = 8861


async def scripted_grasp_session(port: int) -> list:
    """Connects, records, drives the hand through all three tasks."""
    env = GraspEnv(load_chain(CHAIN), load_scene(SCENE))
    updates = []
    async with websockets.connect(f"ws://127.0.0.1:{port}/ws") as ws:
        seq = 0

        async def send(**msg):
            nonlocal seq
            seq += 1
            await ws.send(json.dumps({"seq": seq, **msg}))

        await send(type="hello", version=1)
        await send(type="record_start")
        phase = "approach"
        gripper = 1.0
        for _ in range(3000):
            raw = await asyncio.wait_for(ws.recv(), timeout=10.0)
            msg = json.loads(raw)
            if msg["type"] == "error":
                raise AssertionError(f"server error: {msg['reason']}")
            if msg["type"] != "state":
                continue
            updates.append(msg)
            if msg["terminal"] is not None:
                break
            gp = np.asarray(msg["grasp_point"])
            gd = np.asarray(msg["grasp_direction"])
            ee_p = np.asarray(msg["entities"]["ee"]["p"])
            obj_q = np.asarray(msg["entities"]["target"]["q"])
            # reuse the oracle's canonical grasp orientation
            from graspcascade.transforms import Pose
            from dataclasses import replace as dc
            shadow = env.reset(0)
            shadow = dc(shadow, object_pose=Pose(
                np.asarray(msg["entities"]["target"]["p"]), obj_q),
                grasp_point=gp, grasp_direction=gd)
            q = grasp_orientation(shadow, env.scene.grasp_lateral_local).q
            dist = float(np.linalg.norm(ee_p - gp))
            if phase == "approach":
                target = gp - 0.12 * gd
                if dist < 0.14:
                    phase = "descend"
            if phase == "descend":
                target = gp
                if dist < env.scene.thresholds.near_distance:
                    phase = "close"
            if phase == "close":
                target = gp
                gripper = max(0.0, gripper - 0.1)
                await send(type="set_gripper", open=gripper)
            await send(type="set_target", p=list(map(float, target)),
                       q=list(map(float, q)))
    return updates


@pytest.fixture()
def server(tmp_path):
    demo_out = tmp_path / "socket_demo.jsonl"
    loop = asyncio.new_event_loop()
    ready = None
    stop = threading.Event()

    def run():
        asyncio.set_event_loop(loop)

        async def main():
            server_task = asyncio.create_task(serve_async(
                port=PORT, scene=str(SCENE), chain=str(CHAIN),
                tick_hz=120.0, demo_out=str(demo_out), seed=4))
            while not stop.is_set():
                await asyncio.sleep(0.05)
            server_task.cancel()

        try:
            loop.run_until_complete(main())
        except Exception:
            pass

    thread = threading.Thread(target=run, daemon=True)
    thread.start()
    import time
    time.sleep(0.8)
    yield demo_out
    stop.set()
    thread.join(timeout=3)


def test_scripted_socket_client_full_grasp(server):
    updates = asyncio.run(scripted_grasp_session(PORT))
    assert updates, "no state updates received"
    assert updates[-1]["terminal"] == "success"
    assert updates[-1]["task_status"]["3"] == "success"
    # sequence numbers strictly increase
    seqs = [u["seq"] for u in updates]
    assert all(b > a for a, b in zip(seqs, seqs[1:]))

    demo_out = server
    demos = load_demos(demo_out, sha256_file(SCENE), sha256_file(CHAIN))
    assert len(demos) == 1
    ep = demos.episodes[0]
    assert ep.terminal.value == "success"
    assert len(ep) > 10

    # the recorded file is directly usable as training data
    from graspcascade.learning.trainer import Trainer, TrainerConfig
    from graspcascade.rewards import RewardConfig
    env = GraspEnv(load_chain(CHAIN), load_scene(SCENE))
    tr = Trainer(env, demos,
                 TrainerConfig(mode="cascade", max_env_steps=400,
                               rollout_steps=200, hidden_size=16,
                               checkpoint_every=0, ref_init_prob=0.0),
                 RewardConfig.default(), demo_out.parent / "run",
                 sha256_file(SCENE), sha256_file(CHAIN))
    summary = tr.run()
    assert summary["env_steps"] >= 400
