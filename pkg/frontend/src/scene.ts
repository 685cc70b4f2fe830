// three.js scene fed purely from server StateUpdates: link cylinders
// between streamed joint positions, cup body + handle, grasp point and
// direction markers, hand-direction line colored by task state, and the
// draggable IK target gizmo.

import * as THREE from "three";
import type { StateUpdate, WirePose } from "./protocol";
import { handDirectionColor } from "./viewmodel";

const LINK_RADII = [0.05, 0.045, 0.04, 0.035, 0.035, 0.03, 0.02];

export interface SceneRefs {
  scene: THREE.Scene;
  links: THREE.Mesh[];
  joints: THREE.Mesh[];
  gripper: THREE.Mesh;
  ee: THREE.Mesh;
  cup: THREE.Group;
  graspPoint: THREE.Mesh;
  graspDir: THREE.ArrowHelper;
  handDir: THREE.ArrowHelper;
  gizmo: THREE.Mesh;
}

function v(p: [number, number, number] | number[]): THREE.Vector3 {
  return new THREE.Vector3(p[0], p[1], p[2]);
}

function quat(q: number[]): THREE.Quaternion {
  // wire order is (w, x, y, z); three uses (x, y, z, w)
  return new THREE.Quaternion(q[1], q[2], q[3], q[0]);
}

export function buildScene(): SceneRefs {
  const scene = new THREE.Scene();
  scene.background = new THREE.Color(0x15181d);
  scene.add(new THREE.AmbientLight(0xffffff, 0.7));
  const sun = new THREE.DirectionalLight(0xffffff, 1.2);
  sun.position.set(1, -1, 2);
  scene.add(sun);

  const table = new THREE.Mesh(
    new THREE.BoxGeometry(1.6, 1.6, 0.02),
    new THREE.MeshStandardMaterial({ color: 0x2a2f38 }),
  );
  table.position.set(0.4, 0, -0.012);
  scene.add(table);
  const grid = new THREE.GridHelper(1.6, 16, 0x39404d, 0x262b33);
  grid.rotation.x = Math.PI / 2;
  grid.position.set(0.4, 0, 0.001);
  scene.add(grid);

  const linkMat = new THREE.MeshStandardMaterial({ color: 0x8fa3bf });
  const links: THREE.Mesh[] = [];
  const joints: THREE.Mesh[] = [];
  for (let i = 0; i < 7; i += 1) {
    const link = new THREE.Mesh(
      new THREE.CylinderGeometry(1, 1, 1, 14),
      linkMat,
    );
    links.push(link);
    scene.add(link);
    const joint = new THREE.Mesh(
      new THREE.SphereGeometry(LINK_RADII[i] * 1.15, 14, 10),
      new THREE.MeshStandardMaterial({ color: 0xb8c6da }),
    );
    joints.push(joint);
    scene.add(joint);
  }

  const gripper = new THREE.Mesh(
    new THREE.BoxGeometry(0.015, 0.015, 0.06),
    new THREE.MeshStandardMaterial({ color: 0xd9a34a }),
  );
  scene.add(gripper);
  const ee = new THREE.Mesh(
    new THREE.SphereGeometry(0.012, 14, 10),
    new THREE.MeshStandardMaterial({ color: 0xffffff }),
  );
  scene.add(ee);

  const cup = new THREE.Group();
  const body = new THREE.Mesh(
    new THREE.CylinderGeometry(0.03, 0.03, 0.1, 20),
    new THREE.MeshStandardMaterial({ color: 0xc9b458 }),
  );
  body.rotation.x = Math.PI / 2;
  body.position.z = 0.05;
  cup.add(body);
  const handle = new THREE.Mesh(
    new THREE.BoxGeometry(0.05, 0.016, 0.06),
    new THREE.MeshStandardMaterial({ color: 0xc9b458 }),
  );
  handle.position.set(-0.06, 0, 0.05);
  cup.add(handle);
  scene.add(cup);

  const graspPoint = new THREE.Mesh(
    new THREE.SphereGeometry(0.008, 10, 8),
    new THREE.MeshBasicMaterial({ color: 0x4d9fff }),
  );
  scene.add(graspPoint);
  const graspDir = new THREE.ArrowHelper(
    new THREE.Vector3(0, 0, -1), new THREE.Vector3(), 0.12, 0x4d9fff,
  );
  scene.add(graspDir);
  const handDir = new THREE.ArrowHelper(
    new THREE.Vector3(0, 0, 1), new THREE.Vector3(), 0.14, 0xe04040,
  );
  scene.add(handDir);

  const gizmo = new THREE.Mesh(
    new THREE.SphereGeometry(0.016, 14, 10),
    new THREE.MeshBasicMaterial({
      color: 0x77ffcc, transparent: true, opacity: 0.55,
    }),
  );
  scene.add(gizmo);
  return {
    scene, links, joints, gripper, ee, cup, graspPoint, graspDir,
    handDir, gizmo,
  };
}

function placeLink(mesh: THREE.Mesh, a: THREE.Vector3, b: THREE.Vector3,
                   radius: number): void {
  const d = b.clone().sub(a);
  const len = Math.max(d.length(), 1e-6);
  mesh.position.copy(a.clone().add(b).multiplyScalar(0.5));
  mesh.quaternion.setFromUnitVectors(
    new THREE.Vector3(0, 1, 0), d.normalize(),
  );
  mesh.scale.set(radius, len, radius);
}

// Entity poses come straight off the wire; nothing is predicted locally.
export function applyUpdate(refs: SceneRefs, update: StateUpdate): void {
  const arm = update.entities.arm;
  const pts: THREE.Vector3[] = [new THREE.Vector3(0, 0, 0)];
  for (const pose of arm) pts.push(v(pose.p));
  const eePos = v(update.entities.ee.p);
  const eeQuat = quat(update.entities.ee.q);
  const mount = eePos.clone().add(
    new THREE.Vector3(0, 0, -0.06).applyQuaternion(eeQuat),
  );
  pts.push(mount);
  for (let i = 0; i < 7; i += 1) {
    placeLink(refs.links[i], pts[i], pts[i + 1], LINK_RADII[i]);
    refs.joints[i].position.copy(pts[i + 1]);
  }
  refs.gripper.position.copy(v(update.entities.gripper.p));
  refs.gripper.quaternion.copy(quat(update.entities.gripper.q));
  refs.ee.position.copy(eePos);

  refs.cup.position.copy(v(update.entities.target.p));
  refs.cup.quaternion.copy(quat(update.entities.target.q));

  const gp = v(update.grasp_point);
  refs.graspPoint.position.copy(gp);
  const gd = v(update.grasp_direction);
  refs.graspDir.position.copy(gp.clone().sub(gd.clone().multiplyScalar(0.12)));
  refs.graspDir.setDirection(gd);

  const toolZ = new THREE.Vector3(0, 0, 1).applyQuaternion(eeQuat);
  refs.handDir.position.copy(eePos);
  refs.handDir.setDirection(toolZ);
  refs.handDir.setColor(new THREE.Color(handDirectionColor(update.task_status)));

  if (update.ik_target) {
    refs.gizmo.visible = true;
    refs.gizmo.position.copy(v(update.ik_target.p));
  }
}

export function jointPositionsFromUpdate(update: StateUpdate): number[][] {
  // what the renderer displays for the joints, for divergence checks
  return update.entities.arm.map((pose: WirePose) => [...pose.p]);
}
