// Scene viewer as a pure function: SceneSpec + camera + viewport size in,
// flat draw-command list out. A canvas adapter executes the commands; the
// tests assert on the commands directly.

import { OrbitCamera, projectPoint, transformPoint, Vec3 } from "./camera.js";
import type { SceneObject, SceneSpec } from "./types.js";

export interface LineCommand {
  kind: "line";
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export interface LabelCommand {
  kind: "label";
  text: string;
  x: number;
  y: number;
}

export interface EmptyStateCommand {
  kind: "empty-state";
  message: string;
}

export type DrawCommand = LineCommand | LabelCommand | EmptyStateCommand;

// Unit cube corners, centered at the origin.
const CORNERS: Vec3[] = [
  [-0.5, -0.5, -0.5],
  [0.5, -0.5, -0.5],
  [0.5, 0.5, -0.5],
  [-0.5, 0.5, -0.5],
  [-0.5, -0.5, 0.5],
  [0.5, -0.5, 0.5],
  [0.5, 0.5, 0.5],
  [-0.5, 0.5, 0.5],
];

const EDGES: [number, number][] = [
  [0, 1], [1, 2], [2, 3], [3, 0],
  [4, 5], [5, 6], [6, 7], [7, 4],
  [0, 4], [1, 5], [2, 6], [3, 7],
];

function boxCommands(
  object: SceneObject,
  camera: OrbitCamera,
  width: number,
  height: number
): DrawCommand[] {
  const projected = CORNERS.map((c) =>
    projectPoint(
      camera,
      transformPoint(c, object.position, object.rotation, object.scale),
      width,
      height
    )
  );
  const commands: DrawCommand[] = [];
  for (const [a, b] of EDGES) {
    if (projected[a].visible && projected[b].visible) {
      commands.push({
        kind: "line",
        x1: projected[a].x,
        y1: projected[a].y,
        x2: projected[b].x,
        y2: projected[b].y,
      });
    }
  }
  const center = projectPoint(camera, object.position, width, height);
  if (center.visible) {
    commands.push({ kind: "label", text: object.label, x: center.x, y: center.y });
  }
  return commands;
}

export function renderScene(
  scene: SceneSpec | null,
  camera: OrbitCamera,
  width: number,
  height: number
): DrawCommand[] {
  if (scene === null) {
    return [{ kind: "empty-state", message: "No scene yet. Submit a turn to generate one." }];
  }
  if (scene.objects.length === 0) {
    return [{ kind: "empty-state", message: `Scene revision ${scene.revision} is empty.` }];
  }
  return scene.objects.flatMap((o) => boxCommands(o, camera, width, height));
}

export function labelCount(commands: DrawCommand[]): number {
  return commands.filter((c) => c.kind === "label").length;
}
