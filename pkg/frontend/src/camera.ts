// Orbit camera and perspective projection, hand-rolled so the viewer has
// no rendering dependency. Right-handed, Y up, matching the scene format.

export type Vec3 = [number, number, number];

export interface OrbitCamera {
  target: Vec3;
  distance: number;
  /** Rotation around Y, radians. */
  yaw: number;
  /** Elevation, radians; clamped shy of the poles. */
  pitch: number;
  fovY: number;
}

export function defaultCamera(): OrbitCamera {
  return { target: [0, 0, 0], distance: 14, yaw: Math.PI / 4, pitch: Math.PI / 6, fovY: Math.PI / 3 };
}

const PITCH_LIMIT = Math.PI / 2 - 0.01;

export function orbit(camera: OrbitCamera, dYaw: number, dPitch: number): OrbitCamera {
  return {
    ...camera,
    yaw: camera.yaw + dYaw,
    pitch: Math.max(-PITCH_LIMIT, Math.min(PITCH_LIMIT, camera.pitch + dPitch)),
  };
}

export function zoom(camera: OrbitCamera, factor: number): OrbitCamera {
  return { ...camera, distance: Math.max(0.5, camera.distance * factor) };
}

export function cameraPosition(camera: OrbitCamera): Vec3 {
  const { target, distance, yaw, pitch } = camera;
  return [
    target[0] + distance * Math.cos(pitch) * Math.sin(yaw),
    target[1] + distance * Math.sin(pitch),
    target[2] + distance * Math.cos(pitch) * Math.cos(yaw),
  ];
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

function normalize(v: Vec3): Vec3 {
  const n = Math.hypot(v[0], v[1], v[2]);
  return [v[0] / n, v[1] / n, v[2] / n];
}

/** A point transformed into camera space: x right, y up, z toward viewer. */
export function toCameraSpace(camera: OrbitCamera, point: Vec3): Vec3 {
  const eye = cameraPosition(camera);
  const forward = normalize(sub(camera.target, eye));
  const right = normalize(cross(forward, [0, 1, 0]));
  const up = cross(right, forward);
  const rel = sub(point, eye);
  return [dot(rel, right), dot(rel, up), -dot(rel, forward)];
}

export interface Projected {
  /** Viewport coordinates in [0, width) x [0, height), y down. */
  x: number;
  y: number;
  /** Camera-space depth; larger is farther. */
  depth: number;
  visible: boolean;
}

export function projectPoint(
  camera: OrbitCamera,
  point: Vec3,
  width: number,
  height: number
): Projected {
  const [cx, cy, cz] = toCameraSpace(camera, point);
  const depth = -cz;
  if (depth <= 1e-6) {
    return { x: 0, y: 0, depth, visible: false };
  }
  const f = height / 2 / Math.tan(camera.fovY / 2);
  return {
    x: width / 2 + (f * cx) / depth,
    y: height / 2 - (f * cy) / depth,
    depth,
    visible: true,
  };
}

/** Euler XYZ rotation in degrees applied to a point, then scale first. */
export function transformPoint(
  local: Vec3,
  position: Vec3,
  rotationDeg: Vec3,
  scale: Vec3
): Vec3 {
  let [x, y, z] = [local[0] * scale[0], local[1] * scale[1], local[2] * scale[2]];
  const [rx, ry, rz] = rotationDeg.map((d) => (d * Math.PI) / 180) as Vec3;
  // X axis.
  [y, z] = [y * Math.cos(rx) - z * Math.sin(rx), y * Math.sin(rx) + z * Math.cos(rx)];
  // Y axis.
  [x, z] = [x * Math.cos(ry) + z * Math.sin(ry), -x * Math.sin(ry) + z * Math.cos(ry)];
  // Z axis.
  [x, y] = [x * Math.cos(rz) - y * Math.sin(rz), x * Math.sin(rz) + y * Math.cos(rz)];
  return [x + position[0], y + position[1], z + position[2]];
}
