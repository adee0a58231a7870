// Frame types for the teleop wire protocol. The JSON Schema files shipped
// with the python package are the normative definitions; the checks here
// mirror them field for field so a frame accepted on one side is accepted
// on the other.

export interface LegAngles {
  hip_roll: number;
  hip_pitch: number;
  hip_yaw: number;
  knee_pitch: number;
}

export interface StateFrame {
  type: "state";
  t: number;
  x: number;
  xdot: number;
  theta: number;
  thetadot: number;
  torque: number;
  joints: { left: LegAngles; right: LegAngles };
  mode: "lqr" | "policy";
}

export interface RoleFrame {
  type: "role";
  role: "commander" | "observer";
}

export interface ErrorFrame {
  type: "error";
  code: string;
}

export type ServerFrame = StateFrame | RoleFrame | ErrorFrame;

export interface CmdFrame {
  type: "cmd";
  vx: number;
  yaw_rate: number;
  pose: string | null;
}

export const MAX_SPEED = 0.5; // m/s, full joystick deflection
export const MAX_YAW_RATE = 1.0; // rad/s, full lateral deflection

const clamp = (v: number, lo: number, hi: number) => Math.min(hi, Math.max(lo, v));

/** Map joystick deflection in [-1, 1]^2 to a command frame. Forward
 * deflection is positive vx; the linear map tops out at MAX_SPEED. */
export function buildCmd(forward: number, lateral: number, pose: string | null): CmdFrame {
  return {
    type: "cmd",
    vx: clamp(forward, -1, 1) * MAX_SPEED,
    yaw_rate: clamp(lateral, -1, 1) * MAX_YAW_RATE,
    pose,
  };
}

function isNum(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

function isLeg(v: unknown): v is LegAngles {
  if (typeof v !== "object" || v === null) return false;
  const leg = v as Record<string, unknown>;
  return (
    isNum(leg.hip_roll) && isNum(leg.hip_pitch) && isNum(leg.hip_yaw) && isNum(leg.knee_pitch)
  );
}

/** Parse one server frame; null means the payload is malformed. */
export function parseServerFrame(text: string): ServerFrame | null {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const frame = doc as Record<string, unknown>;
  switch (frame.type) {
    case "role":
      return frame.role === "commander" || frame.role === "observer"
        ? ({ type: "role", role: frame.role } as RoleFrame)
        : null;
    case "error":
      return typeof frame.code === "string"
        ? ({ type: "error", code: frame.code } as ErrorFrame)
        : null;
    case "state": {
      const joints = frame.joints as Record<string, unknown> | undefined;
      if (
        isNum(frame.t) && isNum(frame.x) && isNum(frame.xdot) &&
        isNum(frame.theta) && isNum(frame.thetadot) && isNum(frame.torque) &&
        (frame.mode === "lqr" || frame.mode === "policy") &&
        joints !== undefined && isLeg(joints.left) && isLeg(joints.right)
      ) {
        return {
          type: "state",
          t: frame.t,
          x: frame.x,
          xdot: frame.xdot,
          theta: frame.theta,
          thetadot: frame.thetadot,
          torque: frame.torque,
          joints: { left: joints.left as LegAngles, right: joints.right as LegAngles },
          mode: frame.mode,
        };
      }
      return null;
    }
    default:
      return null;
  }
}
