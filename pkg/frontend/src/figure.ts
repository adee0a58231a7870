// Side-view stick figure: wheel, tilted body and the left-leg chain
// rebuilt from the joint fields of the latest state frame.

import { StateFrame } from "./protocol.js";

const THIGH = 0.3;
const CALF = 0.3;
const WHEEL_R = 0.08;
const BODY = 0.35;

export class RobotFigure {
  constructor(private canvas: HTMLCanvasElement, private scale = 220) {}

  draw(frame: StateFrame | null): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const w = this.canvas.width;
    const h = this.canvas.height;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#111";
    ctx.fillRect(0, 0, w, h);

    const groundY = h - 30;
    ctx.strokeStyle = "#444";
    ctx.beginPath();
    ctx.moveTo(0, groundY);
    ctx.lineTo(w, groundY);
    ctx.stroke();
    if (frame === null) return;

    const s = this.scale;
    // wheel stays centered; the ground scrolls by x so travel is visible
    const wheelX = w / 2;
    const wheelY = groundY - WHEEL_R * s;
    ctx.strokeStyle = "#666";
    for (let k = -8; k <= 8; k++) {
      const gx = wheelX + ((k - (frame.x % 1)) * 0.5) * s;
      ctx.beginPath();
      ctx.moveTo(gx, groundY);
      ctx.lineTo(gx - 8, groundY + 8);
      ctx.stroke();
    }

    ctx.strokeStyle = "#9cf";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(wheelX, wheelY, WHEEL_R * s, 0, 2 * Math.PI);
    ctx.stroke();
    const spoke = frame.x / WHEEL_R;
    ctx.beginPath();
    ctx.moveTo(wheelX, wheelY);
    ctx.lineTo(wheelX + WHEEL_R * s * Math.cos(spoke), wheelY + WHEEL_R * s * Math.sin(spoke));
    ctx.stroke();

    // leg chain from the axle up: beta and knee from the left leg
    const beta = frame.joints.left.hip_pitch;
    const knee = frame.joints.left.knee_pitch;
    const tilt = frame.theta;
    // calf points up from the axle; angles accumulate like the sagittal chain
    const calfAngle = tilt + beta + knee;
    const kneeX = wheelX + CALF * s * Math.sin(calfAngle);
    const kneeY = wheelY - CALF * s * Math.cos(calfAngle);
    const thighAngle = tilt + beta;
    const hipX = kneeX + THIGH * s * Math.sin(thighAngle);
    const hipY = kneeY - THIGH * s * Math.cos(thighAngle);

    ctx.strokeStyle = "#fc6";
    ctx.beginPath();
    ctx.moveTo(wheelX, wheelY);
    ctx.lineTo(kneeX, kneeY);
    ctx.lineTo(hipX, hipY);
    ctx.stroke();

    // body from the hip, leaning by theta
    const topX = hipX + BODY * s * Math.sin(tilt);
    const topY = hipY - BODY * s * Math.cos(tilt);
    ctx.strokeStyle = "#6f9";
    ctx.lineWidth = 4;
    ctx.beginPath();
    ctx.moveTo(hipX, hipY);
    ctx.lineTo(topX, topY);
    ctx.stroke();
    ctx.beginPath();
    ctx.arc(topX, topY, 8, 0, 2 * Math.PI);
    ctx.stroke();
  }
}
