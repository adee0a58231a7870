// Page bootstrap: connect, wire the joystick and pose buttons to the
// session, and repaint telemetry on each animation frame.

import { StripChart } from "./charts.js";
import { RobotFigure } from "./figure.js";
import { VirtualJoystick } from "./joystick.js";
import { TeleopSession } from "./session.js";

const POSES = ["straight", "lean", "squat", "splay"];

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function serverUrl(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get("server") ?? "ws://127.0.0.1:8765/";
}

function main(): void {
  const session = new TeleopSession(serverUrl());
  session.connect();

  const joystick = new VirtualJoystick(
    byId<HTMLCanvasElement>("joystick"),
    (fwd, lat) => session.setJoystick(fwd, lat),
  );
  const tiltChart = new StripChart(byId<HTMLCanvasElement>("chart-tilt"), "tilt rad", 0.3);
  const speedChart = new StripChart(byId<HTMLCanvasElement>("chart-speed"), "xdot m/s", 0.6, "#fc6");
  const figure = new RobotFigure(byId<HTMLCanvasElement>("figure"));

  const poseBar = byId<HTMLDivElement>("poses");
  for (const pose of POSES) {
    const button = document.createElement("button");
    button.textContent = pose;
    button.addEventListener("click", () => session.setPose(pose));
    poseBar.appendChild(button);
  }

  const status = byId<HTMLSpanElement>("status");
  const roleBadge = byId<HTMLSpanElement>("role");
  const modeBadge = byId<HTMLSpanElement>("mode");
  const stale = byId<HTMLSpanElement>("stale");
  const errorBox = byId<HTMLSpanElement>("error");
  const torqueBar = byId<HTMLDivElement>("torque-fill");

  const render = () => {
    const model = session.model;
    status.textContent = model.status;
    status.className = model.status;
    roleBadge.textContent = model.role;
    roleBadge.className = model.role === "commander" ? "commander" : "observer";
    modeBadge.textContent = model.latest?.mode ?? "-";
    stale.textContent = model.isStale() ? "STALE" : "live";
    stale.className = model.isStale() ? "stale" : "live";
    errorBox.textContent = model.lastError ?? "";
    poseBar.querySelectorAll("button").forEach((button) => {
      (button as HTMLButtonElement).disabled = !session.isCommander;
    });

    tiltChart.draw(model.tilt);
    speedChart.draw(model.speed);
    figure.draw(model.latest);
    joystick.draw(session.isCommander);

    const torque = model.latest?.torque ?? 0;
    const frac = Math.min(1, Math.abs(torque) / 36);
    torqueBar.style.width = `${(frac * 100).toFixed(1)}%`;
    torqueBar.className = frac >= 0.999 ? "saturated" : "";

    requestAnimationFrame(render);
  };
  requestAnimationFrame(render);
}

main();
