// On-screen joystick: pointer-driven pad that reports deflection in
// [-1, 1]^2 and snaps back to center on release.

export class VirtualJoystick {
  private active = false;
  private fx = 0; // forward deflection, up = +1
  private lx = 0; // lateral deflection, right = +1

  constructor(
    private canvas: HTMLCanvasElement,
    private onChange: (forward: number, lateral: number) => void,
  ) {
    canvas.addEventListener("pointerdown", (ev) => {
      this.active = true;
      canvas.setPointerCapture(ev.pointerId);
      this.track(ev);
    });
    canvas.addEventListener("pointermove", (ev) => {
      if (this.active) this.track(ev);
    });
    const release = (ev: PointerEvent) => {
      if (!this.active) return;
      this.active = false;
      canvas.releasePointerCapture(ev.pointerId);
      this.fx = 0;
      this.lx = 0;
      this.onChange(0, 0);
    };
    canvas.addEventListener("pointerup", release);
    canvas.addEventListener("pointercancel", release);
  }

  private track(ev: PointerEvent): void {
    const rect = this.canvas.getBoundingClientRect();
    const cx = rect.width / 2;
    const cy = rect.height / 2;
    const radius = Math.min(cx, cy) - 8;
    const dx = ev.clientX - rect.left - cx;
    const dy = ev.clientY - rect.top - cy;
    this.lx = Math.max(-1, Math.min(1, dx / radius));
    this.fx = Math.max(-1, Math.min(1, -dy / radius));
    this.onChange(this.fx, this.lx);
  }

  draw(enabled: boolean): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const w = this.canvas.width;
    const h = this.canvas.height;
    const cx = w / 2;
    const cy = h / 2;
    const radius = Math.min(cx, cy) - 8;
    ctx.clearRect(0, 0, w, h);
    ctx.strokeStyle = enabled ? "#8ab" : "#555";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(cx, cy, radius, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(cx - radius, cy);
    ctx.lineTo(cx + radius, cy);
    ctx.moveTo(cx, cy - radius);
    ctx.lineTo(cx, cy + radius);
    ctx.strokeStyle = "#333";
    ctx.lineWidth = 1;
    ctx.stroke();
    const kx = cx + this.lx * radius;
    const ky = cy - this.fx * radius;
    ctx.fillStyle = enabled ? (this.active ? "#6cf" : "#47a") : "#444";
    ctx.beginPath();
    ctx.arc(kx, ky, 14, 0, 2 * Math.PI);
    ctx.fill();
  }
}
