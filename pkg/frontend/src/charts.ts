// Canvas strip chart for one rolling telemetry series.

import { HistoryBuffer, HISTORY_SECONDS } from "./model.js";

export class StripChart {
  constructor(
    private canvas: HTMLCanvasElement,
    private label: string,
    private range: number, // symmetric vertical range +-range
    private color = "#6cf",
  ) {}

  draw(series: HistoryBuffer): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const w = this.canvas.width;
    const h = this.canvas.height;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#111";
    ctx.fillRect(0, 0, w, h);
    ctx.strokeStyle = "#333";
    ctx.beginPath();
    ctx.moveTo(0, h / 2);
    ctx.lineTo(w, h / 2);
    ctx.stroke();

    const times = series.times();
    const values = series.values();
    if (times.length >= 2) {
      const tEnd = times[times.length - 1];
      const tStart = tEnd - HISTORY_SECONDS;
      ctx.strokeStyle = this.color;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      for (let i = 0; i < times.length; i++) {
        const px = ((times[i] - tStart) / HISTORY_SECONDS) * w;
        const py = h / 2 - (values[i] / this.range) * (h / 2 - 4);
        if (i === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
      }
      ctx.stroke();
    }

    ctx.fillStyle = "#aaa";
    ctx.font = "12px monospace";
    const latest = series.latest();
    const suffix = latest === undefined ? "" : ` ${latest.toFixed(3)}`;
    ctx.fillText(`${this.label}${suffix}`, 6, 14);
  }
}
