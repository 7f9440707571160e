// Bare-bones canvas strip chart: one polyline per series over a fixed
// sample window. No axes library — the traces are for eyeballing
// contact events, not measurement.

export interface Series {
  points: number[];
  color: string;
}

// Pixel y for a value, clamped into the drawable band.
export function scaleY(value: number, lo: number, hi: number, height: number): number {
  const span = hi - lo || 1;
  const t = Math.min(1, Math.max(0, (value - lo) / span));
  return (1 - t) * (height - 2) + 1;
}

export function drawChart(
  canvas: HTMLCanvasElement,
  series: Series[],
  lo: number,
  hi: number,
  windowSize: number,
): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.strokeStyle = "#2a2f36";
  ctx.strokeRect(0.5, 0.5, width - 1, height - 1);

  for (const s of series) {
    if (s.points.length < 2) continue;
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.25;
    ctx.beginPath();
    const start = windowSize - s.points.length; // right-align short traces
    for (let i = 0; i < s.points.length; i++) {
      const x = ((start + i) / (windowSize - 1)) * (width - 2) + 1;
      const y = scaleY(s.points[i], lo, hi, height);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    ctx.stroke();
  }
}
