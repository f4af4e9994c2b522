/** Accuracy sparkline: one point per labeling step, drawn on a small canvas. */

export function renderSparkline(canvas: HTMLCanvasElement, values: number[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  if (!values.length) return;

  const lo = Math.min(...values, 0.5);
  const hi = Math.max(...values, 1.0);
  const x = (i: number) =>
    values.length === 1 ? width / 2 : (i / (values.length - 1)) * (width - 8) + 4;
  const y = (v: number) => height - 4 - ((v - lo) / (hi - lo || 1)) * (height - 8);

  ctx.strokeStyle = "#1f77b4";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  values.forEach((v, i) => {
    if (i === 0) ctx.moveTo(x(i), y(v));
    else ctx.lineTo(x(i), y(v));
  });
  ctx.stroke();

  ctx.fillStyle = "#1f77b4";
  values.forEach((v, i) => {
    ctx.beginPath();
    ctx.arc(x(i), y(v), 2, 0, 2 * Math.PI);
    ctx.fill();
  });
}
