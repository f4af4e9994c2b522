/**
 * Canvas scatter rendering: class-colored points, star glyphs on queried
 * nodes, and a ring highlight on the pending query.
 */

import type { PointView, ViewState } from "./state.js";

const POSITIVE = [31, 119, 180]; // blue
const NEGATIVE = [214, 39, 40]; // red

/** Diverging color from the predicted probability of the +1 class. */
export function probabilityColor(p: number): string {
  const t = Math.max(0, Math.min(1, p));
  const mix = (a: number, b: number) => Math.round(b + (a - b) * Math.abs(2 * t - 1));
  const base = t >= 0.5 ? POSITIVE : NEGATIVE;
  const r = mix(base[0], 245);
  const g = mix(base[1], 245);
  const b = mix(base[2], 245);
  return `rgb(${r},${g},${b})`;
}

interface Extent {
  xmin: number;
  xmax: number;
  ymin: number;
  ymax: number;
}

export function dataExtent(points: PointView[]): Extent {
  if (!points.length) return { xmin: 0, xmax: 1, ymin: 0, ymax: 1 };
  let xmin = Infinity, xmax = -Infinity, ymin = Infinity, ymax = -Infinity;
  for (const p of points) {
    xmin = Math.min(xmin, p.x);
    xmax = Math.max(xmax, p.x);
    ymin = Math.min(ymin, p.y);
    ymax = Math.max(ymax, p.y);
  }
  const padX = (xmax - xmin || 1) * 0.05;
  const padY = (ymax - ymin || 1) * 0.05;
  return { xmin: xmin - padX, xmax: xmax + padX, ymin: ymin - padY, ymax: ymax + padY };
}

function toCanvas(p: { x: number; y: number }, e: Extent, w: number, h: number) {
  return {
    cx: ((p.x - e.xmin) / (e.xmax - e.xmin)) * w,
    cy: h - ((p.y - e.ymin) / (e.ymax - e.ymin)) * h,
  };
}

function drawStar(ctx: CanvasRenderingContext2D, cx: number, cy: number, r: number) {
  ctx.beginPath();
  for (let i = 0; i < 10; i++) {
    const radius = i % 2 === 0 ? r : r * 0.45;
    const angle = (Math.PI / 5) * i - Math.PI / 2;
    const px = cx + radius * Math.cos(angle);
    const py = cy + radius * Math.sin(angle);
    if (i === 0) ctx.moveTo(px, py);
    else ctx.lineTo(px, py);
  }
  ctx.closePath();
  ctx.fill();
  ctx.stroke();
}

export function renderScatter(canvas: HTMLCanvasElement, view: ViewState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const extent = dataExtent(view.points);

  for (const p of view.points) {
    const { cx, cy } = toCanvas(p, extent, width, height);
    ctx.fillStyle = probabilityColor(p.probability);
    ctx.beginPath();
    ctx.arc(cx, cy, 2.5, 0, 2 * Math.PI);
    ctx.fill();
  }

  ctx.fillStyle = "gold";
  ctx.strokeStyle = "#6b5900";
  ctx.lineWidth = 0.8;
  for (const p of view.points) {
    if (!p.queried) continue;
    const { cx, cy } = toCanvas(p, extent, width, height);
    drawStar(ctx, cx, cy, 6);
  }

  if (view.pending !== null) {
    const p = view.points.find((q) => q.index === view.pending);
    if (p) {
      const { cx, cy } = toCanvas(p, extent, width, height);
      ctx.strokeStyle = "#111";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.arc(cx, cy, 9, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }
}

/** Render a base64 grayscale raster (28x28 for digit data) onto a canvas. */
export function renderDigit(canvas: HTMLCanvasElement, b64: string, side = 28): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const bytes = atob(b64);
  const img = ctx.createImageData(side, side);
  for (let i = 0; i < side * side && i < bytes.length; i++) {
    const v = 255 - bytes.charCodeAt(i); // dark digit on light background
    img.data[4 * i] = v;
    img.data[4 * i + 1] = v;
    img.data[4 * i + 2] = v;
    img.data[4 * i + 3] = 255;
  }
  ctx.putImageData(img, 0, 0);
}
