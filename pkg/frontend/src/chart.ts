// SVG chart of the transformed belief and threshold over time.
//
// zeta is a plain polyline; tau is drawn stepwise-constant (it only moves
// at feedback events); rounds flagged anomalous get distinct markers, with
// hollow markers where ground truth (if present) disagrees.  Pure string
// rendering keeps this testable without a DOM.

import type { StreamRecord } from "./types.js";

export interface ChartOptions {
  width?: number;
  height?: number;
  padding?: number;
}

function scale(
  value: number,
  lo: number,
  hi: number,
  outLo: number,
  outHi: number,
): number {
  if (hi === lo) return (outLo + outHi) / 2;
  return outLo + ((value - lo) / (hi - lo)) * (outHi - outLo);
}

export function renderChart(
  records: StreamRecord[],
  opts: ChartOptions = {},
): string {
  const width = opts.width ?? 900;
  const height = opts.height ?? 300;
  const pad = opts.padding ?? 30;
  if (records.length === 0) {
    return `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" data-points="0"></svg>`;
  }
  const ts = records.map((r) => r.t);
  const values = records.flatMap((r) => [r.zeta, r.tau]);
  const tLo = Math.min(...ts);
  const tHi = Math.max(...ts);
  const vLo = Math.min(...values);
  const vHi = Math.max(...values);
  const x = (t: number) => scale(t, tLo, tHi, pad, width - pad);
  const y = (v: number) => scale(v, vLo, vHi, height - pad, pad);

  const zetaPath = records
    .map((r, i) => `${i === 0 ? "M" : "L"}${x(r.t).toFixed(2)},${y(r.zeta).toFixed(2)}`)
    .join(" ");

  // stepwise tau: horizontal to the next timestep, then vertical
  let tauPath = "";
  for (let i = 0; i < records.length; i++) {
    const r = records[i]!;
    const px = x(r.t).toFixed(2);
    const py = y(r.tau).toFixed(2);
    if (i === 0) {
      tauPath += `M${px},${py}`;
    } else {
      tauPath += ` H${px} V${py}`;
    }
  }
  const last = records[records.length - 1]!;
  tauPath += ` H${x(last.t).toFixed(2)}`;

  const markers = records
    .filter((r) => r.y_hat === 1)
    .map((r) => {
      const wrong = r.y_true !== undefined && r.y_true !== r.y_hat;
      const fill = wrong ? "none" : "#c0392b";
      return (
        `<circle class="flag" cx="${x(r.t).toFixed(2)}" cy="${y(r.zeta).toFixed(2)}" ` +
        `r="3" fill="${fill}" stroke="#c0392b" data-t="${r.t}"/>`
      );
    })
    .join("");

  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
    `viewBox="0 0 ${width} ${height}" data-points="${records.length}">` +
    `<path class="zeta" d="${zetaPath}" fill="none" stroke="#2c3e50" stroke-width="1"/>` +
    `<path class="tau" d="${tauPath}" fill="none" stroke="#e67e22" stroke-width="1.5"/>` +
    markers +
    `</svg>`
  );
}

/** Timesteps where the drawn tau changes level; the chart promises these
 * coincide with applied feedback events. */
export function tauChangePoints(records: StreamRecord[]): number[] {
  const out: number[] = [];
  for (let i = 1; i < records.length; i++) {
    if (records[i]!.tau !== records[i - 1]!.tau) out.push(records[i]!.t);
  }
  return out;
}
