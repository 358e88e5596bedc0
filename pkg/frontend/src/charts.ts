/** Chart series bookkeeping and SVG line rendering.
 *
 * Series are append-only and sorted by step; a record that arrives out
 * of order or twice (stream reconnect overlap) is dropped rather than
 * spliced in, which keeps the point count equal to the telemetry record
 * count. Rendering is a pure string function so it can be tested
 * without a DOM.
 */

import type { TelemetryRecord } from './types.js';

export type Metric = 'loss' | 'lr' | 'tokens';

export const METRICS: Metric[] = ['loss', 'lr', 'tokens'];

export interface Point {
  step: number;
  value: number;
}

export class ChartSeries {
  runId: string;
  metric: Metric;
  points: Point[] = [];

  constructor(runId: string, metric: Metric) {
    this.runId = runId;
    this.metric = metric;
  }

  get lastStep(): number {
    return this.points.length ? this.points[this.points.length - 1].step : 0;
  }

  /** Append one record's value; ignores steps at or before the last. */
  push(record: TelemetryRecord): boolean {
    if (record.step <= this.lastStep) return false;
    this.points.push({ step: record.step, value: record[this.metric] });
    return true;
  }
}

/** One series per metric for a run, fed from the same record stream. */
export class RunCharts {
  series: Record<Metric, ChartSeries>;

  constructor(runId: string) {
    this.series = {
      loss: new ChartSeries(runId, 'loss'),
      lr: new ChartSeries(runId, 'lr'),
      tokens: new ChartSeries(runId, 'tokens'),
    };
  }

  push(record: TelemetryRecord): void {
    for (const metric of METRICS) this.series[metric].push(record);
  }

  get pointCount(): number {
    return this.series.loss.points.length;
  }
}

export interface SvgOptions {
  width?: number;
  height?: number;
  stroke?: string;
}

/** Map points into an SVG polyline path, with 4% padding on each side.
 * Returns the "d" attribute for an svg <path>. */
export function linePath(points: Point[], width: number, height: number): string {
  if (points.length === 0) return '';
  const xs = points.map((p) => p.step);
  const ys = points.map((p) => p.value);
  const xMin = Math.min(...xs);
  const xMax = Math.max(...xs);
  const yMin = Math.min(...ys);
  const yMax = Math.max(...ys);
  const padX = width * 0.04;
  const padY = height * 0.08;
  const spanX = xMax - xMin || 1;
  const spanY = yMax - yMin || 1;
  const sx = (x: number) => padX + ((x - xMin) / spanX) * (width - 2 * padX);
  const sy = (y: number) => height - padY - ((y - yMin) / spanY) * (height - 2 * padY);
  return points
    .map((p, i) => `${i === 0 ? 'M' : 'L'}${sx(p.step).toFixed(1)},${sy(p.value).toFixed(1)}`)
    .join(' ');
}

const FORMAT: Record<Metric, (v: number) => string> = {
  loss: (v) => v.toFixed(4),
  lr: (v) => v.toPrecision(3),
  tokens: (v) => String(Math.round(v)),
};

export function chartSvg(series: ChartSeries, opts: SvgOptions = {}): string {
  const width = opts.width ?? 420;
  const height = opts.height ?? 160;
  const stroke = opts.stroke ?? 'var(--accent)';
  const path = linePath(series.points, width, height);
  const n = series.points.length;
  const latest = n ? FORMAT[series.metric](series.points[n - 1].value) : '–';
  return `<svg viewBox="0 0 ${width} ${height}" preserveAspectRatio="none" role="img" aria-label="${series.metric} over steps">
  <path d="${path}" fill="none" stroke="${stroke}" stroke-width="1.5" vector-effect="non-scaling-stroke"/>
</svg>
<div class="chart-meta"><span class="chart-metric">${series.metric}</span><span class="chart-latest">${latest}</span><span class="chart-count">${n} pts</span></div>`;
}
