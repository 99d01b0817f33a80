// SVG chart renderers for the three belief views.  Pure DOM construction so
// the same code runs in the browser and under jsdom in tests.

import type { BeliefReport } from './types.js';

const SVG_NS = 'http://www.w3.org/2000/svg';

function svgElement<K extends keyof SVGElementTagNameMap>(
  tag: K,
  attrs: Record<string, string | number>,
): SVGElementTagNameMap[K] {
  const el = document.createElementNS(SVG_NS, tag);
  for (const [key, value] of Object.entries(attrs)) {
    el.setAttribute(key, String(value));
  }
  return el;
}

/** Warm color ramp: low scores dark red, high scores bright yellow. */
function flameColor(score: number): string {
  const hue = Math.round(score * 55); // 0 = red, 55 = yellow
  const light = 35 + Math.round(score * 20);
  return `hsl(${hue}, 90%, ${light}%)`;
}

/** Horizontal bar chart of the top-N keyword scores, highest first. */
export function renderKeywordScoreChart(report: BeliefReport, topN = 20): SVGSVGElement {
  const entries = report.keywords.slice(0, topN);
  const rowHeight = 22;
  const labelWidth = 240;
  const barWidth = 420;
  const height = Math.max(entries.length * rowHeight, rowHeight);
  const svg = svgElement('svg', {
    width: labelWidth + barWidth + 60,
    height,
    class: 'chart keyword-score-chart',
    role: 'img',
  });
  entries.forEach((entry, i) => {
    const y = i * rowHeight;
    const width = Math.max(entry.scaled_score * barWidth, 1);
    const label = svgElement('text', {
      x: labelWidth - 8,
      y: y + rowHeight / 2 + 4,
      'text-anchor': 'end',
      class: 'bar-label',
    });
    label.textContent = entry.phrase;
    const bar = svgElement('rect', {
      x: labelWidth,
      y: y + 3,
      width,
      height: rowHeight - 6,
      fill: flameColor(entry.scaled_score),
      class: 'score-bar',
      'data-phrase': entry.phrase,
      'data-score': entry.scaled_score.toFixed(3),
    });
    const value = svgElement('text', {
      x: labelWidth + width + 6,
      y: y + rowHeight / 2 + 4,
      class: 'bar-value',
    });
    value.textContent = entry.scaled_score.toFixed(2);
    svg.append(label, bar, value);
  });
  return svg;
}

/** Vertical histogram of raw token beliefs across the fixed-width bins. */
export function renderBeliefHistogram(report: BeliefReport): SVGSVGElement {
  const bins = report.histogram;
  const barWidth = 26;
  const chartHeight = 160;
  const axis = 22;
  const maxCount = Math.max(...bins.map((b) => b.count), 1);
  const svg = svgElement('svg', {
    width: bins.length * barWidth + 40,
    height: chartHeight + axis + 16,
    class: 'chart belief-histogram',
    role: 'img',
  });
  bins.forEach((bin, i) => {
    const h = (bin.count / maxCount) * chartHeight;
    const bar = svgElement('rect', {
      x: 30 + i * barWidth,
      y: chartHeight - h + 8,
      width: barWidth - 3,
      height: Math.max(h, bin.count > 0 ? 1 : 0),
      fill: '#4f7cac',
      class: 'hist-bar',
      'data-lo': bin.lo.toFixed(2),
      'data-count': bin.count,
    });
    svg.append(bar);
    if (i % 5 === 0 || i === bins.length - 1) {
      const tick = svgElement('text', {
        x: 30 + i * barWidth,
        y: chartHeight + axis,
        class: 'axis-label',
      });
      tick.textContent = bin.lo.toFixed(2);
      svg.append(tick);
    }
  });
  return svg;
}

/** Bar chart of keyword occurrence counts (recurring reasoning patterns). */
export function renderKeywordFrequencyChart(report: BeliefReport, topN = 20): SVGSVGElement {
  const entries = [...report.keywords]
    .sort((a, b) => b.count - a.count || a.phrase.localeCompare(b.phrase))
    .slice(0, topN);
  const rowHeight = 22;
  const labelWidth = 240;
  const barWidth = 420;
  const maxCount = Math.max(...entries.map((e) => e.count), 1);
  const svg = svgElement('svg', {
    width: labelWidth + barWidth + 60,
    height: Math.max(entries.length * rowHeight, rowHeight),
    class: 'chart keyword-frequency-chart',
    role: 'img',
  });
  entries.forEach((entry, i) => {
    const y = i * rowHeight;
    const width = Math.max((entry.count / maxCount) * barWidth, 1);
    const label = svgElement('text', {
      x: labelWidth - 8,
      y: y + rowHeight / 2 + 4,
      'text-anchor': 'end',
      class: 'bar-label',
    });
    label.textContent = entry.phrase;
    const bar = svgElement('rect', {
      x: labelWidth,
      y: y + 3,
      width,
      height: rowHeight - 6,
      fill: '#6aa84f',
      class: 'freq-bar',
      'data-phrase': entry.phrase,
      'data-count': entry.count,
    });
    const value = svgElement('text', {
      x: labelWidth + width + 6,
      y: y + rowHeight / 2 + 4,
      class: 'bar-value',
    });
    value.textContent = String(entry.count);
    svg.append(label, bar, value);
  });
  return svg;
}
