// Side-by-side original/optimized code view.  The optimized pane highlights
// model-reported lines; records whose lines fall outside the code carry a
// "model-reported lines" badge instead of a highlight.

import type { GenerationResult, KernelLines, OptimizationRecord } from './types.js';

export interface DiffView {
  root: HTMLElement;
  highlightRecord(index: number): void;
}

function pane(title: string, lines: Array<[number, string]>, side: 'original' | 'optimized') {
  const wrap = document.createElement('div');
  wrap.className = `code-pane ${side}`;
  const heading = document.createElement('h3');
  heading.textContent = title;
  wrap.append(heading);
  const pre = document.createElement('pre');
  for (const [num, text] of lines) {
    const row = document.createElement('div');
    row.className = 'code-line';
    row.dataset.line = String(num);
    const gutter = document.createElement('span');
    gutter.className = 'gutter';
    gutter.textContent = String(num);
    const code = document.createElement('span');
    code.className = 'code-text';
    code.textContent = text;
    row.append(gutter, code);
    pre.append(row);
  }
  wrap.append(pre);
  return wrap;
}

function numberLines(code: string): Array<[number, string]> {
  const raw = code.replace(/\n$/, '').split('\n');
  return raw.map((text, i) => [i + 1, text]);
}

export function renderDiff(
  container: HTMLElement,
  kernel: KernelLines | undefined,
  result: GenerationResult,
): DiffView {
  const root = document.createElement('div');
  root.className = 'diff-view';
  const originalLines = kernel ? kernel.lines : [];
  const optimizedLines = numberLines(result.optimized_code);
  const original = pane('Original', originalLines, 'original');
  const optimized = pane('Optimized', optimizedLines, 'optimized');
  root.append(original, optimized);
  container.append(root);

  // permanent highlight for every in-range applied record
  for (const record of result.applied) {
    if (record.out_of_range) continue;
    for (const line of record.lines) {
      const row = optimized.querySelector<HTMLElement>(`.code-line[data-line="${line}"]`);
      row?.classList.add('changed');
    }
  }

  function highlightRecord(index: number): void {
    root.querySelectorAll('.focused').forEach((el) => el.classList.remove('focused'));
    const record: OptimizationRecord | undefined =
      index < result.applied.length
        ? result.applied[index]
        : result.deferred[index - result.applied.length];
    if (!record || record.out_of_range) return;
    const target = record.applied ? optimized : original;
    for (const line of record.lines) {
      target.querySelector(`.code-line[data-line="${line}"]`)?.classList.add('focused');
    }
  }

  return { root, highlightRecord };
}
