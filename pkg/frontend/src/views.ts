// Result-view assembly: diff, record lists with decision controls, insight
// provenance panels, the three belief charts, and the decision log.

import { OpalClient } from './api.js';
import { renderBeliefHistogram, renderKeywordFrequencyChart, renderKeywordScoreChart } from './charts.js';
import { renderDiff } from './diff.js';
import type { BeliefReport, Decision, GenerationResult, Job, OptimizationRecord } from './types.js';

export interface InsightSet {
  roofline_summary: string | null;
  stall_summary: string | null;
  counter_summary: string | null;
  provenance: Record<string, string[]>;
}

const INSIGHT_TITLES: Record<string, string> = {
  roofline_summary: 'Roofline analysis',
  stall_summary: 'Stall sampling',
  counter_summary: 'Key hardware events',
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Tokens (4+ chars) shared between a record's reason and an insight text. */
export function provenanceSlots(reason: string, insights: InsightSet | undefined): string[] {
  if (!insights) return [];
  const words = new Set(
    reason
      .toLowerCase()
      .split(/[^a-z0-9_.]+/)
      .filter((w) => w.length >= 4),
  );
  const slots: string[] = [];
  for (const slot of Object.keys(INSIGHT_TITLES) as Array<keyof InsightSet>) {
    const text = insights[slot];
    if (typeof text !== 'string' || !text) continue;
    const insightWords = new Set(text.toLowerCase().split(/[^a-z0-9_.]+/));
    for (const word of words) {
      if (insightWords.has(word)) {
        slots.push(slot);
        break;
      }
    }
  }
  return slots;
}

export function renderFailedJob(container: HTMLElement, job: Job): void {
  const box = el('div', 'error-box');
  box.append(el('h3', undefined, `job failed in stage: ${job.error?.stage ?? 'unknown'}`));
  box.append(el('pre', 'error-message', `${job.error?.type}: ${job.error?.message}`));
  container.append(box);
}

export function renderDecisionLog(container: HTMLElement, decisions: Decision[]): void {
  const existing = container.querySelector('.decision-log');
  existing?.remove();
  const table = el('table', 'decision-log');
  const head = el('tr');
  for (const title of ['record', 'action', 'note']) head.append(el('th', undefined, title));
  table.append(head);
  for (const decision of decisions) {
    const row = el('tr', `decision-row action-${decision.action}`);
    row.append(el('td', undefined, String(decision.record_index)));
    row.append(el('td', undefined, decision.action));
    row.append(el('td', undefined, decision.note));
    table.append(row);
  }
  container.append(table);
}

function recordRow(
  record: OptimizationRecord,
  index: number,
  insights: InsightSet | undefined,
  onSelect: (index: number, slots: string[]) => void,
  onDecision: (index: number, action: Decision['action'], note: string) => void,
): HTMLElement {
  const row = el('div', `record ${record.applied ? 'applied' : 'deferred'}`);
  row.dataset.index = String(index);
  const header = el('div', 'record-header');
  header.append(el('span', 'record-lines', `lines ${record.lines.join(', ')}`));
  if (record.out_of_range) {
    header.append(el('span', 'badge out-of-range', 'model-reported lines'));
  }
  row.append(header);
  row.append(el('p', 'record-reason', record.reason));
  header.addEventListener('click', () => onSelect(index, provenanceSlots(record.reason, insights)));

  const controls = el('div', 'decision-controls');
  const note = el('input', 'decision-note') as HTMLInputElement;
  note.placeholder = 'note';
  for (const action of ['accept', 'override', 'reject'] as const) {
    const button = el('button', `decision-button ${action}`, action);
    button.addEventListener('click', () => onDecision(index, action, note.value));
    controls.append(button);
  }
  controls.append(note);
  row.append(controls);
  return row;
}

export interface ResultViewData {
  job: Job;
  result: GenerationResult;
  beliefs: BeliefReport | null;
  insights?: InsightSet;
}

export function renderResultView(
  container: HTMLElement,
  data: ResultViewData,
  client: OpalClient,
  onDecisionRecorded?: () => void,
): void {
  container.replaceChildren();
  const { job, result, beliefs } = data;
  const insights = data.insights ?? (job as Job & { insights?: InsightSet }).insights;

  if (job.state === 'failed') {
    renderFailedJob(container, job);
    return;
  }

  const diffSection = el('section', 'section diff-section');
  diffSection.append(el('h2', undefined, 'Diagnostic-to-edit chain'));
  const diff = renderDiff(diffSection, job.kernel, result);
  container.append(diffSection);

  // insight panels
  const insightSection = el('section', 'section insights-section');
  insightSection.append(el('h2', undefined, 'Triggering insights'));
  if (insights) {
    for (const [slot, title] of Object.entries(INSIGHT_TITLES)) {
      const text = (insights as unknown as Record<string, string | null>)[slot];
      if (!text) continue;
      const panel = el('div', 'insight-panel');
      panel.dataset.slot = slot;
      panel.append(el('h4', undefined, title));
      panel.append(el('pre', undefined, text));
      insightSection.append(panel);
    }
  }
  container.append(insightSection);

  const selectRecord = (index: number, slots: string[]) => {
    diff.highlightRecord(index);
    insightSection
      .querySelectorAll('.insight-panel')
      .forEach((panel) => panel.classList.remove('linked'));
    for (const slot of slots) {
      insightSection
        .querySelector(`.insight-panel[data-slot="${slot}"]`)
        ?.classList.add('linked');
    }
  };

  const recordDecision = async (index: number, action: Decision['action'], note: string) => {
    try {
      await client.postDecision(job.id, { record_index: index, action, note });
      const refreshed = await client.getJob(job.id);
      renderDecisionLog(decisionSection, refreshed.decisions ?? []);
      onDecisionRecorded?.();
    } catch (error) {
      const message = error instanceof Error ? error.message : String(error);
      decisionSection.querySelector('.decision-error')?.remove();
      decisionSection.append(el('p', 'decision-error', `decision not recorded: ${message}`));
    }
  };

  const recordsSection = el('section', 'section records-section');
  recordsSection.append(el('h2', undefined, `Applied changes (${result.applied.length})`));
  result.applied.forEach((record, i) =>
    recordsSection.append(recordRow(record, i, insights, selectRecord, recordDecision)),
  );
  recordsSection.append(el('h2', undefined, `Deferred suggestions (${result.deferred.length})`));
  result.deferred.forEach((record, i) =>
    recordsSection.append(
      recordRow(record, result.applied.length + i, insights, selectRecord, recordDecision),
    ),
  );
  container.append(recordsSection);

  const chartsSection = el('section', 'section charts-section');
  chartsSection.append(el('h2', undefined, 'Belief tracing'));
  if (beliefs) {
    const score = el('div', 'chart-block keyword-score');
    score.append(el('h4', undefined, 'Keyword Score (top 20)'));
    score.append(renderKeywordScoreChart(beliefs, 20));
    const hist = el('div', 'chart-block belief-distribution');
    hist.append(el('h4', undefined, 'Belief Distribution'));
    hist.append(renderBeliefHistogram(beliefs));
    const freq = el('div', 'chart-block keyword-distribution');
    freq.append(el('h4', undefined, 'Keyword Distribution'));
    freq.append(renderKeywordFrequencyChart(beliefs, 20));
    chartsSection.append(score, hist, freq);
  } else {
    chartsSection.append(
      el('p', 'no-beliefs', 'No belief report: the backend omitted token logprobs.'),
    );
  }
  container.append(chartsSection);

  const decisionSection = el('section', 'section decisions-section');
  decisionSection.append(el('h2', undefined, 'Decision log'));
  container.append(decisionSection);
  renderDecisionLog(decisionSection, job.decisions ?? []);
}
