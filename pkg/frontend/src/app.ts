// Browser entry point: submission form, job list, polling, result view.

import { ApiError, OpalClient } from './api.js';
import { renderResultView } from './views.js';
import type { Job, SubmitForm } from './types.js';

const NO_INSIGHT_WARNING =
  'No diagnostic source selected: without performance context the model ' +
  'typically produces no optimizations. Submission is still allowed.';

function fileOf(form: HTMLFormElement, name: string): File | undefined {
  const input = form.querySelector<HTMLInputElement>(`input[name="${name}"]`);
  const file = input?.files?.[0];
  return file && file.size > 0 ? file : undefined;
}

export function readForm(form: HTMLFormElement): SubmitForm {
  const code = fileOf(form, 'code');
  if (!code) throw new ApiError(422, 'select a kernel source file');
  const sources = Array.from(
    form.querySelectorAll<HTMLInputElement>('input[name="sources"]:checked'),
  ).map((box) => box.value);
  const arch = (form.querySelector<HTMLInputElement>('input[name="arch"]')?.value ?? '').trim();
  const inputConfig = (
    form.querySelector<HTMLInputElement>('input[name="input_config"]')?.value ?? ''
  ).trim();
  const seedRaw = form.querySelector<HTMLInputElement>('input[name="seed"]')?.value ?? '';
  return {
    code,
    codeName: code.name,
    sources,
    arch,
    inputConfig,
    seed: seedRaw === '' ? undefined : Number(seedRaw),
    pc: fileOf(form, 'pc'),
    roofline: fileOf(form, 'roofline'),
    counters: fileOf(form, 'counters'),
    counterDict: fileOf(form, 'counter_dict'),
  };
}

export function updateSourceWarning(form: HTMLFormElement, banner: HTMLElement): void {
  const any = form.querySelectorAll('input[name="sources"]:checked').length > 0;
  banner.textContent = any ? '' : NO_INSIGHT_WARNING;
  banner.classList.toggle('visible', !any);
}

async function showJob(client: OpalClient, id: string, container: HTMLElement): Promise<void> {
  const job = await client.pollUntilSettled(id);
  if (job.state === 'failed') {
    renderResultView(container, { job, result: null as never, beliefs: null }, client);
    return;
  }
  const result = await client.getResult(id);
  let beliefs = null;
  try {
    beliefs = await client.getBeliefs(id);
  } catch (error) {
    if (!(error instanceof ApiError && error.status === 404)) throw error;
  }
  renderResultView(container, { job, result, beliefs }, client);
}

async function refreshJobList(client: OpalClient, list: HTMLElement, open: (id: string) => void) {
  const { jobs } = await client.listJobs();
  list.replaceChildren();
  for (const job of jobs.slice().reverse()) {
    const item = document.createElement('li');
    item.className = `job-item state-${job.state}`;
    const link = document.createElement('a');
    link.href = `#${job.id}`;
    link.textContent = `${job.id} [${job.state}]`;
    link.addEventListener('click', (event) => {
      event.preventDefault();
      open(job.id);
    });
    item.append(link);
    list.append(item);
  }
}

export function main(): void {
  const client = new OpalClient('');
  const form = document.querySelector<HTMLFormElement>('#submit-form')!;
  const banner = document.querySelector<HTMLElement>('#source-warning')!;
  const status = document.querySelector<HTMLElement>('#status')!;
  const container = document.querySelector<HTMLElement>('#result')!;
  const jobList = document.querySelector<HTMLElement>('#job-list')!;

  const open = (id: string) => {
    status.textContent = `job ${id}: running`;
    showJob(client, id, container)
      .then(() => {
        status.textContent = `job ${id}: finished`;
        return refreshJobList(client, jobList, open);
      })
      .catch((error: unknown) => {
        status.textContent = `error: ${error instanceof Error ? error.message : error}`;
      });
  };

  form.querySelectorAll('input[name="sources"]').forEach((box) =>
    box.addEventListener('change', () => updateSourceWarning(form, banner)),
  );
  updateSourceWarning(form, banner);

  form.addEventListener('submit', (event) => {
    event.preventDefault();
    let payload: SubmitForm;
    try {
      payload = readForm(form);
    } catch (error) {
      status.textContent = `error: ${error instanceof Error ? error.message : error}`;
      return;
    }
    status.textContent = 'submitting...';
    client
      .submitJob(payload)
      .then(({ id }) => open(id))
      .catch((error: unknown) => {
        status.textContent = `error: ${error instanceof Error ? error.message : error}`;
      });
  });

  refreshJobList(client, jobList, open).catch(() => {
    status.textContent = 'service unreachable';
  });
}

if (typeof window !== 'undefined' && typeof document !== 'undefined' && document.readyState !== 'loading') {
  if (document.querySelector('#submit-form')) main();
} else if (typeof document !== 'undefined') {
  document.addEventListener('DOMContentLoaded', () => {
    if (document.querySelector('#submit-form')) main();
  });
}
