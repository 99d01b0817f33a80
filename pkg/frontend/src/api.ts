// Thin typed client over the service JSON API.

import type { BeliefReport, Decision, GenerationResult, Job, SubmitForm } from './types.js';

export class ApiError extends Error {
  status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.status = status;
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = await response.json();
      if (typeof body.detail === 'string') detail = body.detail;
      else if (body.detail) detail = JSON.stringify(body.detail);
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return response.json() as Promise<T>;
}

export class OpalClient {
  constructor(readonly baseUrl: string = '') {}

  async submitJob(form: SubmitForm): Promise<{ id: string }> {
    const data = new FormData();
    data.append('code', form.code, form.codeName);
    data.append('sources', form.sources.join(','));
    data.append('arch', form.arch);
    data.append('input_config', form.inputConfig);
    if (form.seed !== undefined) data.append('seed', String(form.seed));
    if (form.pc) data.append('pc', form.pc, 'pc.json');
    if (form.roofline) data.append('roofline', form.roofline, 'roofline.csv');
    if (form.counters) data.append('counters', form.counters, 'counters.csv');
    if (form.counterDict) data.append('counter_dict', form.counterDict, 'counter_dict.json');
    const response = await fetch(`${this.baseUrl}/api/jobs`, { method: 'POST', body: data });
    return parseOrThrow(response);
  }

  async getJob(id: string): Promise<Job> {
    return parseOrThrow(await fetch(`${this.baseUrl}/api/jobs/${id}`));
  }

  async listJobs(): Promise<{ jobs: Job[] }> {
    return parseOrThrow(await fetch(`${this.baseUrl}/api/jobs`));
  }

  async getResult(id: string): Promise<GenerationResult> {
    return parseOrThrow(await fetch(`${this.baseUrl}/api/jobs/${id}/result`));
  }

  async getBeliefs(id: string): Promise<BeliefReport> {
    return parseOrThrow(await fetch(`${this.baseUrl}/api/jobs/${id}/beliefs`));
  }

  async postDecision(id: string, decision: Decision): Promise<Decision> {
    const response = await fetch(`${this.baseUrl}/api/jobs/${id}/decision`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(decision),
    });
    return parseOrThrow(response);
  }

  /** Poll job state until done or failed (1 s default interval: jobs take seconds). */
  async pollUntilSettled(id: string, intervalMs = 1000, timeoutMs = 120_000): Promise<Job> {
    const deadline = Date.now() + timeoutMs;
    for (;;) {
      const job = await this.getJob(id);
      if (job.state === 'done' || job.state === 'failed') return job;
      if (Date.now() > deadline) throw new ApiError(408, `job ${id} did not settle in time`);
      await new Promise((resolve) => setTimeout(resolve, intervalMs));
    }
  }
}
