/** Thin client over the service's HTTP/JSON endpoints.
 *
 * Every number the dashboard shows comes back through here; there is no
 * client-side feasibility math. The fetch function is injectable so the
 * test suite can run the client against canned responses.
 */

import type {
  FeasibilityTable,
  ModelInfo,
  PlanRequest,
  PlanResponse,
  Question,
  TelemetryRecord,
  WhatifParams,
  WhatifResponse,
} from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Raised for 4xx responses; carries the service's one-line message. */
export class ServiceError extends Error {
  status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let message = `${response.status} ${response.statusText}`;
    try {
      const body = await response.json();
      if (body && typeof body.error === 'string') message = body.error;
    } catch {
      // non-JSON error body; keep the status line
    }
    throw new ServiceError(response.status, message);
  }
  return response.json() as Promise<T>;
}

export class ApiClient {
  base: string;
  fetchFn: FetchLike;

  constructor(base = '', fetchFn: FetchLike = (u, i) => fetch(u, i)) {
    this.base = base.replace(/\/$/, '');
    this.fetchFn = fetchFn;
  }

  private get<T>(path: string): Promise<T> {
    return this.fetchFn(`${this.base}${path}`).then((r) => asJson<T>(r));
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.fetchFn(`${this.base}${path}`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    }).then((r) => asJson<T>(r));
  }

  questions(): Promise<Question[]> {
    return this.get<{ questions: Question[] }>('/questionnaire').then((d) => d.questions);
  }

  models(): Promise<{ models: ModelInfo[]; datasets: { name: string }[] }> {
    return this.get('/models');
  }

  feasibility(): Promise<{ table: FeasibilityTable; methods: string[] }> {
    return this.get('/feasibility');
  }

  plan(req: PlanRequest): Promise<PlanResponse> {
    return this.post('/plan', req);
  }

  whatif(base: WhatifParams, overrides: WhatifParams): Promise<WhatifResponse> {
    return this.post('/whatif', { base, overrides });
  }

  runs(): Promise<string[]> {
    return this.get<{ runs: string[] }>('/runs').then((d) => d.runs);
  }

  telemetry(runId: string, since = 0): Promise<{ records: TelemetryRecord[]; closed: boolean }> {
    return this.get(`/runs/${encodeURIComponent(runId)}/telemetry?since=${since}`);
  }

  /** Subscribe to a run's event stream. Resolves once the stream ends;
   * the returned handle can abort early. Records arrive via onRecord in
   * step order; the stream re-subscribes from the last seen step if the
   * connection drops before the end event. */
  stream(
    runId: string,
    onRecord: (record: TelemetryRecord) => void,
    since = 0,
  ): { done: Promise<void>; abort: () => void } {
    const controller = new AbortController();
    let last = since;

    const subscribe = async (): Promise<void> => {
      const url = `${this.base}/runs/${encodeURIComponent(runId)}/stream?since=${last}`;
      const response = await this.fetchFn(url, { signal: controller.signal });
      if (!response.ok) {
        const body = (await response.json().catch(() => null)) as { error?: string } | null;
        throw new ServiceError(response.status, body?.error ?? response.statusText);
      }
      const ended = await consumeEventStream(response, (event, data) => {
        if (event === 'end') return;
        const record = JSON.parse(data) as TelemetryRecord;
        last = record.step;
        onRecord(record);
      });
      if (!ended && !controller.signal.aborted) return subscribe();
    };

    const done = subscribe().catch((e) => {
      if (!controller.signal.aborted) throw e;
    });
    return { done, abort: () => controller.abort() };
  }
}

/** Parse a text/event-stream body, invoking the callback per event.
 * Returns true if the server sent an explicit end event, false if the
 * connection closed without one. Exported for the tests. */
export async function consumeEventStream(
  response: Response,
  onEvent: (event: string, data: string) => void,
): Promise<boolean> {
  const reader = response.body!.getReader();
  const decoder = new TextDecoder();
  let buffer = '';
  let eventName = 'message';
  let sawEnd = false;

  const handleLine = (line: string) => {
    if (line.startsWith('event: ')) {
      eventName = line.slice('event: '.length).trim();
      if (eventName === 'end') sawEnd = true;
    } else if (line.startsWith('data: ')) {
      onEvent(eventName, line.slice('data: '.length));
      eventName = 'message';
    } else if (line === '') {
      eventName = 'message';
    }
  };

  for (;;) {
    const { value, done } = await reader.read();
    if (done) break;
    buffer += decoder.decode(value, { stream: true });
    const lines = buffer.split('\n');
    buffer = lines.pop()!;
    for (const line of lines) handleLine(line);
    if (sawEnd) {
      await reader.cancel().catch(() => {});
      break;
    }
  }
  if (buffer && !sawEnd) handleLine(buffer);
  return sawEnd;
}
