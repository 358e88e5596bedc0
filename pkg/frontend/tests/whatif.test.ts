import { describe, expect, it } from 'vitest';

import { ApiClient } from '../src/api.js';
import type { WhatifResponse } from '../src/types.js';
import { WhatifPanel, baseFromConfig, worldShorthand } from '../src/whatif.js';

describe('worldShorthand', () => {
  it('renders single and multi device layouts', () => {
    expect(worldShorthand({ count: 1, per_device_mem: 8 * 2 ** 30 })).toBe('8 GB');
    expect(worldShorthand({ count: 2, per_device_mem: 48 * 2 ** 30 })).toBe('2x48 GB');
  });
});

describe('baseFromConfig', () => {
  it('takes model, method, and world from the plan config', () => {
    const base = baseFromConfig({
      model: 'Llama-33B', method: 'full16',
      world: { count: 2, per_device_mem: 48 * 2 ** 30 },
    } as never);
    expect(base).toEqual({ model: 'Llama-33B', method: 'full16', gpus: '2x48 GB' });
  });
});

function fakeWhatifApi(log: { base: unknown; overrides: unknown }[]): ApiClient {
  return new ApiClient('', async (_url, init) => {
    const body = JSON.parse(String(init!.body)) as {
      base: Record<string, string>;
      overrides: Record<string, string>;
    };
    log.push(body);
    const merged = { ...body.base, ...body.overrides };
    const feasible = merged.gpus !== '24 GB';
    const response: WhatifResponse = {
      model: merged.model,
      size_bucket: '33B',
      method: merged.method,
      gpus: merged.gpus,
      verdict: {
        feasible,
        satisfied_layout: feasible ? '2x48' : null,
        required_layouts: ['2x48'],
      },
      diff: Object.fromEntries(
        Object.entries(body.overrides)
          .filter(([k, v]) => body.base[k] !== v)
          .map(([k, v]) => [k, { from: body.base[k] ?? null, to: v }]),
      ),
    };
    return new Response(JSON.stringify(response), { status: 200 });
  });
}

describe('WhatifPanel', () => {
  it('sends edits as overrides and clears them on revert', async () => {
    const log: { base: unknown; overrides: unknown }[] = [];
    const panel = new WhatifPanel(fakeWhatifApi(log), {
      model: 'Llama-33B', method: 'full16', gpus: '2x48 GB',
    });

    await panel.refresh();
    expect(panel.result!.verdict.feasible).toBe(true);

    panel.edit('gpus', '24 GB');
    expect(panel.dirty).toBe(true);
    await panel.refresh();
    expect(panel.result!.verdict.feasible).toBe(false);
    expect(panel.result!.diff).toEqual({ gpus: { from: '2x48 GB', to: '24 GB' } });

    await panel.revert();
    expect(panel.dirty).toBe(false);
    expect(panel.result!.verdict.feasible).toBe(true);
    expect(log[2].overrides).toEqual({});
  });

  it('drops an override set back to the base value', () => {
    const panel = new WhatifPanel(fakeWhatifApi([]), { model: 'm', method: 'full16', gpus: '8 GB' });
    panel.edit('gpus', '24 GB');
    panel.edit('gpus', '8 GB');
    expect(panel.dirty).toBe(false);
  });

  it('keeps the service error visible', async () => {
    const api = new ApiClient('', async () =>
      new Response(JSON.stringify({ error: 'gpus: cannot parse' }), { status: 400 }),
    );
    const panel = new WhatifPanel(api, { model: 'm', method: 'full16', gpus: 'nope' });
    await panel.refresh();
    expect(panel.result).toBeNull();
    expect(panel.error).toBe('gpus: cannot parse');
  });
});
