/** What-if explorer state: a base scenario taken from a plan, plus the
 * user's pending edits. Every verdict comes from POST /whatif; clearing
 * the edits re-queries the service rather than restoring a cached
 * verdict, so what is shown is always the service's answer.
 */

import type { ApiClient } from './api.js';
import type { ConfigDocument, WhatifParams, WhatifResponse } from './types.js';

const GIB = 1024 * 1024 * 1024;

/** Render a config's world back into the layout shorthand the service
 * accepts ("2x48 GB"). Pure formatting of service-provided numbers. */
export function worldShorthand(world: ConfigDocument['world']): string {
  const gib = Math.round(world.per_device_mem / GIB);
  return world.count === 1 ? `${gib} GB` : `${world.count}x${gib} GB`;
}

export function baseFromConfig(config: ConfigDocument): WhatifParams {
  return {
    model: config.model,
    method: config.method,
    gpus: worldShorthand(config.world),
  };
}

export class WhatifPanel {
  private api: ApiClient;
  base: WhatifParams;
  overrides: WhatifParams = {};
  result: WhatifResponse | null = null;
  error: string | null = null;

  constructor(api: ApiClient, base: WhatifParams) {
    this.api = api;
    this.base = base;
  }

  /** Set or clear one override; empty string reverts that field. */
  edit(key: keyof WhatifParams, value: string): void {
    const trimmed = value.trim();
    if (!trimmed || trimmed === this.base[key]) {
      delete this.overrides[key];
    } else {
      this.overrides[key] = trimmed;
    }
  }

  get dirty(): boolean {
    return Object.keys(this.overrides).length > 0;
  }

  async refresh(): Promise<WhatifResponse | null> {
    try {
      this.result = await this.api.whatif(this.base, this.overrides);
      this.error = null;
    } catch (e) {
      this.result = null;
      this.error = e instanceof Error ? e.message : String(e);
    }
    return this.result;
  }

  async revert(): Promise<WhatifResponse | null> {
    this.overrides = {};
    return this.refresh();
  }
}
