/** Wizard state machine: walks the service's ten questions, then asks
 * the service for a plan.
 *
 * The question list comes from GET /questionnaire so the wizard can
 * never drift from the service's idea of the flow. Answers are kept as
 * the raw strings the user typed; mapping to requirements happens only
 * when building the POST /plan body, and validation beyond membership
 * in service-provided choice lists is the service's job. A 400 from
 * /plan is routed back to the question that owns the offending field.
 */

import type { ApiClient } from './api.js';
import { ServiceError } from './api.js';
import type { PlanRequest, PlanResponse, Question } from './types.js';

/** Which wizard question owns each requirements field, for error routing. */
const FIELD_TO_KEY: Record<string, string> = {
  domain: 'domain',
  language: 'language',
  model_choice: 'model',
  dataset_choice: 'dataset',
  quality_vs_memory: 'preference',
  train_here: 'train_here',
  persona_name: 'persona',
  context_target: 'context',
};

const PREFERENCE: Record<string, string> = {
  auto: 'quality_first',
  quality: 'quality_first',
  memory: 'memory_first',
};

export interface WizardView {
  question: Question | null;
  index: number;
  total: number;
  error: string | null;
  answers: Record<string, string>;
  plan: PlanResponse | null;
}

export class Wizard {
  private api: ApiClient;
  private questions: Question[] = [];
  private index = 0;
  private error: string | null = null;
  answers: Record<string, string> = {};
  plan: PlanResponse | null = null;

  constructor(api: ApiClient) {
    this.api = api;
  }

  async load(): Promise<void> {
    this.questions = await this.api.questions();
    this.index = 0;
    this.answers = {};
    this.plan = null;
    this.error = null;
  }

  view(): WizardView {
    return {
      question: this.plan ? null : this.questions[this.index] ?? null,
      index: this.index,
      total: this.questions.length,
      error: this.error,
      answers: { ...this.answers },
      plan: this.plan,
    };
  }

  get complete(): boolean {
    return this.questions.length > 0 && this.index >= this.questions.length;
  }

  /** Record one answer; empty input takes the question's default. On the
   * last question this submits to the service, so the returned promise
   * may surface a validation error that moves the wizard back to the
   * offending question. */
  async answer(text: string): Promise<WizardView> {
    const question = this.questions[this.index];
    if (!question) return this.view();
    const value = text.trim() || question.default;
    if (question.choices && !question.choices.includes(value)) {
      this.error = `choose one of: ${question.choices.join(', ')}`;
      return this.view();
    }
    if (question.key === 'epochs_lr' && !looksLikeEpochsLr(value)) {
      this.error = 'two values, e.g. "10 0.0001"';
      return this.view();
    }
    this.error = null;
    this.answers[question.key] = value;
    this.index += 1;
    if (this.complete) await this.submit();
    return this.view();
  }

  back(): WizardView {
    if (this.index > 0 && !this.plan) {
      this.index -= 1;
      this.error = null;
    }
    return this.view();
  }

  /** The POST /plan body for the collected answers. Only keys the
   * service declares are ever set. */
  requirements(): PlanRequest {
    const a = this.answers;
    const req: PlanRequest = {
      domain: a.domain,
      language: a.language,
      quality_vs_memory: PREFERENCE[a.preference] ?? 'quality_first',
      model_choice: a.model === 'auto' ? null : a.model,
      dataset_choice: a.dataset === 'auto' ? null : a.dataset,
      train_here: a.train_here === 'yes',
      persona_name: a.persona === 'none' ? null : a.persona,
      context_target: a.context === 'default' ? null : parseInt(a.context, 10),
    };
    return req;
  }

  private async submit(): Promise<void> {
    try {
      this.plan = await this.api.plan(this.requirements());
      this.error = null;
    } catch (e) {
      this.plan = null;
      if (e instanceof ServiceError && e.status === 400) {
        this.rewindTo(e.message);
        return;
      }
      throw e;
    }
  }

  /** Move back to the question owning the field named in a service
   * validation message ("field: problem"), keeping the message inline.
   * Errors that name no known field (e.g. no feasible plan at all) stay
   * on the summary screen as a banner. */
  private rewindTo(message: string): void {
    this.error = message;
    const field = message.split(':', 1)[0].trim();
    const key = FIELD_TO_KEY[field];
    if (!key) return;
    const at = this.questions.findIndex((q) => q.key === key);
    if (at >= 0) this.index = at;
  }
}

function looksLikeEpochsLr(value: string): boolean {
  const parts = value.split(/[\s,]+/).filter((p) => p.length > 0);
  if (parts.length !== 2) return false;
  const epochs = Number(parts[0]);
  const lr = Number(parts[1]);
  return Number.isInteger(epochs) && epochs >= 1 && Number.isFinite(lr) && lr > 0;
}
