"""The interaction layer: a tool-calling chat loop and an offline wizard.

Both paths end in the same place: a TrainingConfig whose validation
report is empty. The chat path leans on an external LLM through a
pluggable client; the questionnaire path needs no network at all.

Free-text assistant prose is never parsed for configuration values. The
single registered tool, Set_ARGS, is the only way the conversation can
change the pending config, and two bracket markers drive the phase
machine: [CONFIRM] (assistant asks the user to review) and [FINALIZE]
(assistant commits after the user agreed).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Protocol, Sequence, Union

from . import emit
from .config import TrainingConfig, config_fields, set_arg, validate
from .errors import InvariantViolation, ProtocolError, TunekitError
from .hardware import GpuInventory, summarize
from .planner import Plan, Requirements, recommend
from .registry import resolve_dataset, resolve_model

TOOL_NAME = "Set_ARGS"
CONFIRM_MARK = "[CONFIRM]"
FINALIZE_MARK = "[FINALIZE]"


@dataclass(frozen=True)
class Turn:
    role: str  # system | user | assistant | tool
    content: str


@dataclass(frozen=True)
class ToolCall:
    key: str
    value: str
    name: str = TOOL_NAME


@dataclass(frozen=True)
class EmitArgs:
    """Effect: the conversation finalized; persist this config."""

    config: TrainingConfig


Event = Union[ToolCall, tuple]  # ("user", text) | ("assistant", text)


@dataclass
class ConversationState:
    transcript: list[Turn]
    pending_config: TrainingConfig
    phase: str = "gathering"  # gathering | confirming | finalized


# --------------------------------------------------------------------------
# System message
# --------------------------------------------------------------------------

_FAQ = """\
Frequently needed guidance:
- Full-parameter training gives the highest fidelity but needs the most
  GPU memory; adapter training (lora16) trains a small add-on instead.
- lora8 and lora4 keep the frozen base in 8-bit or 4-bit form, cutting
  memory further at a small quality cost.
- lomo16 fuses the optimizer update into the backward pass so only one
  layer's gradient is ever resident; use it to full-tune above your
  memory class.
- Longer contexts than the model was trained for need position scaling;
  dynamic NTK is the default choice.
- The seed fixes every random draw, so identical settings reproduce
  identical runs."""


def build_system_message(inv: GpuInventory, schema_keys: Optional[Sequence[str]] = None) -> str:
    """Deterministic system prompt: hardware, schema, tool, FAQ."""
    keys = list(schema_keys) if schema_keys is not None else config_fields()
    defaults = TrainingConfig()
    lines = [
        "You are a training-plan assistant. Interview the user, then fill "
        "the configuration using the Set_ARGS tool.",
        "",
        "Hardware on this machine: " + summarize(inv),
        "",
        "Configuration keys (key = default):",
    ]
    doc = emit.write_args(replace(defaults, model="-", dataset="-")).decode("utf-8")
    flat = json.loads(doc)
    for key in keys:
        if key.startswith("rope."):
            value = flat["rope"][key.split(".", 1)[1]]
        else:
            value = flat.get(key)
        lines.append(f"  {key} = {json.dumps(value)}")
    lines += [
        "",
        f"Tool: {TOOL_NAME}(key, value) amends one configuration field; the "
        "tool result reports ok or the exact validation error.",
        f"When every required field is set, ask the user to review with "
        f"{CONFIRM_MARK}; after they agree, reply with {FINALIZE_MARK} to save.",
        "",
        _FAQ,
    ]
    return "\n".join(lines)


def new_conversation(inv: GpuInventory) -> ConversationState:
    return ConversationState(
        transcript=[Turn("system", build_system_message(inv))],
        pending_config=TrainingConfig(),
    )


_AFFIRMATIVE = ("yes", "y", "ok", "confirm", "looks good", "go ahead")


def step(state: ConversationState, event: Event) -> tuple[ConversationState, Optional[EmitArgs]]:
    """Advance the conversation by one event.

    ToolCall events mutate the pending config through set_arg and append
    a tool turn with the outcome; text events append their turn. The
    [FINALIZE] marker on an assistant turn finalizes iff validation is
    clean; otherwise the problems come back as a tool turn so the model
    can repair them.
    """
    if state.phase == "finalized":
        raise InvariantViolation("conversation already finalized")

    if isinstance(event, ToolCall):
        if event.name != TOOL_NAME:
            raise ProtocolError(f"unregistered tool {event.name!r}")
        state.transcript.append(
            Turn("assistant", f"{TOOL_NAME}({event.key!r}, {event.value!r})")
        )
        try:
            state.pending_config = set_arg(state.pending_config, event.key, event.value)
        except TunekitError as e:
            state.transcript.append(Turn("tool", str(e)))
        else:
            state.transcript.append(Turn("tool", "ok"))
        return state, None

    role, text = event
    if role not in ("user", "assistant"):
        raise ProtocolError(f"unknown event role {role!r}")
    state.transcript.append(Turn(role, text))

    if role == "assistant" and FINALIZE_MARK in text:
        problems = validate(state.pending_config)
        if problems:
            state.transcript.append(
                Turn("tool", "cannot finalize: " + "; ".join(problems))
            )
            return state, None
        state.phase = "finalized"
        return state, EmitArgs(config=state.pending_config)
    if role == "assistant" and CONFIRM_MARK in text:
        state.phase = "confirming"
    elif role == "user" and state.phase == "confirming":
        if text.strip().lower() not in _AFFIRMATIVE:
            state.phase = "gathering"
    return state, None


# --------------------------------------------------------------------------
# Event log persistence
# --------------------------------------------------------------------------

def event_to_json(event: Event) -> str:
    if isinstance(event, ToolCall):
        return json.dumps(
            {"event": "tool_call", "name": event.name, "key": event.key, "value": event.value}
        )
    role, text = event
    return json.dumps({"event": role, "text": text})


def event_from_json(line: str) -> Event:
    obj = json.loads(line)
    if obj["event"] == "tool_call":
        return ToolCall(key=obj["key"], value=obj["value"], name=obj.get("name", TOOL_NAME))
    return (obj["event"], obj["text"])


def append_event(path: str | Path, event: Event) -> None:
    with open(path, "a", encoding="utf-8") as f:
        f.write(event_to_json(event) + "\n")


def replay(path: str | Path, inv: GpuInventory) -> tuple[ConversationState, Optional[EmitArgs]]:
    """Re-run a recorded event log; returns the final state and effect."""
    state = new_conversation(inv)
    effect = None
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            state, eff = step(state, event_from_json(line))
            if eff is not None:
                effect = eff
    return state, effect


# --------------------------------------------------------------------------
# Chat clients
# --------------------------------------------------------------------------

class ChatClient(Protocol):
    def complete(self, transcript: Sequence[Turn]) -> list[Event]:
        """Produce the assistant's next events (texts and tool calls)."""


class ScriptedClient:
    """Replays a fixed list of assistant responses; the test-suite client."""

    def __init__(self, script: Sequence[Sequence[Event]]):
        self._script = [list(batch) for batch in script]
        self._cursor = 0

    def complete(self, transcript: Sequence[Turn]) -> list[Event]:
        if self._cursor >= len(self._script):
            raise ProtocolError("scripted client exhausted")
        batch = self._script[self._cursor]
        self._cursor += 1
        return batch


class HttpChatClient:
    """Chat-completion client with one registered tool.

    Expects an OpenAI-style /chat/completions endpoint; the API key comes
    from the environment so it never lands in transcripts.
    """

    def __init__(self, base_url: str, model: str, api_key_env: str = "TUNEKIT_LLM_API_KEY",
                 timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout

    def _tool_schema(self) -> dict:
        return {
            "type": "function",
            "function": {
                "name": TOOL_NAME,
                "description": "Amend one training configuration field.",
                "parameters": {
                    "type": "object",
                    "properties": {
                        "key": {"type": "string", "enum": config_fields()},
                        "value": {"type": "string"},
                    },
                    "required": ["key", "value"],
                },
            },
        }

    def complete(self, transcript: Sequence[Turn]) -> list[Event]:
        import httpx

        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise ProtocolError(f"no API key in ${self.api_key_env}")
        payload = {
            "model": self.model,
            "messages": [{"role": t.role, "content": t.content} for t in transcript],
            "tools": [self._tool_schema()],
        }
        response = httpx.post(
            f"{self.base_url}/chat/completions",
            json=payload,
            headers={"Authorization": f"Bearer {key}"},
            timeout=self.timeout,
        )
        response.raise_for_status()
        message = response.json()["choices"][0]["message"]
        events: list[Event] = []
        for call in message.get("tool_calls") or []:
            args = json.loads(call["function"]["arguments"])
            events.append(ToolCall(key=args["key"], value=str(args["value"])))
        if message.get("content"):
            events.append(("assistant", message["content"]))
        if not events:
            raise ProtocolError("assistant returned neither text nor tool calls")
        return events


def run_chat(
    client: ChatClient,
    inv: GpuInventory,
    user_inputs: Sequence[str],
    log_path: Optional[str | Path] = None,
) -> tuple[ConversationState, Optional[EmitArgs]]:
    """Drive a whole conversation from a queue of user inputs.

    Each user input is stepped in, then the client produces assistant
    events until it has nothing pending for this round (one batch per
    user turn). Stops on finalization or when inputs run out.
    """
    state = new_conversation(inv)
    effect = None

    def feed(event: Event):
        nonlocal state, effect
        if log_path is not None:
            append_event(log_path, event)
        state, eff = step(state, event)
        if eff is not None:
            effect = eff

    for text in user_inputs:
        feed(("user", text))
        if state.phase == "finalized":
            break
        for event in client.complete(tuple(state.transcript)):
            feed(event)
            if state.phase == "finalized":
                break
        if state.phase == "finalized":
            break
    return state, effect


# --------------------------------------------------------------------------
# Questionnaire (the offline path)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Question:
    number: int  # 1-based, of 10
    key: str
    prompt: str
    default: str
    choices: Optional[tuple[str, ...]] = None
    hint: Optional[str] = None


@dataclass(frozen=True)
class Done:
    config: TrainingConfig
    plan: Plan


@dataclass
class QuestionnaireState:
    inv: GpuInventory
    question_index: int = 0  # 0..9; 10 means complete
    answers: dict = field(default_factory=dict)
    last_error: Optional[str] = None

    @property
    def complete(self) -> bool:
        return self.question_index >= len(_QUESTIONS)


def _q(number, key, prompt, default, choices=None):
    return Question(number=number, key=key, prompt=prompt, default=default, choices=choices)


_QUESTIONS = (
    _q(1, "domain", "What is the model for? Name the task domain.", "general"),
    _q(2, "language", "Main language of the task?", "en", ("en", "zh")),
    _q(3, "model", 'Base model, or "auto" to let the planner pick.', "auto"),
    _q(4, "train_here", "Train on this machine?", "yes", ("yes", "no")),
    _q(5, "dataset", 'Dataset: a built-in name, a local JSONL path, or "auto".', "auto"),
    _q(6, "persona", 'Persona name for identity records, or "none".', "none"),
    _q(7, "preference", "Optimize for quality or memory?", "auto", ("auto", "quality", "memory")),
    _q(8, "context", 'Target context length in tokens, or "default".', "default"),
    _q(9, "epochs_lr", "Epochs and learning rate, space-separated.", "10 0.0001"),
    _q(10, "wandb", "Log metrics to an experiment tracker?", "no", ("yes", "no")),
)

def _accept(state: QuestionnaireState, question: Question, text: str) -> Optional[str]:
    """Validate and record one answer; returns an error hint or None."""
    if question.choices is not None and text not in question.choices:
        return f"choose one of: {', '.join(question.choices)}"
    if question.key == "model" and text != "auto":
        try:
            resolve_model(text)
        except TunekitError as e:
            return str(e)
    if question.key == "dataset" and text != "auto":
        try:
            resolve_dataset(text)
        except TunekitError:
            if not (text.endswith(".jsonl") or "/" in text):
                return "not a built-in dataset; local paths must point to a .jsonl file"
    if question.key == "context" and text != "default":
        if not text.isdigit() or int(text) < 1:
            return 'a positive token count, or "default"'
    if question.key == "epochs_lr":
        parts = text.split()
        if len(parts) != 2:
            return 'two values, e.g. "10 0.0001"'
        try:
            epochs, lr = int(parts[0]), float(parts[1])
        except ValueError:
            return "epochs must be an integer and lr a number"
        if epochs < 1 or lr <= 0:
            return "epochs must be >= 1 and lr > 0"
    state.answers[question.key] = text
    return None


def _requirements(answers: dict) -> Requirements:
    pref = {"auto": "quality_first", "quality": "quality_first", "memory": "memory_first"}
    return Requirements(
        domain=answers["domain"],
        language=answers["language"],
        quality_vs_memory=pref[answers["preference"]],
        model_choice=None if answers["model"] == "auto" else answers["model"],
        dataset_choice=None if answers["dataset"] == "auto" else answers["dataset"],
        train_here=answers["train_here"] == "yes",
        persona_name=None if answers["persona"] == "none" else answers["persona"],
        context_target=None if answers["context"] == "default" else int(answers["context"]),
    )


def _finish(state: QuestionnaireState) -> Done:
    plan = recommend(_requirements(state.answers), state.inv)
    cfg = plan.config
    epochs, lr = state.answers["epochs_lr"].split()
    cfg = set_arg(cfg, "epochs", epochs)
    cfg = set_arg(cfg, "lr", lr)
    cfg = set_arg(cfg, "wandb", state.answers["wandb"])
    if cfg != plan.config:
        launch = emit.build_launch_command(cfg, state.inv) if plan.launch is not None else None
        plan = replace(plan, config=cfg, launch=launch)
        if plan.readme is not None:
            plan = replace(plan, readme=emit.render_readme(replace(plan, readme=None)))
    problems = validate(plan.config)
    if problems:
        raise InvariantViolation(
            "questionnaire produced a non-launchable config: " + "; ".join(problems)
        )
    return Done(config=plan.config, plan=plan)


def questionnaire_next(
    state: QuestionnaireState, answer: Optional[str] = None,
) -> Union[Question, Done]:
    """Ask, validate, advance; exactly ten accepted answers finish it."""
    if state.complete:
        return _finish(state)
    question = _QUESTIONS[state.question_index]
    if answer is None:
        return replace(question, hint=state.last_error)
    text = answer.strip() or question.default
    error = _accept(state, question, text)
    if error is not None:
        state.last_error = error
        return replace(question, hint=error)
    state.last_error = None
    state.question_index += 1
    if state.complete:
        return _finish(state)
    return _QUESTIONS[state.question_index]
