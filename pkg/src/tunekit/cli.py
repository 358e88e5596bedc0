"""Command-line entry points.

Subcommands mirror the package layout: plan, registry, data, rope,
train, assist, serve. Each prints plain text or JSON to stdout and uses
exit status 1 for domain errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import assistant, datasets, emit, hardware, registry
from .config import to_document
from .errors import TunekitError
from .memory import export_table
from .planner import Requirements, recommend
from .rope import RopeKind, RopeScalingSpec, table_csv


def _inventory(args) -> hardware.GpuInventory:
    if getattr(args, "gpus", None):
        return hardware.parse_layout(args.gpus)
    return hardware.probe_inventory()


def _print_plan(plan) -> None:
    print(f"model:    {plan.config.model}")
    print(f"method:   {plan.config.method.value}")
    print(f"dataset:  {plan.config.dataset}")
    print(f"world:    {plan.config.world.shorthand()}")
    feas = "yes" if plan.verdict.feasible else "no"
    needs = " or ".join(l.shorthand() for l in plan.verdict.required_layouts)
    print(f"feasible: {feas} (needs {needs})")
    print("rationale:")
    for line in plan.rationale:
        print(f"  - {line}")
    if plan.launch:
        print("launch:")
        print(f"  {plan.launch}")


def cmd_plan_recommend(args) -> int:
    inv = _inventory(args)
    req = Requirements(
        domain=args.domain,
        language=args.lang,
        quality_vs_memory="memory_first" if args.memory_first else "quality_first",
        model_choice=args.model,
        dataset_choice=args.dataset,
        train_here=not args.no_train_here,
        persona_name=args.persona,
        context_target=args.context,
    )
    plan = recommend(req, inv)
    _print_plan(plan)
    out = Path(args.out)
    emit.write_args_file(plan.config, out)
    print(f"wrote {out}")
    if plan.readme is not None:
        readme_path = out.with_name("Readme.md")
        readme_path.write_text(plan.readme, encoding="utf-8")
        print(f"wrote {readme_path}")
    return 0


def cmd_plan_table(args) -> int:
    print(json.dumps(export_table(), indent=2))
    return 0


def cmd_registry_export(args) -> int:
    print(registry.export_catalog(), end="")
    return 0


def cmd_data_validate(args) -> int:
    path = Path(args.path)
    if not path.is_file():
        print(f"no such file: {path}", file=sys.stderr)
        return 1
    with open(path, encoding="utf-8") as f:
        report = datasets.validate_jsonl(f, mode=args.mode)
    for issue in report.errors:
        print(f"error: {issue}")
    for issue in report.warnings:
        print(f"warning: {issue}")
    print(f"{report.record_count} valid records, "
          f"{len(report.errors)} errors, {len(report.warnings)} warnings")
    return 1 if report.errors else 0


def cmd_data_stats(args) -> int:
    ds = _load_dataset(args.name, mode=args.mode)
    print(json.dumps(datasets.stats(ds), indent=2))
    return 0


def _load_dataset(name: str, mode: str = "instruct") -> datasets.DatasetSpec:
    if name == "identity-qa":
        return datasets.identity_pairs()
    path = Path(name)
    if path.suffix == ".jsonl" or path.is_file():
        with open(path, encoding="utf-8") as f:
            return datasets.parse_jsonl(f, name=path.stem, mode=mode)
    return datasets.load_builtin(name)


def cmd_rope_table(args) -> int:
    spec = RopeScalingSpec(
        kind=RopeKind(args.kind),
        scale=args.scale,
        base=args.base,
        dim=args.dim,
        train_len=args.train_len,
    )
    seq_len = args.seq_len if args.seq_len is not None else args.train_len
    print(table_csv(spec, seq_len=seq_len), end="")
    return 0


def cmd_train_dry_run(args) -> int:
    from .serve import RunStore, run_dry_training

    cfg = emit.read_args_file(args.args)
    ds = _load_dataset(cfg.dataset, mode=cfg.data_mode)
    if cfg.persona_name:
        ds = datasets.set_model_name(ds, cfg.persona_name)
    store = RunStore(args.runs_dir)
    summary = run_dry_training(store, args.run_id, cfg, ds)
    telemetry = Path(args.runs_dir) / args.run_id / "telemetry.jsonl"
    print(json.dumps(summary, indent=2))
    print(f"telemetry: {telemetry}")
    return 0


def cmd_assist(args) -> int:
    inv = _inventory(args)
    if not args.no_llm:
        print("chat mode needs an LLM endpoint; pass --no-llm for the "
              "offline questionnaire", file=sys.stderr)
        return 1
    state = assistant.QuestionnaireState(inv=inv)
    result = assistant.questionnaire_next(state)
    while isinstance(result, assistant.Question):
        choices = f" [{'/'.join(result.choices)}]" if result.choices else ""
        hint = f" ({result.hint})" if result.hint else ""
        prompt = (f"{result.number}/10 {result.prompt}{choices} "
                  f"(default: {result.default}){hint}\n> ")
        try:
            answer = input(prompt)
        except EOFError:
            print("\naborted", file=sys.stderr)
            return 1
        result = assistant.questionnaire_next(state, answer)
    _print_plan(result.plan)
    out = Path(args.out)
    emit.write_args_file(result.config, out)
    print(f"wrote {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .serve import RunStore, create_app

    inv = _inventory(args)
    static = args.static if args.static and Path(args.static).is_dir() else None
    app = create_app(inv=inv, store=RunStore(args.runs_dir), static_dir=static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tunekit")
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="planning and the feasibility table")
    plan_sub = plan.add_subparsers(dest="subcommand", required=True)
    rec = plan_sub.add_parser("recommend", help="requirements -> plan + ARGS.json")
    rec.add_argument("--domain", default="general")
    rec.add_argument("--lang", default="en")
    rec.add_argument("--gpus", help='inventory shorthand, e.g. "2x48 GB" (default: probe)')
    rec.add_argument("--memory-first", action="store_true")
    rec.add_argument("--model", help="pin a registry model")
    rec.add_argument("--dataset", help="catalog name or local JSONL path")
    rec.add_argument("--no-train-here", action="store_true")
    rec.add_argument("--persona", help="persona name for identity records")
    rec.add_argument("--context", type=int, help="target context length")
    rec.add_argument("--out", default="ARGS.json")
    rec.set_defaults(func=cmd_plan_recommend)
    table = plan_sub.add_parser("export-table", help="print the memory table")
    table.set_defaults(func=cmd_plan_table)

    reg = sub.add_parser("registry", help="model and dataset catalog")
    reg_sub = reg.add_subparsers(dest="subcommand", required=True)
    exp = reg_sub.add_parser("export", help="print the catalog as JSONL")
    exp.set_defaults(func=cmd_registry_export)

    data = sub.add_parser("data", help="dataset tools")
    data_sub = data.add_subparsers(dest="subcommand", required=True)
    val = data_sub.add_parser("validate", help="check a JSONL file")
    val.add_argument("path")
    val.add_argument("--mode", choices=("pretrain", "instruct"), default="instruct")
    val.set_defaults(func=cmd_data_validate)
    st = data_sub.add_parser("stats", help="dataset size summary")
    st.add_argument("name", help="built-in name or JSONL path")
    st.add_argument("--mode", choices=("pretrain", "instruct"), default="instruct")
    st.set_defaults(func=cmd_data_stats)

    rope = sub.add_parser("rope", help="position-scaling tools")
    rope_sub = rope.add_subparsers(dest="subcommand", required=True)
    rt = rope_sub.add_parser("table", help="frequency table as CSV")
    rt.add_argument("--kind", default="linear",
                    choices=[k.value for k in RopeKind])
    rt.add_argument("--scale", type=float, default=1.0)
    rt.add_argument("--base", type=float, default=10000.0)
    rt.add_argument("--dim", type=int, default=128)
    rt.add_argument("--train-len", type=int, default=2048)
    rt.add_argument("--seq-len", type=int, default=None)
    rt.set_defaults(func=cmd_rope_table)

    train = sub.add_parser("train", help="desk-scale training")
    train_sub = train.add_subparsers(dest="subcommand", required=True)
    dry = train_sub.add_parser("dry-run", help="run the toy trainer from ARGS.json")
    dry.add_argument("--args", required=True, help="path to ARGS.json")
    dry.add_argument("--runs-dir", default="runs")
    dry.add_argument("--run-id", default="dry-run")
    dry.set_defaults(func=cmd_train_dry_run)

    assist = sub.add_parser("assist", help="interactive configuration")
    assist.add_argument("--no-llm", action="store_true",
                        help="use the offline questionnaire")
    assist.add_argument("--gpus", help="inventory shorthand (default: probe)")
    assist.add_argument("--out", default="ARGS.json")
    assist.set_defaults(func=cmd_assist)

    serve = sub.add_parser("serve", help="HTTP service + dashboard")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8600)
    serve.add_argument("--runs-dir", default="runs")
    serve.add_argument("--static", default="frontend/dist",
                       help="dashboard static files to mount at /")
    serve.add_argument("--gpus", help="inventory shorthand (default: probe)")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TunekitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
