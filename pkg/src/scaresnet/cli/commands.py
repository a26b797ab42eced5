"""Subcommand handlers. Each returns the JSON document and an exit status."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from scaresnet.checks import MODULE_TAGS, grad_check
from scaresnet.cli import display
from scaresnet.config import (
    CCA_HEADS,
    CCA_PE_BASE,
    CCA_RECURRENCE,
    DEFAULT_DTYPE,
    DEFAULT_INTERPRETATION,
    DEFAULT_LEVELS,
    DEFAULT_PRESET,
    DSE_KERNEL,
    GRADCHECK_BACKBONE_THRESHOLD,
    GRADCHECK_EPS,
    GRADCHECK_FLOOR,
    GRADCHECK_SAMPLES,
    GRADCHECK_THRESHOLD,
    GROUP_NORM_GROUPS,
    SE_RATIO,
    TRAIN_BATCH,
    TRAIN_MOMENTUM,
    TRAIN_WEIGHT_DECAY,
)
from scaresnet.errors import ValidationError
from scaresnet.nn import (
    BackboneConfig,
    count_params_flops,
    minimum_input_size,
    preset_config,
    shape_trace,
)
from scaresnet.sppr import (
    Interpretation,
    enumerate_level_solutions,
    pooling_params,
    validate_sweep,
)
from scaresnet.synthetic import gen_synthetic
from scaresnet.training import train_ablation, train_demo

logger = logging.getLogger(__name__)

Result = Tuple[Dict[str, Any], int]

SWEEP_LEVELS = (2, 6, 9)


def load_config_document(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).expanduser().read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read config document {path}: {e}") from e
    if not isinstance(doc, dict):
        raise ValidationError(f"config document {path} must hold a JSON object")
    return doc


def network_config(args) -> BackboneConfig:
    """Preset, then the TOML model settings, then the JSON document, then flags."""
    doc = load_config_document(getattr(args, "config", None))
    name = getattr(args, "preset", None) or doc.get("preset") or DEFAULT_PRESET
    merged: Dict[str, Any] = {
        "heads": CCA_HEADS,
        "recurrence": CCA_RECURRENCE,
        "pe_base": CCA_PE_BASE,
        "se_ratio": SE_RATIO,
        "dse_kernel": DSE_KERNEL,
        "group_norm_groups": GROUP_NORM_GROUPS,
        "interpretation": DEFAULT_INTERPRETATION,
        "levels": list(DEFAULT_LEVELS),
    }
    merged.update({k: v for k, v in doc.items() if k != "preset"})
    if getattr(args, "interpretation", None):
        merged["interpretation"] = args.interpretation
    config = BackboneConfig.from_dict(merged, base=preset_config(name))
    if getattr(args, "verbose", False):
        display.show_config(config.to_dict())
    return config


def solve_levels(args) -> Result:
    seen = {}
    for q in enumerate_level_solutions(args.max):
        n = q.normalized()
        key = (n.x, n.y, n.z, n.w)
        seen.setdefault(key, n)
    ordered = sorted(seen.values(), key=lambda q: (q.w, q.x, q.y, q.z))
    solutions = [{"x": q.x, "y": q.y, "z": q.z, "w": q.w} for q in ordered]
    witnesses = [{"a": q.a, "b": q.b, "c": q.c, "d": q.d} for q in ordered]
    display.show_levels(solutions, args.max)
    return {"max": args.max, "solutions": solutions, "witnesses": witnesses}, 0


def pool_params(args) -> Result:
    if args.sweep:
        interpretations = (
            [args.interpretation] if args.interpretation else [i.value for i in Interpretation]
        )
        levels = tuple(args.levels) if args.levels else SWEEP_LEVELS
        runs = []
        for interpretation in interpretations:
            checked, failures = validate_sweep(levels, args.h, interpretation)
            runs.append(
                {"interpretation": interpretation, "checked": checked, "failures": failures}
            )
        display.show_sweep(runs)
        total = sum(len(r["failures"]) for r in runs)
        doc = {"h_max": args.h, "levels": list(levels), "runs": runs, "failures": total}
        return doc, 1 if total else 0

    if args.l is None:
        raise ValidationError("pool-params needs --l (or --sweep)")
    params = pooling_params(args.h, args.l, args.interpretation or DEFAULT_INTERPRETATION)
    doc = params.to_dict()
    display.show_pool_params(args.h, args.l, doc)
    return doc, 0


def _size(args) -> Tuple[int, int]:
    return args.h, (args.w if args.w is not None else args.h)


def shape_trace_command(args) -> Result:
    config = network_config(args)
    height, width = _size(args)
    trace = shape_trace(config, height, width)
    display.show_trace(trace, config.preset)
    doc = {"preset": config.preset, "minimum_input": minimum_input_size(config)}
    doc.update(trace.to_dict())
    return doc, 0


def param_count(args) -> Result:
    config = network_config(args)
    height, width = _size(args)
    report = count_params_flops(config, height, width, compare_plain=args.compare_plain)
    display.show_param_count(report)
    return report.to_dict(), 0


def grad_check_command(args) -> Result:
    tags = MODULE_TAGS if args.module == "all" else (args.module,)
    results = [
        grad_check(
            tag,
            seed=args.seed,
            eps=GRADCHECK_EPS,
            threshold=GRADCHECK_THRESHOLD,
            backbone_threshold=GRADCHECK_BACKBONE_THRESHOLD,
            floor=GRADCHECK_FLOOR,
            samples=GRADCHECK_SAMPLES,
        )
        for tag in tags
    ]
    display.show_grad_checks(results)
    passed = all(r["passed"] for r in results)
    if args.module == "all":
        doc = {"seed": args.seed, "results": results, "passed": passed}
    else:
        doc = dict(results[0], seed=args.seed)
    return doc, 0 if passed else 1


def gen_data(args) -> Result:
    minimum = minimum_input_size(network_config(args))
    root = gen_synthetic(
        n=args.n,
        size_min=args.size_min,
        size_max=args.size_max,
        seed=args.seed,
        out_dir=args.out,
        workers=args.workers,
        minimum=minimum,
    )
    doc = {
        "path": str(root),
        "n": args.n,
        "positives": args.n // 2,
        "size_min": args.size_min,
        "size_max": args.size_max,
        "seed": args.seed,
    }
    display.show_dataset(doc)
    return doc, 0


def _write_report(path: Optional[str], doc: Dict[str, Any]) -> None:
    if not path:
        return
    target = Path(path).expanduser()
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def train_demo_command(args) -> Result:
    config = network_config(args)
    dtype = getattr(args, "dtype", None) or DEFAULT_DTYPE
    options = {
        "steps": args.steps,
        "lr": args.lr,
        "seed": args.seed,
        "momentum": TRAIN_MOMENTUM,
        "weight_decay": TRAIN_WEIGHT_DECAY,
        "batch": TRAIN_BATCH,
        "config": config,
        "dtype": dtype,
    }
    renderer = display.TrainingRenderer(args.steps)
    renderer.start_live()
    try:
        if getattr(args, "ablation", False):
            ablation = train_ablation(
                args.data,
                checkpoint_dir=args.checkpoint,
                on_variant=renderer.restart,
                on_step=renderer.update,
                **options,
            )
        else:
            report = train_demo(
                args.data, checkpoint=args.checkpoint, on_step=renderer.update, **options
            )
    finally:
        renderer.stop_live()

    if getattr(args, "ablation", False):
        doc = ablation.to_dict()
        _write_report(args.report, doc)
        display.show_ablation(doc["variants"])
        return doc, 0
    doc = report.to_dict()
    _write_report(args.report, doc)
    display.show_train_summary(doc)
    return doc, 0


HANDLERS = {
    "solve-levels": solve_levels,
    "pool-params": pool_params,
    "shape-trace": shape_trace_command,
    "param-count": param_count,
    "grad-check": grad_check_command,
    "gen-data": gen_data,
    "train-demo": train_demo_command,
}
