"""Command-line interface: ``plan``, ``run``, ``verify`` and ``segment``.

Exit codes: 0 success / within budget / verification passed, 1 usage or
input error, 2 over budget or verification failed.  Data goes to stdout,
diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .arena import ArenaOverflow
from .bottleneck import BottleneckSpec
from .modelio import FormatError, dump_image_pnm, load_image_pnm, load_spec, load_weights
from .planner import KB, MemoryBudget, plan_network
from .runtime import execute_network, verify_equivalence
from .segmentation import LayoutError, PatchLayout, extract_patches, plan_regions
from .tensor import ShapeError, TensorShape, shape_of

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _nonneg_float(text):
    v = float(text)
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="patchtunnel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("plan", help="static peak-memory plan for a network document")
    sp.add_argument("--model", required=True, type=Path)
    sp.add_argument("--budget", required=True, type=_positive, help="activation budget in bytes")
    sp.add_argument("--elem-bytes", type=int, choices=(1, 2, 4), default=4)
    sp.add_argument("--mode", choices=("standard", "reordered"), default="reordered")
    sp.add_argument("--parallel", type=_positive, default=1, help="what-if: tunnels sharing memory at once")
    sp.add_argument("--format", choices=("text", "json"), default="text")

    sp = sub.add_parser("run", help="budgeted inference on one image")
    sp.add_argument("--model", required=True, type=Path)
    sp.add_argument("--weights", required=True, type=Path)
    sp.add_argument("--image", required=True, type=Path)
    sp.add_argument("--budget", required=True, type=_positive)
    sp.add_argument("--elem-bytes", type=int, choices=(1, 2, 4), default=4)

    sp = sub.add_parser("verify", help="check reordered vs standard bottleneck execution")
    sp.add_argument("--h", type=_positive, default=8)
    sp.add_argument("--w", type=_positive, default=8)
    sp.add_argument("--c-in", type=_positive, default=4)
    sp.add_argument("--t", type=_positive, default=6)
    sp.add_argument("--c-out", type=_positive, default=4)
    sp.add_argument("--stride", type=int, choices=(1, 2), default=1)
    sp.add_argument("--residual", action=argparse.BooleanOptionalAction, default=True)
    sp.add_argument("--affine", action=argparse.BooleanOptionalAction, default=False)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=_nonneg_float, default=1e-5)

    sp = sub.add_parser("segment", help="write the patches of an image as PNM files")
    sp.add_argument("--image", required=True, type=Path)
    sp.add_argument("--k", required=True, type=_positive)
    sp.add_argument("--margin", type=_nonneg, default=0)
    sp.add_argument("--central", action="store_true")
    sp.add_argument("--out-dir", required=True, type=Path)
    return p


def _err(msg):
    print(f"patchtunnel: {msg}", file=sys.stderr)


def cmd_plan(args) -> int:
    net = load_spec(args.model.read_bytes())
    plan = plan_network(net, MemoryBudget(args.budget, args.elem_bytes), args.mode, args.parallel)
    print(plan.to_json() if args.format == "json" else plan.to_text())
    return EXIT_OK if plan.within_budget else EXIT_FAIL


def cmd_run(args) -> int:
    net = load_spec(args.model.read_bytes())
    weights = load_weights(args.weights.read_bytes(), net)
    image = load_image_pnm(args.image.read_bytes())
    if shape_of(image) != net.input_shape:
        _err(f"image is {'x'.join(map(str, image.shape))}, model expects "
             f"{'x'.join(map(str, net.input_shape))} (h x w x c)")
        return EXIT_USAGE
    budget = MemoryBudget(args.budget, args.elem_bytes)
    plan = plan_network(net, budget, "reordered")
    if not plan.within_budget:
        _err(f"planned peak {plan.peak_bytes} bytes at {plan.peak_op} exceeds budget {budget.budget_bytes}")
        return EXIT_FAIL
    try:
        scores, trace = execute_network(net, weights, image, budget, check_plan=False)
    except ArenaOverflow as exc:
        _err(str(exc))
        return EXIT_FAIL
    for i, s in enumerate(scores):
        print(f"{i}: {s:.9e}")
    _err(f"{trace.summary()} plan_peak_bytes={plan.peak_bytes} "
         f"({trace.high_water_bytes / KB:.2f} KB of {budget.budget_bytes / KB:.2f} KB)")
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.trials < 1:
        _err(f"--trials must be >= 1, got {args.trials}")
        return EXIT_USAGE
    spec = BottleneckSpec(args.c_in, args.t, args.c_out, args.stride, args.residual, args.affine)
    shape = TensorShape(args.h, args.w, args.c_in)
    spec.output_shape(shape)
    rep = verify_equivalence(spec, shape, args.trials, args.seed, args.tol)
    verdict = "PASS" if rep.passed else "FAIL"
    print(f"{verdict} trials={rep.trials} max_rel_dev={rep.max_rel_dev:.3e} tol={rep.tol:.3e}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_segment(args) -> int:
    image = load_image_pnm(args.image.read_bytes())
    layout = PatchLayout(args.k, args.margin, args.margin, args.central)
    regions = plan_regions(shape_of(image), layout)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for reg, patch in zip(regions, extract_patches(image, regions)):
        path = args.out_dir / f"patch_{reg.name}.pnm"
        path.write_bytes(dump_image_pnm(patch))
        print(path)
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "run": cmd_run, "verify": cmd_verify, "segment": cmd_segment}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (FormatError, LayoutError, ShapeError, OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
