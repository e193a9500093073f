"""Command-line interface: `localflow simulate | estimate | sweep | netflow`."""

import argparse
from collections.abc import Callable, Sequence
import csv
from dataclasses import dataclass, field
import io
import logging
import sys
import time
from typing import TypedDict

import numpy as np
from numpy.typing import NDArray

from ._version import __version__
from .density import RMode, RPolicy
from .files import manifest_path_for, PathArg, sha256_of, write_text_atomic
from .localmodel import ModelOrder
from .series import Dataset, delay_embed, load_csv, render_csv, save_csv
from .systems import (
    add_measurement_noise,
    CHUA_INITIAL_STATE,
    CHUA_TRANSIENT,
    ChuaParams,
    CouplingParams,
    DEFAULT_SEEDS,
    DYADIC_APEX_SHIFT,
    integrate_rk4,
    iterate_coupled,
    iterate_tent,
    MAP_TRANSIENT,
    sync_error,
    TentParams,
)
from .transfer import directionality_index, FlowResult, parallel_map, surrogate_baseline, te_matrix, transfer_entropy

logger = logging.getLogger(__name__)

PROG = "localflow"
FLOW_DIMENSION = 3


@dataclass
class RunManifest:
    """Everything needed to reproduce an output file, written next to it as `<out>.manifest.txt`."""

    command: str
    parameters: dict[str, object]
    inputs: dict[str, str] = field(default_factory=dict)
    seeds: dict[str, object] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)
    version: str = __version__
    wall_time_s: float = 0.0

    def render(self) -> str:
        lines = [f"command = {self.command}", f"version = {self.version}", f"wall_time_s = {self.wall_time_s:.3f}"]
        lines += [f"param.{key} = {value}" for key, value in sorted(self.parameters.items())]
        lines += [f"input.{path} = sha256:{digest}" for path, digest in self.inputs.items()]
        lines += [f"seed.{key} = {value}" for key, value in sorted(self.seeds.items())]
        lines += [f"note = {note}" for note in self.notes]
        return "\n".join(lines) + "\n"

    def write_for(self, out: PathArg) -> str:
        """Write this manifest as the sidecar of `out` and return its path."""
        path = manifest_path_for(out)
        write_text_atomic(path, self.render())
        return path


class EstimationOptions(TypedDict):
    k: int
    order: ModelOrder
    policy: RPolicy
    window: int
    m: int | None
    require_improvement: bool


def _parameters(args: argparse.Namespace) -> dict[str, object]:
    return {
        key: value.tolist() if isinstance(value, np.ndarray) else value
        for key, value in vars(args).items()
        if key not in ("handler", "verbose")
    }


def _policy(args: argparse.Namespace) -> RPolicy:
    return RPolicy(RMode(args.r_policy), args.r_coef)


def _estimation_options(args: argparse.Namespace) -> EstimationOptions:
    return EstimationOptions(
        k=args.k,
        order=ModelOrder(args.order),
        policy=_policy(args),
        window=args.window,
        m=args.m,
        require_improvement=args.require_improvement,
    )


def _apex_notes(a: float) -> list[str]:
    if a == 0.5:
        return [f"tent map apex a=0.5 iterated as 0.5 - {DYADIC_APEX_SHIFT!r} (binary round-off collapse)"]
    return []


def _emit(text: str, out: str | None, manifest: RunManifest, started: float) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    write_text_atomic(out, text)
    manifest.wall_time_s = time.perf_counter() - started
    manifest.write_for(out)
    logger.info("wrote %s", out)


def cmd_simulate(args: argparse.Namespace) -> int:
    """Generate a tent, coupled-tent or Chua dataset and write it as CSV."""
    started = time.perf_counter()
    notes: list[str] = []
    seeds: dict[str, object] = {}

    if args.system == "tent":
        a = 0.65 if args.a is None else args.a
        n = 500 if args.n is None else args.n
        transient = MAP_TRANSIENT if args.transient is None else args.transient
        dataset = Dataset((iterate_tent(TentParams(a), args.x0, n, transient),))
        seeds["x0"] = args.x0
        notes += _apex_notes(a)
    elif args.system == "coupled":
        a = 0.5 if args.a is None else args.a
        n = 500 if args.n is None else args.n
        transient = MAP_TRANSIENT if args.transient is None else args.transient
        dataset = iterate_coupled(CouplingParams(args.eps, args.mu, a), args.x0, args.y0, n, transient)
        seeds.update(x0=args.x0, y0=args.y0)
        notes += _apex_notes(a)
    else:
        params = ChuaParams(args.alpha, args.beta, args.m0, args.m1, args.dt, args.stride)
        n = 1024 if args.n is None else args.n
        transient = CHUA_TRANSIENT if args.transient is None else args.transient
        dataset = integrate_rk4(params, CHUA_INITIAL_STATE, n, transient)
        seeds["state0"] = CHUA_INITIAL_STATE

    if args.noise > 0:
        dataset = add_measurement_noise(dataset, args.noise, args.seed)
        seeds["noise"] = args.seed

    manifest = RunManifest("simulate", _parameters(args) | {"n": n, "transient": transient}, seeds=seeds, notes=notes)
    _emit(render_csv(dataset), args.out, manifest, started)
    return 0


def cmd_estimate(args: argparse.Namespace) -> int:
    """Estimate the transfer entropy in both directions between two columns of a CSV file."""
    started = time.perf_counter()
    dataset = load_csv(args.input, args.delimiter)
    if args.standardize:
        dataset = dataset.standardized()

    source = delay_embed(dataset[args.source], args.d, args.tau)
    target = delay_embed(dataset[args.target], args.d, args.tau)
    options = _estimation_options(args)

    forward = transfer_entropy(source, target, keep_samples=args.dump_logs is not None, **options)
    backward = transfer_entropy(target, source, **options)

    lines = [
        f"I({args.source} -> {args.target}) = {forward.value_bits:.6f} bits/step  "
        f"(r_joint={forward.r_used_joint:.6g}, r_self={forward.r_used_self:.6g}, n={forward.n_samples})",
        f"I({args.target} -> {args.source}) = {backward.value_bits:.6f} bits/step  "
        f"(r_joint={backward.r_used_joint:.6g}, r_self={backward.r_used_self:.6g}, n={backward.n_samples})",
    ]
    try:
        index = directionality_index(forward, backward)
    except ValueError:
        lines.append("directionality index T = undefined (both transfers are zero)")
    else:
        note = "  (outside [-1, 1]: a transfer is negative)" if abs(index) > 1.0 else ""
        lines.append(f"directionality index T = {index:.6f}{note}")
    directions = ((forward, args.source, args.target), (backward, args.target, args.source))
    for estimate, src, tgt in directions:
        if estimate.n_clamped:
            lines.append(f"warning: {estimate.n_clamped} log ratios of {src} -> {tgt} were clamped")

    if args.surrogates:
        summary = surrogate_baseline(source, target, args.surrogates, args.seed, threads=args.threads, **options)
        lines.append(
            f"surrogates ({args.surrogates}): mean={summary.mean:.6f}, std={summary.std:.6f}, "
            f"z={summary.z_score:.3f}, p={summary.p_value:.4f}"
        )

    manifest = RunManifest(
        "estimate",
        _parameters(args),
        inputs={str(args.input): sha256_of(args.input)},
        seeds={"surrogates": args.seed} if args.surrogates else {},
    )
    if args.dump_logs is not None and forward.per_sample_logs is not None:
        save_csv(Dataset.from_columns({"log2_ratio": forward.per_sample_logs}), args.dump_logs)
        manifest.wall_time_s = time.perf_counter() - started
        manifest.write_for(args.dump_logs)

    _emit("\n".join(lines) + "\n", args.out, manifest, started)
    return 0


def _grid(text: str) -> NDArray[np.float64]:
    """Parse `lo:hi:count` into `count` evenly spaced values."""
    try:
        lo_text, hi_text, count_text = text.split(":")
        lo, hi, count = float(lo_text), float(hi_text), int(count_text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like lo:hi:count, got {text!r}") from None
    if not (0.0 <= lo <= hi <= 1.0):
        raise argparse.ArgumentTypeError(f"grid bounds must satisfy 0 <= lo <= hi <= 1, got {lo} and {hi}")
    if count < 1 or (count > 1 and lo == hi):
        raise argparse.ArgumentTypeError(f"grid needs a positive count and distinct bounds for count > 1, got {text!r}")
    return np.linspace(lo, hi, count)


def cmd_sweep(args: argparse.Namespace) -> int:
    """Scan a grid of coupling strengths, recording synchronization error and transfer in both directions."""
    started = time.perf_counter()
    cells = [(float(eps), float(mu)) for eps in args.eps_grid for mu in args.mu_grid]
    if len(cells) < 2:
        raise ValueError(f"a sweep needs at least 2 grid cells, got {len(cells)}")
    options = _estimation_options(args)

    def run_cell(cell: tuple[float, float]) -> tuple[float, float, float]:
        eps, mu = cell
        data = iterate_coupled(CouplingParams(eps, mu, args.a), args.x0, args.y0, args.n, args.transient)
        sync = sync_error(data)
        if args.standardize:
            data = data.standardized()
        x = delay_embed(data["x"], args.d, args.tau)
        y = delay_embed(data["y"], args.d, args.tau)
        try:
            i_xy = transfer_entropy(x, y, **options).value_bits
            i_yx = transfer_entropy(y, x, **options).value_bits
        except ValueError as e:
            raise ValueError(f"cell eps={eps}, mu={mu}: {e}") from e
        logger.info("eps=%.4f mu=%.4f: I_xy=%.6f I_yx=%.6f", eps, mu, i_xy, i_yx)
        return sync, i_xy, i_yx

    results = np.array(parallel_map(run_cell, cells, args.threads))
    grid = np.array(cells)
    table = Dataset.from_columns(
        {"eps": grid[:, 0], "mu": grid[:, 1], "sync_err": results[:, 0], "I_xy": results[:, 1], "I_yx": results[:, 2]}
    )

    manifest = RunManifest("sweep", _parameters(args), seeds={"x0": args.x0, "y0": args.y0}, notes=_apex_notes(args.a))
    _emit(render_csv(table), args.out, manifest, started)
    return 0


def render_flow(result: FlowResult) -> str:
    """Render a transfer matrix with net flows as an aligned text table."""
    width = max(12, *(len(label) + 2 for label in result.labels))
    lines = ["transfer entropy (bits/step), row = source, column = target"]
    lines.append(" " * width + "".join(f"{label:>{width}}" for label in result.labels))
    for label, row in zip(result.labels, result.te_matrix):
        lines.append(f"{label:<{width}}" + "".join(f"{value:>{width}.6f}" for value in row))
    lines.append("net flow")
    lines += [f"{label:<{width}}{value:>{width}.6f}" for label, value in zip(result.labels, result.net_flow)]
    lines.append(f"sum of net flows = {result.total_net_flow:.3e}")
    return "\n".join(lines) + "\n"


def render_flow_csv(result: FlowResult) -> str:
    """Render a transfer matrix as CSV: one row per source channel, followed by its net flow."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["source", *result.labels, "net_flow"])
    for label, row, flow in zip(result.labels, result.te_matrix, result.net_flow):
        writer.writerow([label, *(repr(float(v)) for v in row), repr(float(flow))])
    return buffer.getvalue()


def cmd_netflow(args: argparse.Namespace) -> int:
    """Estimate the transfer matrix between all columns of a CSV file and the net flow of each column."""
    started = time.perf_counter()
    dataset = load_csv(args.input, args.delimiter)
    result = te_matrix(
        dataset,
        d=args.d,
        tau=args.tau,
        standardize=args.standardize,
        threads=args.threads,
        **_estimation_options(args),
    )
    sys.stdout.write(render_flow(result))

    if args.out is not None:
        manifest = RunManifest("netflow", _parameters(args), inputs={str(args.input): sha256_of(args.input)})
        _emit(render_flow_csv(result), args.out, manifest, started)
    return 0


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    parser.add_argument("--seed", type=int, default=0, help="seed for measurement noise and surrogate offsets")
    parser.add_argument("--out", default=None, help="output file (default stdout); a manifest is written beside it")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for debug output")


def _add_estimation_arguments(parser: argparse.ArgumentParser, default_d: int) -> None:
    group = parser.add_argument_group("estimation")
    group.add_argument("--d", type=int, default=default_d, help=f"embedding dimension (default {default_d})")
    group.add_argument("--tau", type=int, default=1, help="embedding delay in samples (default 1)")
    group.add_argument("--k", type=int, default=1, help="zero-order neighbor count (default 1)")
    group.add_argument("--order", type=int, choices=[0, 1], default=0, help="local model order (default 0)")
    group.add_argument("--m", type=int, default=None, help="first-order neighborhood size (default 2(d+1))")
    group.add_argument(
        "--r-policy", choices=[mode.value for mode in RMode], default=RMode.MATCHED.value, help="how r follows sigma"
    )
    group.add_argument("--r-coef", type=float, default=1.0, help="coefficient c of the r-policy")
    group.add_argument("--window", type=int, default=0, help="temporal exclusion window for neighbors (default 0)")
    group.add_argument("--standardize", action="store_true", help="z-score every channel before embedding")
    group.add_argument(
        "--require-improvement",
        action="store_true",
        help="report 0 when the source does not lower the residual spread of the target model",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG, description="Transfer entropy between time series from nearest-neighbor local models."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="generate data from a built-in system")
    simulate.add_argument("system", choices=["tent", "coupled", "chua"])
    simulate.add_argument("--n", type=int, default=None, help="number of samples (500 for maps, 1024 for chua)")
    simulate.add_argument("--transient", type=int, default=None, help="discarded iterates or RK4 steps")
    simulate.add_argument("--a", type=float, default=None, help="tent apex (0.65 for tent, 0.5 for coupled)")
    simulate.add_argument("--eps", type=float, default=0.0, help="coupling of y into x")
    simulate.add_argument("--mu", type=float, default=0.0, help="coupling of x into y")
    simulate.add_argument("--x0", type=float, default=DEFAULT_SEEDS[0])
    simulate.add_argument("--y0", type=float, default=DEFAULT_SEEDS[1])
    chua = ChuaParams()
    simulate.add_argument("--alpha", type=float, default=chua.alpha)
    simulate.add_argument("--beta", type=float, default=chua.beta)
    simulate.add_argument("--m0", type=float, default=chua.m0)
    simulate.add_argument("--m1", type=float, default=chua.m1)
    simulate.add_argument("--dt", type=float, default=chua.dt, help="RK4 step")
    simulate.add_argument("--stride", type=int, default=chua.stride, help="RK4 steps between samples")
    simulate.add_argument("--noise", type=float, default=0.0, help="relative Gaussian measurement noise level")
    _add_common_arguments(simulate)
    simulate.set_defaults(handler=cmd_simulate)

    estimate = commands.add_parser("estimate", help="transfer entropy between two columns of a CSV file")
    estimate.add_argument("input", help="CSV file with a header row")
    estimate.add_argument("--source", required=True, help="source column")
    estimate.add_argument("--target", required=True, help="target column")
    estimate.add_argument("--delimiter", default=",")
    estimate.add_argument("--surrogates", type=int, default=0, help="number of shifted-source surrogates (>= 19)")
    estimate.add_argument("--dump-logs", default=None, help="write the per-sample log2 ratios of source -> target")
    _add_estimation_arguments(estimate, default_d=1)
    _add_common_arguments(estimate)
    estimate.set_defaults(handler=cmd_estimate)

    sweep = commands.add_parser("sweep", help="coupled tent maps over a grid of coupling strengths")
    sweep.add_argument("--eps-grid", type=_grid, default="0:1:11", help="lo:hi:count (default 0:1:11)")
    sweep.add_argument("--mu-grid", type=_grid, default="0:1:11", help="lo:hi:count (default 0:1:11)")
    sweep.add_argument("--a", type=float, default=0.5, help="tent apex (default 0.5)")
    sweep.add_argument("--n", type=int, default=500)
    sweep.add_argument("--transient", type=int, default=MAP_TRANSIENT)
    sweep.add_argument("--x0", type=float, default=DEFAULT_SEEDS[0])
    sweep.add_argument("--y0", type=float, default=DEFAULT_SEEDS[1])
    _add_estimation_arguments(sweep, default_d=1)
    _add_common_arguments(sweep)
    sweep.set_defaults(handler=cmd_sweep)

    netflow = commands.add_parser("netflow", help="transfer matrix and net flow of every column of a CSV file")
    netflow.add_argument("input", help="CSV file with a header row")
    netflow.add_argument("--delimiter", default=",")
    _add_estimation_arguments(netflow, default_d=FLOW_DIMENSION)
    _add_common_arguments(netflow)
    netflow.set_defaults(handler=cmd_netflow)

    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line and return the exit status: 0 on success, 1 on a failed run, 2 on a usage error."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)

    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except KeyError as e:
        print(f"{PROG}: error: {e.args[0] if e.args else e}", file=sys.stderr)
    except (ValueError, OSError, FloatingPointError) as e:
        print(f"{PROG}: error: {e}", file=sys.stderr)
    return 1
