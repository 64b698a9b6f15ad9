"""Command-line interface.

Exit codes: 0 success, 1 input error, 2 a bound check failed, 3 numerical
failure.  The default worker count comes from ``CUTOFFLAB_THREADS``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import ChainAnalysis
from .bounds import FAIL, SKIPPED, SLACK_TOL, VerifyGrid, verify
from .cutoff import DEFAULT_EPS, sweep, window_consistency, verdict
from .errors import GenerationFailed, InputError, InvalidParams, NumericalError
from .families import FAMILIES, FamilySpec, generate
from .fileio import FORMATS, chain_to_csv, chain_to_text, flatten, format_table, read_chain, write_curves
from .info_stats import mixing_time_upper_bound

ENV_THREADS = "CUTOFFLAB_THREADS"
EXIT_OK, EXIT_INPUT, EXIT_CHECK, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("validate", "profile", "mixing-time", "verify", "sweep", "generate")
AUTO_GRID_POINTS = 64


@dataclass
class RunConfig:
    """Everything that determines a run's output.

    The worker count is deliberately absent: it never changes the output.
    """

    command: str
    chain: Optional[str] = None
    family: Optional[str] = None
    size: Optional[int] = None
    sizes: Optional[list] = None
    seed: int = 0
    degree: int = 3
    density: float = 0.3
    laziness: float = 0.0
    edgelist: Optional[str] = None
    epsilons: Optional[list] = None
    times: Optional[list] = None
    shifts: Optional[list] = None
    thetas: Optional[list] = None
    origins: Optional[list] = None
    heat_tol: Optional[float] = None
    t_tol: Optional[float] = None
    slack_tol: float = SLACK_TOL
    renormalize: bool = False
    strict: bool = False
    output_format: str = "table"
    output: Optional[str] = None
    plot_data: Optional[str] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise InvalidParams(f"unknown config keys: {', '.join(unknown)}")
        if d.get("command") not in COMMANDS:
            raise InvalidParams(f"config command must be one of {COMMANDS}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise InvalidParams(f"cannot read config {path}: {exc}") from None
        if not isinstance(d, dict):
            raise InvalidParams("config must be a JSON object")
        return cls.from_dict(d)

    def family_spec(self) -> FamilySpec:
        if self.family is None:
            raise InvalidParams("no family given (use --family)")
        return FamilySpec(
            family_id=self.family, size=self.size if self.size is not None else 2,
            laziness=self.laziness, seed=self.seed, degree=self.degree,
            density=self.density, edgelist=self.edgelist,
        )


# -- argument parsing ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidParams(f"{self.prog}: {message}")


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common() -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--csv", dest="output_format", action="store_const", const="csv")
    fmt.add_argument("--json", dest="output_format", action="store_const", const="json")
    p.add_argument("-o", "--output", help="write results here instead of stdout")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker cap (default: ${ENV_THREADS} or 1)")
    p.add_argument("--save-config", metavar="PATH", help="write the run configuration as JSON")
    p.add_argument("--heat-tol", type=float, help="Poisson truncation tolerance")
    p.add_argument("--t-tol", type=float, help="mixing-time bracket width")
    p.add_argument("--slack-tol", type=float, default=SLACK_TOL, help="relative slack allowed in bound checks")
    return p


def _source(p: argparse.ArgumentParser, chain_required: bool = False):
    p.add_argument("chain", nargs=None if chain_required else "?", help="chain file (.csv for dense)")
    p.add_argument("--renormalize", action="store_true", help="rescale rows off by at most 1e-9")
    _family_args(p)


def _family_args(p):
    p.add_argument("--family", choices=FAMILIES)
    p.add_argument("--size", type=int, help="states (dimension for hypercube)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--degree", type=int, default=3)
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--laziness", type=float, default=0.0)
    p.add_argument("--edgelist", help="edge list for srw-from-edgelist")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="cutofflab", description="Numerical cutoff diagnostics for finite Markov chains.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", metavar="PATH", help="rerun a saved configuration")
    parser.add_argument("--threads", type=int, default=None, dest="top_threads")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("validate", parents=[common], help="check a chain file and print its metrics")
    _source(p)

    p = sub.add_parser("profile", parents=[common], help="worst-case TV, KL and varentropy over time")
    _source(p)
    p.add_argument("--times", type=_floats, help="comma-separated times (default: 64-point log grid)")
    p.add_argument("--origins", type=_ints, help="restrict the worst case to these starting states")
    p.add_argument("--plot-data", metavar="DIR", help="write one CSV per curve")

    p = sub.add_parser("mixing-time", parents=[common], help="t_mix(eps) for a list of eps")
    _source(p)
    p.add_argument("--eps", dest="epsilons", type=_floats, help="default 0.25,0.5,0.75")
    p.add_argument("--origins", type=_ints)

    p = sub.add_parser("verify", parents=[common], help="run every bound check")
    _source(p)
    p.add_argument("--eps", dest="epsilons", type=_floats)
    p.add_argument("--times", type=_floats)
    p.add_argument("--shifts", type=_floats)
    p.add_argument("--thetas", type=_floats)
    p.add_argument("--strict", action="store_true", help="treat SKIPPED as failure")

    p = sub.add_parser("sweep", parents=[common], help="cutoff diagnostics along a family")
    _family_args(p)
    p.add_argument("--sizes", type=_ints, required=False)
    p.add_argument("--eps", dest="epsilons", type=_floats)
    p.add_argument("--plot-data", metavar="DIR", help="write one CSV per curve")

    p = sub.add_parser("generate", parents=[common], help="write a family member to a chain file")
    _family_args(p)
    return parser


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    names = {f.name for f in dataclasses.fields(RunConfig)}
    d = {k: v for k, v in vars(ns).items() if k in names and v is not None}
    d.setdefault("output_format", "table")
    return RunConfig(**d)


def default_threads() -> int:
    raw = os.environ.get(ENV_THREADS, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidParams(f"{ENV_THREADS} must be an integer, got {raw!r}") from None


# -- commands -----------------------------------------------------------------

def _load_chain(cfg: RunConfig):
    if cfg.chain is not None:
        if cfg.family is not None:
            raise InvalidParams("give either a chain file or --family, not both")
        return read_chain(cfg.chain, renormalize=cfg.renormalize)
    if cfg.family is None:
        raise InvalidParams("no chain given: pass a chain file or --family")
    if cfg.size is None and cfg.family not in ("lazy-two-state", "srw-from-edgelist"):
        raise InvalidParams("--size is required with --family")
    return generate(cfg.family_spec())


def _analysis(cfg: RunConfig, chain) -> ChainAnalysis:
    return ChainAnalysis(chain, tol=cfg.heat_tol, t_tol=cfg.t_tol, origins=cfg.origins)


@dataclass
class Output:
    """Ordered output sections; rendered once the command is done."""

    fmt: str
    sections: list = dataclasses.field(default_factory=list)

    def add(self, kind: str, records: list) -> None:
        self.sections.append((kind, records))

    def render(self) -> str:
        if self.fmt == "json":
            lines = []
            for kind, records in self.sections:
                tagged = [{"record": kind, **r} for r in records] if len(self.sections) > 1 else records
                lines.append(format_table(tagged, "json"))
            return "".join(lines)
        blocks = [format_table([flatten(r) for r in records], self.fmt) for _, records in self.sections]
        return "\n".join(b for b in blocks if b)


def cmd_validate(cfg: RunConfig, out: Output, threads: int) -> int:
    chain = _load_chain(cfg)
    m = chain.metrics
    nnz = np.diff(chain.csr.indptr)
    out.add("metrics", [{
        "n": chain.n,
        "storage": "sparse" if chain.is_sparse else "dense",
        "delta": m.delta,
        "diameter": m.diameter,
        "lip_constant_c": m.lip_constant_c,
        "max_row_nonzeros": int(nnz.max()),
        "symmetric_support": True,
        "connected": True,
    }])
    return EXIT_OK


def auto_grid(a: ChainAnalysis, points: int = AUTO_GRID_POINTS) -> list:
    """Log-spaced grid on ``[diam/4, 2 T]`` with ``T`` the spectral upper
    bound on ``t_mix(1/4)``; widened to a factor 4 if that range collapses."""
    lo = a.metrics.diameter / 4.0
    hi = max(2.0 * mixing_time_upper_bound(a.gamma, a.p, 0.25), 4.0 * lo)
    return [float(t) for t in np.geomspace(lo, hi, points)]


def cmd_profile(cfg: RunConfig, out: Output, threads: int) -> int:
    a = _analysis(cfg, _load_chain(cfg))
    times = cfg.times if cfg.times is not None else auto_grid(a)
    rows = [dataclasses.asdict(pt) for pt in a.points(times)]
    out.add("profile", rows)
    if cfg.plot_data:
        write_curves(cfg.plot_data, "t", [r["t"] for r in rows],
                     {k: [r[k] for r in rows] for k in ("dtv", "dkl", "vkl")})
    return EXIT_OK


def cmd_mixing_time(cfg: RunConfig, out: Output, threads: int) -> int:
    a = _analysis(cfg, _load_chain(cfg))
    eps = cfg.epsilons or list(DEFAULT_EPS)
    mix = a.mixing(eps)
    out.add("mixing_time", [{
        "epsilon": e,
        "t_mix": r.t_mix,
        "bracket_width": r.bracket_width,
        "dtv_at_t": r.dtv_at_t,
        "vkl_at_t": r.profile.vkl,
        "t_upper_bound": r.t_upper_bound,
    } for e, r in ((e, mix[e]) for e in eps)])
    return EXIT_OK


def _summary(reports, strict: bool) -> tuple[int, str]:
    counts = {s: sum(r.status == s for r in reports) for s in ("PASS", FAIL, SKIPPED)}
    failed = counts[FAIL] > 0 or (strict and counts[SKIPPED] > 0)
    text = f"{counts['PASS']} passed, {counts[FAIL]} failed, {counts[SKIPPED]} skipped"
    return (EXIT_CHECK if failed else EXIT_OK), text


def cmd_verify(cfg: RunConfig, out: Output, threads: int, log=sys.stderr) -> int:
    chain = _load_chain(cfg)
    a = _analysis(cfg, chain)
    grid = VerifyGrid(
        epsilons=tuple(cfg.epsilons or (0.25, 0.5, 0.75)),
        times=cfg.times, shifts=cfg.shifts,
        thetas=tuple(cfg.thetas or (0.25, 0.5, 1.0)),
    )
    reports = verify(chain, grid=grid, analysis=a, slack_tol=cfg.slack_tol)
    out.add("bound", [r.to_dict() for r in reports])
    code, text = _summary(reports, cfg.strict)
    print(f"verify: {text}", file=log)
    return code


def cmd_sweep(cfg: RunConfig, out: Output, threads: int, log=sys.stderr) -> int:
    if not cfg.sizes:
        raise InvalidParams("--sizes is required")
    records = sweep(cfg.family_spec(), cfg.sizes, cfg.epsilons or DEFAULT_EPS,
                    threads=threads, tol=cfg.heat_tol, t_tol=cfg.t_tol)
    out.add("size", [r.to_dict() for r in records])
    for r in records:
        if r.error is not None:
            print(f"sweep: size {r.size} failed: {r.error}", file=log)
    if len(records) >= 3:
        out.add("verdict", [verdict(records).to_dict()])
    reports = window_consistency(records)
    out.add("bound", [r.to_dict() for r in reports])
    if cfg.plot_data:
        ok = [r for r in records if r.error is None]
        ns = [r.n for r in ok]
        curves = {}
        for key in sorted({k for r in ok for k in r.window_ratio}, key=float):
            curves[f"window_ratio_eps{key}"] = [r.window_ratio.get(key, float("nan")) for r in ok]
        for key in sorted({k for r in ok for k in r.vc_statistic}, key=float):
            curves[f"vc_statistic_eps{key}"] = [r.vc_statistic[key] for r in ok]
        write_curves(cfg.plot_data, "n", ns, curves)
    code, text = _summary(reports, cfg.strict)
    print(f"sweep: window bound {text}", file=log)
    return code


def cmd_generate(cfg: RunConfig, out: Output, threads: int) -> int:
    if cfg.family is None:
        raise InvalidParams("--family is required")
    chain = _load_chain(cfg)
    as_csv = cfg.output is not None and cfg.output.lower().endswith(".csv")
    out.add("chain", chain_to_csv(chain) if as_csv else chain_to_text(chain))
    return EXIT_OK


HANDLERS = {
    "validate": cmd_validate,
    "profile": cmd_profile,
    "mixing-time": cmd_mixing_time,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "generate": cmd_generate,
}


def _error_record(exc: BaseException) -> dict:
    d = {"error": type(exc).__name__, "message": str(exc)}
    for attr in ("line", "row", "pair", "value", "total", "components", "origin", "state", "mass"):
        if getattr(exc, attr, None) is not None:
            x = getattr(exc, attr)
            d[attr] = [list(map(int, c)) for c in x] if attr == "components" else x
    return d


def run(cfg: RunConfig, threads: int = 1, stdout=None, stderr=None) -> int:
    """Execute ``cfg``; returns the exit code.  Errors are reported, not raised."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        if cfg.output_format not in FORMATS:
            raise InvalidParams(f"output format must be one of {FORMATS}")
        if threads < 1:
            raise InvalidParams(f"--threads must be >= 1, got {threads}")
        out = Output(cfg.output_format)
        handler = HANDLERS[cfg.command]
        if handler in (cmd_verify, cmd_sweep):
            code = handler(cfg, out, threads, log=stderr)
        else:
            code = handler(cfg, out, threads)
        if cfg.command == "generate":
            text = out.sections[0][1]
        else:
            text = out.render()
        if cfg.output:
            Path(cfg.output).write_text(text)
        else:
            stdout.write(text)
        return code
    except (InputError, GenerationFailed, OSError) as exc:
        return _report_error(exc, EXIT_INPUT, cfg.output_format, stderr)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _report_error(exc, EXIT_NUMERIC, cfg.output_format, stderr)


def _report_error(exc: BaseException, code: int, fmt: str, stderr) -> int:
    if fmt == "json":
        print(json.dumps(_error_record(exc), default=str), file=stderr)
    else:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
    return code


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        if ns.config:
            if ns.command is not None:
                raise InvalidParams("--config replaces the command line; give no command with it")
            cfg = RunConfig.load(ns.config)
            threads = ns.top_threads
            save = None
        else:
            if ns.command is None:
                raise InvalidParams("no command given; see --help")
            cfg = config_from_args(ns)
            threads = ns.threads if ns.threads is not None else ns.top_threads
            save = ns.save_config
        if threads is None:
            threads = default_threads()
        if save:
            cfg.save(save)
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg, threads)


if __name__ == "__main__":
    sys.exit(main())
