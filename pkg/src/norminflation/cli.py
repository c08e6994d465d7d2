"""Command-line entry point.

Every subcommand writes one CSV (``--output`` inside ``--out-dir``) and a
``<output>.meta.json`` sidecar.  Data files hold no timestamps, so repeated
runs with the same arguments give byte-identical CSVs.  Validation failures
exit with status 2 and print a single ``reason=...`` line on stderr.
"""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .approx import FIRST, SECOND, error_order
from .errors import NormInflationError
from .inflation import CASES, ExperimentSpec, run_experiment
from .modes import ModeField, wiener_norm
from .resonance import enumerate_resonant, resonant_cubic_1d, resonant_cubic_multid
from .spectral import SolverConfig, default_grid_size, evolve, grid_to_modes, modes_to_grid
from .transport import build_system, integrate_corrector, integrate_transport

INFLATE_HEADER = "n,baseN,kappa,eps,t_n,norm_in,norm_out,zero_mode_abs,lower_bound"
# options that belong to the harness rather than to a computation
HARNESS_KEYS = {"config", "out_dir", "output", "threads", "seed", "command"}


class UsageError(Exception):
    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        reason = "unknown-subcommand" if "invalid choice" in message and "command" in message else "invalid-parameters"
        raise UsageError(reason, message)


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _parse_mode(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(c) for c in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad mode {text!r}") from exc


def _parse_modes(text: str) -> list[tuple[int, ...]]:
    """Modes separated by ``;``, components by ``,`` (``"1;2"`` or ``"1,0;0,1"``)."""
    return [_parse_mode(part) for part in text.split(";") if part.strip()]


def _parse_eps(text: str) -> float:
    try:
        value = float(Fraction(text.strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad eps {text!r}") from exc
    return value


def _parse_eps_list(text: str) -> list[float]:
    return [_parse_eps(part) for part in text.split(",") if part.strip()]


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"bad boolean {text!r}")


def _flag(parser, name: str, help: str):
    parser.add_argument(name, type=_parse_bool, nargs="?", const=True, default=False, help=help)


def _initial(args) -> ModeField:
    if getattr(args, "input", None):
        try:
            return ModeField.from_json(Path(args.input).read_text())
        except OSError as exc:
            raise UsageError("invalid-parameters", f"cannot read {args.input}: {exc}") from exc
    modes = args.modes
    return ModeField.unit(modes, len(modes[0]))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="norminflation", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="directory for the CSV and its sidecar")
    common.add_argument("--output", default=None, help="CSV file name (default: <subcommand>.csv)")
    common.add_argument("--config", default=None, help="file of key=value lines; flags win")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--seed", type=int, default=0, help="recorded only; no computation is random")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    parser.subcommands = sub.choices

    p = sub.add_parser("resonance", parents=[common], help="enumerate a resonant set")
    p.add_argument("--sigma", type=int, default=1)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--j", type=_parse_mode, default=None, help="target mode, e.g. 0 or 1,0")
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--method", choices=("oracle", "closed"), default="oracle")

    p = sub.add_parser("transport", parents=[common], help="integrate the amplitude system")
    p.add_argument("--modes", type=_parse_modes, default=[(1,), (2,)])
    p.add_argument("--input", default=None, help="ModeField JSON of initial amplitudes")
    p.add_argument("--sigma", type=int, default=1)
    p.add_argument("--K", type=int, default=8)
    _flag(p, "--renormalized", "use the renormalized cubic equation")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--corrector-eps", type=_parse_eps, default=None, help="also integrate b at this eps")
    p.add_argument("--corrector-dt", type=float, default=None, help="default eps/200")
    p.add_argument("--every", type=int, default=1, help="write every k-th sample")

    p = sub.add_parser("solve", parents=[common], help="split-step solve of the semiclassical equation")
    p.add_argument("--modes", type=_parse_modes, default=[(1,), (2,)])
    p.add_argument("--input", default=None, help="ModeField JSON of initial data")
    _flag(p, "--physical", "take modes as grid wavenumbers instead of slow labels j at j/eps")
    p.add_argument("--eps", type=_parse_eps, default=1 / 16)
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--dt", type=float, default=None, help="default eps/100")
    p.add_argument("--sigma", type=int, default=1)
    p.add_argument("--mu", type=int, default=1)
    _flag(p, "--renormalized", "use the renormalized cubic equation")
    p.add_argument("--M", type=int, default=None, help="grid points per axis")
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-12, help="coefficients below this are dropped")

    p = sub.add_parser("approx-error", parents=[common], help="fit the approximation error order")
    p.add_argument("--modes", type=_parse_modes, default=[(1,), (2,)])
    p.add_argument("--input", default=None, help="ModeField JSON of initial amplitudes")
    p.add_argument("--order", choices=(FIRST, SECOND), default=FIRST)
    p.add_argument("--eps-list", type=_parse_eps_list, default=[1 / 8, 1 / 16, 1 / 32, 1 / 64])
    p.add_argument("--T", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=64)
    p.add_argument("--sigma", type=int, default=1)
    _flag(p, "--renormalized", "use the renormalized cubic equation")
    p.add_argument("--K", type=int, default=8)
    p.add_argument("--dt-factor", type=float, default=None, help="solver step as a multiple of eps")
    _flag(p, "--resonant-only", "couple b to a through resonant triples only")

    p = sub.add_parser("inflate", parents=[common], help="run a norm-inflation sweep")
    p.add_argument("--case", choices=CASES, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--r", type=float, default=0.0)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--beta", type=Fraction, default=None)
    p.add_argument("--baseN-list", dest="baseN_list", type=_parse_int_list, default=None)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--sigma", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--K", type=int, default=8)
    _flag(p, "--cross-validate", "compare with the split-step solver where affordable")
    return parser


def _read_config(path: str) -> dict[str, str]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError("invalid-parameters", f"cannot read config {path}: {exc}") from exc
    out = {}
    for num, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError("invalid-parameters", f"config line {num} is not key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def parse_args(argv) -> argparse.Namespace:
    argv = list(argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in parser.subcommands), None)
    if known.config is not None and command is not None:
        values = _read_config(known.config)
        sub = parser.subcommands[command]
        allowed = {a.dest for a in sub._actions} - HARNESS_KEYS - {"help"}
        unknown = sorted(set(values) - allowed)
        if unknown:
            raise UsageError("invalid-parameters", f"unknown config keys: {', '.join(unknown)}")
        # config values become defaults, so explicit flags still win
        for action in sub._actions:
            if action.dest in values:
                action.required = False
        sub.set_defaults(**values)
    return parser.parse_args(argv)


def _check_writable(out_dir: Path):
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError("unwritable-output", f"cannot create {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise UsageError("unwritable-output", f"{out_dir} is not writable")


def _jsonable(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _write(args, rows: list[str], derived: dict, extra: dict[str, str] | None = None) -> Path:
    out_dir = Path(args.out_dir)
    name = args.output or f"{args.command}.csv"
    target = out_dir / name
    with open(target, "w", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    for fname, text in (extra or {}).items():
        (out_dir / fname).write_text(text)
    params = {k: _jsonable(v) for k, v in sorted(vars(args).items()) if k not in ("command", "out_dir", "output")}
    meta = {
        "version": __version__,
        "subcommand": args.command,
        "parameters": params,
        "derived": _jsonable(derived),
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
    }
    Path(f"{target}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return target


def cmd_resonance(args):
    j = args.j if args.j is not None else (0,) * args.d
    if len(j) != args.d:
        raise UsageError("dimension-mismatch", f"target {j} does not have dimension d={args.d}")
    if args.method == "closed":
        if args.sigma != 1:
            raise UsageError("unsupported", "closed forms exist only for sigma = 1")
        tuples = resonant_cubic_1d(j, args.K) if args.d == 1 else resonant_cubic_multid(j, args.K)
    else:
        tuples = enumerate_resonant(j, args.sigma, args.K)
    n = 2 * args.sigma + 1
    header = ["sigma", "d"] + [f"j_{c + 1}" for c in range(args.d)]
    header += [f"k{ell + 1}_{c + 1}" for ell in range(n) for c in range(args.d)]
    rows = [",".join(header)]
    for tup in tuples:
        rows.append(",".join(str(v) for v in (args.sigma, args.d, *j, *tup.flat())))
    return _write(args, rows, {"count": len(tuples)})


def cmd_transport(args):
    alpha = _initial(args)
    sys_ = build_system(list(alpha), args.sigma, alpha.dim, args.renormalized, args.K)
    traj = integrate_transport(alpha, sys_, args.T, args.dt)
    d = alpha.dim
    header = ["t"] + [f"j_{c + 1}" for c in range(d)] + ["re_a", "im_a", "re_b", "im_b"]
    rows = [",".join(header)]
    derived = {"active_modes": [list(j) for j in sys_.active_modes], "steps": len(traj.times) - 1}
    if args.corrector_eps is None:
        for i in range(0, len(traj.times), args.every):
            for j, a in zip(traj.modes, traj.values[i]):
                rows.append(",".join([_fmt(traj.times[i]), *map(str, j), _fmt(a.real), _fmt(a.imag), "0.0", "0.0"]))
    else:
        eps = args.corrector_eps
        dt_b = args.corrector_dt or eps / 200
        corr = integrate_corrector(traj, sys_, eps, dt_b)
        derived["corrector_support"] = [list(j) for j in corr.support]
        for i in range(0, len(corr.times), args.every):
            for j, a, b in zip(corr.modes, corr.amplitudes[i], corr.values[i]):
                rows.append(
                    ",".join(
                        [_fmt(corr.times[i]), *map(str, j), _fmt(a.real), _fmt(a.imag), _fmt(b.real), _fmt(b.imag)]
                    )
                )
    return _write(args, rows, derived)


def cmd_solve(args):
    cfg = SolverConfig(eps=args.eps, dt=args.dt, sigma=args.sigma, renormalized=args.renormalized, mu=args.mu)
    u0_modes = _initial(args)
    if not args.physical:
        u0_modes = u0_modes.relabeled(cfg.inverse_eps)
    # the grid rule is 8 max|j|/eps for slow labels, i.e. 8 max|m| for wavenumbers
    M = args.M or default_grid_size(list(u0_modes), 1.0)
    if args.samples < 1:
        raise UsageError("invalid-parameters", "samples must be >= 1")
    times = [args.T * k / args.samples for k in range(args.samples + 1)]
    states = evolve(modes_to_grid(u0_modes, M), cfg, times)
    rows = ["t,mass,wiener_norm"]
    for t, g in zip(times, states):
        rows.append(",".join([_fmt(t), _fmt(g.mass()), _fmt(wiener_norm(grid_to_modes(g, tol=args.tol)))]))
    final = grid_to_modes(states[-1], tol=args.tol)
    stem = Path(args.output or "solve.csv").stem
    return _write(args, rows, {"M": M, "final_modes": len(final)}, {f"{stem}.final.json": final.to_json() + "\n"})


def cmd_approx_error(args):
    alpha = _initial(args)
    sys_ = build_system(list(alpha), args.sigma, alpha.dim, args.renormalized, args.K)
    eps0 = args.eps_list[0]
    dt = None if args.dt_factor is None else args.dt_factor * eps0
    cfg = SolverConfig(eps=eps0, dt=dt, sigma=args.sigma, renormalized=args.renormalized)
    res = error_order(
        alpha, sys_, cfg, args.eps_list, args.order, args.T, args.samples,
        complete=not args.resonant_only, threads=args.threads,
    )
    rows = ["eps,sup_error"] + [f"{_fmt(e)},{_fmt(v)}" for e, v in zip(res.eps, res.errors)]
    rows.append(f"# slope={_fmt(res.slope)} residual={_fmt(res.residual)}")
    return _write(args, rows, {"slope": res.slope, "residual": res.residual})


def cmd_inflate(args):
    bases = args.baseN_list
    if bases is None:
        bases = [3, 4, 5, 6] if args.case in ("cubic-1d", "renormalized-1d") else [2, 3, 4, 5]
    spec = ExperimentSpec(
        case=args.case, s=args.s, baseN_list=tuple(bases), sigma=args.sigma, d=args.d,
        r=args.r, p=args.p, beta=args.beta, tau=args.tau, K=args.K, cross_validate=args.cross_validate,
    )
    run = run_experiment(spec, threads=args.threads)
    rows = [INFLATE_HEADER]
    for rec in run.records:
        rows.append(
            ",".join(
                _fmt(v)
                for v in (
                    rec.n, rec.baseN, rec.kappa, rec.eps, rec.t_n,
                    rec.norm_in, rec.norm_out, rec.zero_mode_abs, rec.lower_bound,
                )
            )
        )
    return _write(args, rows, run.meta)


COMMANDS = {
    "resonance": cmd_resonance,
    "transport": cmd_transport,
    "solve": cmd_solve,
    "approx-error": cmd_approx_error,
    "inflate": cmd_inflate,
}


def main(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
        if args.threads < 1:
            raise UsageError("invalid-parameters", "threads must be >= 1")
        _check_writable(Path(args.out_dir))
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"reason={exc.reason} {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    except NormInflationError as exc:
        print(f"reason={exc.reason} {' '.join(str(exc).split())}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
