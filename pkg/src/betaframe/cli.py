"""Command-line front end.

Exit codes: 0 success, 1 usage, 2 mathematical precondition violated,
3 I/O or malformed input, 4 an asserted bound was violated by an experiment.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import subprocess
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, lab
from .duals import BALANCED, MU_POLICIES, TRUNCATE, build_scheme, decode, encode, error_bound, scheme_from_dict
from .errors import DimMismatch, PreconditionError
from .frames import frame_from_source, read_matrix_csv
from .noise_shaping import QuantizationRecord

log = logging.getLogger("betaframe")

EXIT_OK, EXIT_USAGE, EXIT_MATH, EXIT_IO, EXIT_BOUND = 0, 1, 2, 3, 4
SEED_ENV = "BETAFRAME_SEED"


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# -- helpers ---------------------------------------------------------------------


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else str(float(v))
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.writer(buf, lineterminator="\n")
        cols = list(rows[0])
        w.writerow(cols)
        for r in rows:
            w.writerow([fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_table(path: Path, rows: list[dict], fmt_name: str) -> None:
    if fmt_name == "json":
        write_json(path, {"rows": rows})
    else:
        path.write_text(csv_text(rows))


def build_description() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(out: Path, args, started: float, status: str, summary=None, outputs=()) -> Path:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    manifest = {
        "build": build_description(),
        "command": args.command,
        "experiment": getattr(args, "experiment", None),
        "seed": getattr(args, "seed", None),
        "parameters": params,
        "outputs": [str(p) for p in outputs],
        "status": status,
        "summary": summary or {},
        "started_at": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
        "wall_time_s": time.time() - started,
    }
    path = out.with_name(out.name + ".manifest.json")
    write_json(path, manifest)
    return path


def parse_list(text, cast=float):
    try:
        return [cast(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad list {text!r}: {exc}") from None


def parse_mu_policy(text):
    if text in MU_POLICIES:
        return text
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"--mu-policy must be one of {MU_POLICIES} or a number, got {text!r}") from None


def load_vector(args) -> np.ndarray:
    if args.x is not None:
        return np.asarray(parse_list(args.x), dtype=float)
    if args.x_file is None:
        raise UsageError("one of --x or --x-file is required")
    try:
        return read_matrix_csv(args.x_file).ravel()
    except (OSError, ValueError) as exc:
        raise InputError(str(exc)) from None


def load_frame(source: str):
    try:
        return frame_from_source(source)
    except PreconditionError:
        raise
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot load frame {source!r}: {exc}") from None


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from None


# -- commands --------------------------------------------------------------------


def cmd_quantize(args) -> int:
    frame = load_frame(args.frame)
    x = load_vector(args)
    scheme = build_scheme(
        frame,
        l=args.l,
        L=args.L,
        mode=args.mode,
        eta=args.eta,
        mu_policy=parse_mu_policy(args.mu_policy),
        beta=args.beta,
        delta=args.delta,
    )
    record = encode(scheme, x)
    out = Path(args.out)
    result = {
        "scheme": scheme.to_dict(),
        "x": x,
        "record": record.to_dict(),
        "residual": record.residual(),
        "u_sup": float(np.max(np.abs(record.u))),
        "error_bound": error_bound(scheme),
    }
    write_json(out, result)
    args._outputs = [out]
    args._summary = {"residual": result["residual"], "u_sup": result["u_sup"]}
    print(f"wrote {out} (residual {result['residual']:.3e}, max|u| {result['u_sup']:.6g} <= delta {scheme.delta:.6g})")
    return EXIT_OK


def cmd_reconstruct(args) -> int:
    data = load_json(args.record)
    try:
        sch = data["scheme"]
        rec = QuantizationRecord.from_dict(data["record"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{args.record}: not a quantization record ({exc})") from None
    frame = load_frame(args.frame) if args.frame else None
    scheme = scheme_from_dict(sch, frame)
    q = rec.y if args.unquantized else rec.q
    x_hat = decode(scheme, q)
    bound = error_bound(scheme)
    result = {"x_hat": x_hat, "error_bound": bound, "unquantized": bool(args.unquantized)}
    if "x" in data:
        x = np.asarray(data["x"], dtype=float)
        if x.shape != x_hat.shape:
            raise DimMismatch(f"stored x has shape {x.shape}, reconstruction has {x_hat.shape}")
        result["error"] = float(np.linalg.norm(x - x_hat))
        result["within_bound"] = bool(result["error"] <= bound)
    out = Path(args.out)
    write_json(out, result)
    args._outputs = [out]
    args._summary = {k: result[k] for k in ("error", "error_bound") if k in result}
    msg = f"wrote {out} (bound {bound:.6g}"
    if "error" in result:
        msg += f", error {result['error']:.6g}"
    print(msg + ")")
    return EXIT_OK


def exp_hsc(args):
    rows = lab.hsc_experiment(parse_list(args.m, int), parse_list(args.L, int), args.n, args.seed)
    return rows, all(r["ok"] for r in rows), {"rows": len(rows)}


def exp_gaussian_decay(args):
    res = lab.gaussian_decay_experiment(
        k=args.k,
        L=args.L,
        m_list=parse_list(args.m, int),
        l_policy=args.l_policy,
        eta=args.eta,
        frames_per_m=args.frames,
        x_per_frame=args.x_per_frame,
        seed=args.seed,
        mu_policy=args.mu_policy,
        threads=args.threads,
    )
    for r in res.rows:
        r["fitted_rate"] = res.rate
        r["target_rate"] = res.target_rate
        r["mu_policy"] = args.mu_policy
    ok = res.violations == 0 and (args.min_rate is None or res.rate >= args.min_rate)
    return res.rows, ok, {"fitted_rate": res.rate, "target_rate": res.target_rate, "violations": res.violations}


def exp_svtail(args):
    rep = lab.svtail_experiment(args.l, args.k, args.eps, args.trials, args.seed)
    slack = 4.0 * rep.binomial_sd
    row = rep.to_dict()
    row["bound"] = rep.bound
    row["slack"] = slack
    row["ok"] = bool(rep.empirical_prob <= rep.bound + slack)
    if rep.bound_A1 is not None:
        row["A1_viable"] = lab.tail_bound_A1(args.l, args.k, args.eps).viable
    return [row], row["ok"], {"empirical_prob": rep.empirical_prob, "bound": rep.bound}


def exp_norm_event(args):
    freq = lab.gauss_norm_event(args.m, args.k, args.trials, args.seed)
    p = math.exp(-2.0 * args.m)
    slack = 4.0 * math.sqrt(p * (1.0 - p) / args.trials)
    row = {"m": args.m, "k": args.k, "trials": args.trials, "threshold": 4 * math.sqrt(args.m),
           "empirical_prob": freq, "bound": p, "slack": slack, "ok": freq <= p + slack}
    return [row], row["ok"], {"empirical_prob": freq}


def exp_optimal_params(args):
    rng = lab.rng_for(args.seed, 7)
    rows = []
    for _ in range(args.count):
        L = int(rng.integers(2, 17))
        alpha = 1.0 / (L - 1) + float(rng.uniform(0.05, 30.0))
        mu = float(rng.uniform(0.1, 20.0))
        rows.append(lab.optimal_params_check(alpha, mu, L, args.grid))
    return rows, all(r["ok"] for r in rows), {"count": len(rows)}


EXPERIMENTS = {
    "hsc": exp_hsc,
    "gaussian-decay": exp_gaussian_decay,
    "svtail": exp_svtail,
    "norm-event": exp_norm_event,
    "optimal-params": exp_optimal_params,
}


def cmd_experiment(args) -> int:
    rows, ok, summary = EXPERIMENTS[args.experiment](args)
    out = _output_path(args)
    write_table(out, rows, args.format)
    args._outputs = [out]
    args._summary = dict(summary, ok=bool(ok))
    print(f"wrote {out} ({len(rows)} rows); {'all bounds hold' if ok else 'BOUND VIOLATED'}")
    return EXIT_OK if ok else EXIT_BOUND


# -- parser ----------------------------------------------------------------------


def default_seed() -> int:
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def build_parser() -> tuple[argparse.ArgumentParser, list]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help=f"master seed (default ${SEED_ENV} or 0)")
    common.add_argument("--config", help="JSON file of default parameter values; flags override")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="betaframe", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    leaves = []

    q = sub.add_parser("quantize", parents=[common], help="encode one vector with a beta-dual scheme")
    q.add_argument("--frame", required=True, help="hsc:M | gaussian:M,K[,SEED] | csv:PATH")
    q.add_argument("--x", help="comma-separated vector")
    q.add_argument("--x-file", help="CSV file holding the vector")
    q.add_argument("--L", type=int, required=True, help="alphabet size")
    q.add_argument("--l", type=int, default=None, help="number of blocks (default k)")
    q.add_argument("--mode", choices=(BALANCED, TRUNCATE), default=BALANCED)
    q.add_argument("--mu-policy", default="exact")
    q.add_argument("--eta", type=float, default=0.0)
    q.add_argument("--beta", type=float)
    q.add_argument("--delta", type=float)
    q.add_argument("--out", default="record.json")
    q.set_defaults(func=cmd_quantize)
    leaves.append(q)

    r = sub.add_parser("reconstruct", parents=[common], help="decode a record written by quantize")
    r.add_argument("--record", required=True)
    r.add_argument("--frame", help="override the frame named in the record")
    r.add_argument("--unquantized", action="store_true", help="decode the raw measurements (test hook)")
    r.add_argument("--out", default="reconstruction.json")
    r.set_defaults(func=cmd_reconstruct)
    leaves.append(r)

    e = sub.add_parser("experiment", help="run a Monte Carlo experiment")
    esub = e.add_subparsers(dest="experiment", required=True, parser_class=_Parser)

    def exp(name, help_):
        p = esub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--out")
        p.set_defaults(func=cmd_experiment)
        leaves.append(p)
        return p

    p = exp("hsc", "harmonic semicircle frames")
    p.add_argument("--m", default="4,8,12")
    p.add_argument("--L", default="2,3,4")
    p.add_argument("--n", type=int, default=10_000)

    p = exp("gaussian-decay", "error decay on Gaussian frames")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--L", type=int, default=2)
    p.add_argument("--m", default="8,16,24,32")
    p.add_argument("--l-policy", choices=("square", "rect"), default="square")
    p.add_argument("--eta", type=float, default=0.0)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--x-per-frame", type=int, default=500)
    p.add_argument("--mu-policy", choices=MU_POLICIES, default="exact")
    p.add_argument("--min-rate", type=float, default=None, help="also fail if the fitted rate is below this")

    p = exp("svtail", "smallest singular value tails")
    p.add_argument("--l", type=int, default=6)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=100_000)

    p = exp("norm-event", "operator norm exceedance of 4 sqrt(m)")
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--trials", type=int, default=10_000)

    p = exp("optimal-params", "closed-form (beta, delta) against a grid")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--grid", type=int, default=200)

    return parser, leaves


def parse_args(argv):
    parser, leaves = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = load_json(args.config)
        if not isinstance(cfg, dict):
            raise InputError(f"{args.config}: config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        for leaf in leaves:
            leaf.set_defaults(**cfg)
        args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = default_seed()
    if getattr(args, "l", 0) is None:
        args.l = load_frame(args.frame).k
    return args


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    started = time.time()
    args = None
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        code = args.func(args)
        status = "ok" if code == EXIT_OK else "bound-violated"
    except SystemExit as exc:  # argparse: --help, --version, bad flags
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"betaframe: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PreconditionError as exc:
        print(f"betaframe: {type(exc).__name__}: {exc}", file=sys.stderr)
        code, status = EXIT_MATH, f"error: {type(exc).__name__}"
    except InputError as exc:
        print(f"betaframe: input error: {exc}", file=sys.stderr)
        code, status = EXIT_IO, "error: input"
    except OSError as exc:
        print(f"betaframe: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    if args is not None:
        outputs = getattr(args, "_outputs", [])
        target = outputs[0] if outputs else _output_path(args)
        clean = argparse.Namespace(**{k: v for k, v in vars(args).items() if not k.startswith("_")})
        try:
            write_manifest(target, clean, started, status, getattr(args, "_summary", None), outputs)
        except OSError as exc:
            print(f"betaframe: cannot write manifest: {exc}", file=sys.stderr)
            return code if code != EXIT_OK else EXIT_IO
    return code


def _output_path(args) -> Path:
    if args.command == "experiment":
        return Path(args.out or f"{args.experiment}.{args.format}")
    return Path(args.out)


if __name__ == "__main__":
    sys.exit(main())
