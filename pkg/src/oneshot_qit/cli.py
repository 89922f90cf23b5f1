"""``oneshot-qit`` command line: compute quantities, simulate protocols, run checks.

Exit codes: 0 success, 2 bad configuration or input file, 3 input state fails
validation, 4 predicted memory use exceeds ``ONESHOT_QIT_MEM_BUDGET``. For
``verify`` a nonzero violation count also exits 1.

Reports are JSON files named by a hash of their manifest (the timestamp is
excluded from the hash), so reruns of the same command land on the same file
and existing files are never rewritten.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np
from scipy import stats

from . import __version__
from .entropics import d_hypo, d_max, d_max_smooth, i_hypo, i_max, i_max_smooth
from .protocols import (
    ProtocolConfig,
    ResourceBudgetError,
    ajw_simulate,
    b_star_distribution,
    blocked_protocol_simulate,
    general_decoding_simulate,
    rejection_sample_many,
    rejection_success_probability,
    successive_simulate,
)
from .qmat import DomainError, LabelError, PreconditionError, load_json, partial_trace, purify, tensor
from .states import (
    amplitude_damping_channel,
    bell_state,
    depolarizing_channel,
    general_channel,
    ghz_state,
    identity_channel,
    im_extended_channel,
    ImState,
    random_im_state,
    random_state,
    trial_rng,
)
from .verify import _round, run_check

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_STATE, EXIT_BUDGET = 0, 1, 2, 3, 4
QUANTITIES = ("dh", "ih", "dmax", "imax", "dmax-smooth", "imax-smooth")
PROTOCOLS = ("ajw", "successive", "general", "blocked", "rejection")
CHECKS = ("prop1", "thm1", "thm2", "converse", "lemmas")


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        self.code = code
        super().__init__(msg)


# --------------------------------------------------------------------------- #
# Manifest and report writing                                                 #
# --------------------------------------------------------------------------- #


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_manifest(subcommand: str, config: dict, seed, inputs: list[str]) -> dict:
    return {
        "subcommand": subcommand,
        "config": config,
        "seed": seed,
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "inputs": {p: _sha256(p) for p in inputs},
    }


def manifest_hash(manifest: dict) -> str:
    body = {k: v for k, v in manifest.items() if k != "timestamp"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()


def write_report(out_dir: str, manifest: dict, result: dict, csv_text: str | None = None) -> Path:
    """Write ``{manifest, result}`` as JSON (plus optional CSV); existing files are left alone."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    stem = f"{manifest['subcommand']}-{manifest_hash(manifest)[:16]}"
    path = d / f"{stem}.json"
    if not path.exists():
        path.write_text(json.dumps({"manifest": manifest, "result": result}, sort_keys=True, indent=1) + "\n")
    if csv_text is not None:
        cpath = d / f"{stem}.csv"
        if not cpath.exists():
            cpath.write_text(csv_text)
    return path


# --------------------------------------------------------------------------- #
# Input helpers                                                               #
# --------------------------------------------------------------------------- #


def _load_state(path: str):
    try:
        return load_json(path)
    except PreconditionError as exc:
        raise CliError(EXIT_STATE, f"{path}: invalid state: {exc}") from None
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_CONFIG, f"{path}: cannot read matrix: {exc}") from None


def _parse_cut(cut: str | None, labels) -> tuple[list[str], list[str]]:
    if not cut:
        if len(labels) != 2:
            raise CliError(EXIT_CONFIG, "--cut is required for states with more than two registers")
        return [labels[0]], [labels[1]]
    if cut.count(":") != 1:
        raise CliError(EXIT_CONFIG, f"--cut must look like 'A,B:C', got {cut!r}")
    left, right = cut.split(":")
    return [x for x in left.split(",") if x], [x for x in right.split(",") if x]


def _parse_dims(s: str) -> list[int]:
    try:
        dims = [int(x) for x in s.split(",")]
    except ValueError:
        raise CliError(EXIT_CONFIG, f"--dims must be comma-separated integers, got {s!r}") from None
    if len(dims) != 3 or min(dims) < 1:
        raise CliError(EXIT_CONFIG, "--dims needs three positive dimensions")
    return dims


# --------------------------------------------------------------------------- #
# Subcommands                                                                 #
# --------------------------------------------------------------------------- #


def cmd_compute(args) -> tuple[dict, list[str], str | None]:
    q = args.quantity
    inputs = []
    if q in ("dh", "dmax", "dmax-smooth"):
        if not (args.rho and args.sigma):
            raise CliError(EXIT_CONFIG, f"{q} needs --rho and --sigma")
        rho, sigma = _load_state(args.rho), _load_state(args.sigma)
        inputs = [args.rho, args.sigma]
        if rho.space.total_dim != sigma.space.total_dim:
            raise CliError(EXIT_CONFIG, "rho and sigma have different dimensions")
        if q == "dh":
            val = d_hypo(rho, sigma, args.eps)[0]
        elif q == "dmax":
            val = d_max(rho, sigma)
        else:
            val = d_max_smooth(rho, sigma, args.eps, ball=args.ball)
    else:
        path = args.state or args.rho
        if not path:
            raise CliError(EXIT_CONFIG, f"{q} needs --state")
        st = _load_state(path)
        inputs = [path]
        cut = _parse_cut(args.cut, st.labels)
        if q == "ih":
            val = i_hypo(st, cut, args.eps)[0]
        elif q == "imax":
            val = i_max(st, cut)
        else:
            val = i_max_smooth(st, cut, args.eps, marginals=args.marginals, ball=args.ball)
    result = {"quantity": q} | val.to_dict()
    line = f"{q} = {val.value:.12g}  bracket [{val.lower:.12g}, {val.upper:.12g}]"
    return result, inputs, line


def _channel_by_name(name: str, p: float):
    if name == "identity":
        return identity_channel(2, "A", "B")
    if name == "depolarizing":
        return depolarizing_channel(p, 2, "A", "B")
    if name == "damping":
        return amplitude_damping_channel(p, "A", "B")
    raise CliError(EXIT_CONFIG, f"unknown channel {name!r}")


def _tripartite(args, inputs: list[str]):
    if args.state:
        inputs.append(args.state)
        st = _load_state(args.state)
        if set(st.labels) != {"Af", "Bf", "C"}:
            raise CliError(EXIT_CONFIG, "state must have registers Af, Bf, C")
        return st.permute(["Af", "Bf", "C"])
    if args.ghz:
        return ghz_state(("Af", "Bf", "C"))
    return random_state([("Af", 2), ("Bf", 2), ("C", 2)], seed=trial_rng(args.seed, 0))


def cmd_protocol(args) -> tuple[dict, list[str], str]:
    inputs: list[str] = []
    if args.protocol == "rejection":
        return _cmd_rejection(args), inputs, None
    try:
        cfg = ProtocolConfig(M=args.M, N=args.N, eps=args.eps, delta=args.delta, mode=args.mode,
                             trials=args.trials, seed=args.seed, block_size=args.block_size)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    p = args.protocol
    if p == "ajw":
        out = ajw_simulate(_channel_by_name(args.channel, args.p), bell_state("EA", "EB"), cfg)
    elif p == "successive":
        if args.state:
            inputs.append(args.state)
            try:
                im = ImState(_load_state(args.state).permute(["Af", "Bf", "C"]))
            except PreconditionError as exc:
                raise CliError(EXIT_STATE, f"not an IM-state: {exc}") from None
        else:
            im = random_im_state(2, 2, 2, seed=trial_rng(args.seed, 0))
        phi1, phi2 = purify(im.rho_af, "A"), purify(im.rho_bf, "B")
        out = successive_simulate(im_extended_channel(im, phi1, phi2), phi1, phi2, cfg)
    elif p == "general":
        rho = _tripartite(args, inputs)
        rab = partial_trace(rho, ["Af", "Bf"]).permute(["Af", "Bf"])
        varphi = purify(rab, [("A", rab.space.dim("Af")), ("B", rab.space.dim("Bf"))])
        out = general_decoding_simulate(general_channel(rho, varphi), varphi, cfg)
    else:
        out = blocked_protocol_simulate(_tripartite(args, inputs), cfg)
    res = out.to_json()
    line = (f"{p}: avg error {out.avg_error:.6g}, max error {out.max_error:.6g}, abort {out.abort_prob:.6g}, "
            f"rate feasible {out.rate_feasible}, bound {out.bound_value} holds {out.bound_holds}")
    return res, inputs, line


def _cmd_rejection(args) -> dict:
    if args.imax is None or args.imax < 0:
        raise CliError(EXIT_CONFIG, "rejection needs --imax >= 0")
    if not 0 < args.delta < 1:
        raise CliError(EXIT_CONFIG, "--delta must lie in (0, 1)")
    p0 = 2.0 ** (-args.imax)
    n = args.block_size or max(1, math.ceil(2.0**args.imax / args.delta - 1e-9))
    success, b_star = rejection_sample_many(p0, n, args.trials, args.seed)
    rate = float(success.mean())
    exact = rejection_success_probability(p0, n)
    sd = math.sqrt(exact * (1 - exact) / args.trials)
    counts = np.bincount(b_star[success], minlength=n)
    chi = stats.chisquare(counts) if n > 1 and counts.sum() else None
    res = {
        "p0": p0,
        "copies": n,
        "shots": args.trials,
        "success_rate": rate,
        "success_probability": exact,
        "sigma": sd,
        "z": abs(rate - exact) / sd if sd > 0 else 0.0,
        "abort_probability": 1 - exact,
        "abort_bound": math.exp(-1 / args.delta),
        "abort_holds": bool(1 - exact <= math.exp(-1 / args.delta) + 1e-12),
        "b_star_counts": counts.tolist(),
        "b_star_distribution": b_star_distribution(p0, n).tolist(),
        "chi2_pvalue": None if chi is None else float(chi.pvalue),
    }
    return res


def cmd_verify(args) -> tuple[dict, list[str], str, str, int]:
    dims = _parse_dims(args.dims)
    try:
        rep = run_check(args.check, args.trials, args.seed, dims, args.eps)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from None
    s = rep.summary()
    line = (f"{args.check}: {s['trials']} trials, {s['pass']} pass, {s['violation']} violations, "
            f"{s['inconclusive']} inconclusive, {s['vacuous']} vacuous, {s['skipped']} skipped")
    code = EXIT_OK if rep.violations == 0 else EXIT_VIOLATION
    return rep.to_dict(), [], line, rep.to_csv(), code


# --------------------------------------------------------------------------- #
# Parser                                                                      #
# --------------------------------------------------------------------------- #


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(EXIT_CONFIG, message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="oneshot-qit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out-dir", default="reports", help="report directory (default: reports)")
        p.add_argument("--quiet", action="store_true")

    c = sub.add_parser("compute", help="evaluate an entropic quantity")
    c.add_argument("quantity", choices=QUANTITIES)
    c.add_argument("--rho")
    c.add_argument("--sigma")
    c.add_argument("--state")
    c.add_argument("--cut", help="bipartition such as 'A:B' or 'A,B:C'")
    c.add_argument("--eps", type=float, default=0.0)
    c.add_argument("--ball", choices=("trace", "purified"), default="trace")
    c.add_argument("--marginals", choices=("original", "smoothed"), default="original")
    common(c)

    p = sub.add_parser("protocol", help="simulate a coding protocol")
    p.add_argument("protocol", choices=PROTOCOLS)
    p.add_argument("--M", type=int, default=2)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--mode", choices=("exact", "monte_carlo"), default="exact")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--block-size", type=int)
    p.add_argument("--channel", choices=("identity", "depolarizing", "damping"), default="identity")
    p.add_argument("--p", type=float, default=0.1, help="channel noise parameter")
    p.add_argument("--state", help="tripartite state file on registers Af, Bf, C")
    p.add_argument("--ghz", action="store_true", help="use the GHZ state on Af, Bf, C")
    p.add_argument("--imax", type=float, help="max-information for the rejection sampler")
    common(p)

    v = sub.add_parser("verify", help="run a verification sweep")
    v.add_argument("check", choices=CHECKS)
    v.add_argument("--trials", type=int, default=50)
    v.add_argument("--dims", default="2,2,2")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--eps", type=float)
    common(v)
    return ap


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out_dir", "quiet", "command")}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        csv_text = None
        code = EXIT_OK
        if args.command == "compute":
            result, inputs, line = cmd_compute(args)
        elif args.command == "protocol":
            result, inputs, line = cmd_protocol(args)
        else:
            result, inputs, line, csv_text, code = cmd_verify(args)
        if line is None:
            line = json.dumps(_round(result), sort_keys=True)
        manifest = make_manifest(args.command, _config(args), getattr(args, "seed", None), inputs)
        path = write_report(args.out_dir, manifest, _round(result), csv_text)
        if not args.quiet:
            print(line)
            print(f"report: {path}")
        return code
    except CliError as exc:
        print(f"oneshot-qit: error: {exc}", file=sys.stderr)
        return exc.code
    except ResourceBudgetError as exc:
        print(f"oneshot-qit: error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PreconditionError as exc:
        print(f"oneshot-qit: error: {exc}", file=sys.stderr)
        return EXIT_STATE
    except (LabelError, DomainError, ValueError) as exc:
        print(f"oneshot-qit: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
