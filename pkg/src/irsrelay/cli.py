"""Command-line front end: ``irsrelay <subcommand> [options]``.

Exit status 0 on success, 1 on configuration errors, 2 when a trial ran out
of channel redraws.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path

from .channel import LINKS, NetworkConfig
from .errors import ConfigError, TrialFailure
from .experiments import (ALGORITHMS, SweepSpec, complexity_table, convergence_trace, run_sweep,
                          run_trial)
from .ons_sdp_psca import OnsOptions
from .zf_sca import LcOptions

log = logging.getLogger("irsrelay")

DEFAULT_GRIDS = {"sweep-power": "15,20,25,30", "sweep-antennas": "2,3,4", "sweep-elements": "16,32,64"}
SWEEP_PARAM = {"sweep-power": "p_dbm", "sweep-antennas": "m", "sweep-elements": "n"}


# -- config file ---------------------------------------------------------------------


def _floats(text, count=None):
    vals = [float(x) for x in text.replace(",", " ").split()]
    if count is not None and len(vals) != count:
        raise ValueError(f"expected {count} numbers")
    return tuple(vals)


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# key -> parser; network keys end up in NetworkConfig, the rest in run settings
CONFIG_KEYS = {
    "m": int, "n": int, "p_dbm": float, "noise_dbm": float, "split": lambda s: _floats(s, 3),
    "u1": lambda s: _floats(s, 3), "u2": lambda s: _floats(s, 3),
    "irs": lambda s: _floats(s, 3), "relay": lambda s: _floats(s, 3),
    "pl0_db": float, "d0": float,
    **{f"alpha_{k}": float for k in LINKS},
    "seed": int, "trials": int, "algo": str, "safeguard": _bool, "eta_denominator": str,
    "init": str, "max_outer": int, "delta": float, "workers": int,
}
ALIASES = {"p_total_dbm": "p_dbm", **{f"pos.{k}": k for k in ("u1", "u2", "irs", "relay")}}


def read_config(path) -> dict:
    """Parse ``key = value`` lines (``#`` starts a comment); unknown keys are errors."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (x.strip() for x in line.split("=", 1))
        key = ALIASES.get(key, key)
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def build_network(settings: dict) -> NetworkConfig:
    """NetworkConfig from merged settings; powers given in dBm are converted to watts."""
    kw = {k: settings[k] for k in ("m", "n", "u1", "u2", "irs", "relay", "pl0_db", "d0") if k in settings}
    alpha = dict(NetworkConfig().alpha)
    alpha.update({k: settings[f"alpha_{k}"] for k in LINKS if f"alpha_{k}" in settings})
    return NetworkConfig.from_dbm(settings.get("p_dbm", 30.0), settings.get("noise_dbm", -90.0),
                                  settings.get("split", (1.0, 1.0, 1.0)), alpha=alpha, **kw)


# -- argument parsing ----------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irsrelay", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value settings file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--m", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--p-dbm", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    algo = argparse.ArgumentParser(add_help=False)
    algo.add_argument("--algo", choices=("lc", "ons", "random", "relay", "all", "both"))
    algo.add_argument("--no-safeguard", action="store_true")
    algo.add_argument("--eta-denominator", choices=("c", "d"))
    algo.add_argument("--init", choices=("aligned", "ones", "random"))
    algo.add_argument("--max-outer", type=int)

    for name, helptext in (("sweep-power", "median rate against total power"),
                           ("sweep-antennas", "median rate against relay antennas"),
                           ("sweep-elements", "median rate against IRS elements")):
        sp = sub.add_parser(name, parents=[common, algo], help=helptext)
        sp.add_argument("--trials", type=int)
        sp.add_argument("--grid", help=f"comma separated values (default {DEFAULT_GRIDS[name]})")
        sp.add_argument("--workers", type=int)
    sp = sub.add_parser("converge", parents=[common, algo], help="per-iteration traces")
    sp = sub.add_parser("single-run", parents=[common, algo], help="one channel draw, every algorithm")
    sp = sub.add_parser("complexity", parents=[common], help="FLOP estimates against N")
    sp.add_argument("--n-grid", default="16:1024:x2", help="start:stop:xFACTOR or comma list")
    sp.add_argument("--d", type=float, default=6.0, help="outer iterations")
    sp.add_argument("--eps", type=float, default=0.1)
    return ap


def parse_n_grid(text: str) -> list:
    if ":" not in text:
        return [int(x) for x in text.split(",")]
    try:
        start, stop, step = text.split(":")
        start, stop = int(start), int(stop)
        if step.startswith("x"):
            f = int(step[1:])
            if f < 2:
                raise ValueError
            out, v = [], start
            while v <= stop:
                out.append(v)
                v *= f
            return out
        return list(range(start, stop + 1, int(step)))
    except ValueError:
        raise ConfigError(f"bad grid {text!r}; use start:stop:xFACTOR, start:stop:STEP or a list") from None


def _settings(args) -> dict:
    s = read_config(args.config) if args.config else {}
    for key in ("seed", "m", "n", "p_dbm", "trials", "algo", "eta_denominator", "init",
                "max_outer", "workers"):
        v = getattr(args, key, None)
        if v is not None:
            s[key] = v
    if getattr(args, "no_safeguard", False):
        s["safeguard"] = False
    return s


def _options(s: dict):
    lc, ons = LcOptions(), OnsOptions()
    common = {k: s[k] for k in ("init", "max_outer", "delta") if k in s}
    if "safeguard" in s:
        common["safeguard"] = s["safeguard"]
    lc = replace(lc, **common)
    ons = replace(ons, **common)
    if "eta_denominator" in s:
        if s["eta_denominator"] not in ("c", "d"):
            raise ConfigError("eta_denominator must be c or d")
        ons = replace(ons, denominator=s["eta_denominator"])
    return lc, ons


def _algorithms(choice, default=ALGORITHMS):
    if choice is None or choice == "all":
        return default
    if choice == "both":
        return ("lc", "ons")
    return (choice,)


@contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


# -- subcommands ---------------------------------------------------------------------


def _cmd_sweep(args, s):
    base = build_network(s)
    lc, ons = _options(s)
    grid = args.grid or DEFAULT_GRIDS[args.command]
    param = SWEEP_PARAM[args.command]
    try:
        values = tuple((float if param == "p_dbm" else int)(x) for x in grid.split(","))
    except ValueError:
        raise ConfigError(f"bad grid {grid!r}") from None
    spec = SweepSpec(param, values, s.get("trials", 20), base, s.get("seed", 0),
                     _algorithms(s.get("algo")), lc, ons)
    for v in values:
        spec.config_at(v)  # validate before spending time
    result = run_sweep(spec, workers=s.get("workers", 1))
    with _sink(args.out) as fh:
        result.write_csv(fh)
    if args.out:
        p = Path(args.out)
        with open(p.with_name(p.stem + ".summary" + (p.suffix or ".csv")), "w", newline="") as fh:
            result.write_summary_csv(fh)
    failed = sum(result.failures(v) for v in values)
    if failed:
        log.error("%d trial(s) ran out of channel redraws", failed)
        return 2
    return 0


def _cmd_converge(args, s):
    cfg = build_network(s)
    lc, ons = _options(s)
    algos = _algorithms(s.get("algo"), ("lc", "ons"))
    if set(algos) - {"lc", "ons"}:
        raise ConfigError("converge supports --algo lc, ons or both")
    for a in algos:
        tr = convergence_trace(cfg, s.get("p_dbm", 30.0), s.get("seed", 0), a, lc, ons)
        if args.out:
            p = Path(args.out)
            target = p.with_name(f"{p.stem}_{a}{p.suffix or '.csv'}")
            with open(target, "w", newline="") as fh:
                tr.write_csv(fh)
        else:
            sys.stdout.write(f"# {a}\n")
            tr.write_csv(sys.stdout)
    return 0


def _cmd_single(args, s):
    cfg = build_network(s)
    lc, ons = _options(s)
    out = run_trial(cfg, s.get("seed", 0), 0, _algorithms(s.get("algo")), lc, ons)
    with _sink(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("algo", "rate_bps_hz", "iters", "channel"))
        for a, r in out.results.items():
            w.writerow((a, repr(float(r.rate)), r.iters, out.checksum))
    return 0


def _cmd_complexity(args, s):
    ns = parse_n_grid(args.n_grid)
    try:
        rows = complexity_table(s.get("m", 2), ns, args.d, args.eps)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    with _sink(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("n", "lc_flops", "ons_flops"))
        for n, a, b in rows:
            w.writerow((n, repr(a), repr(b)))
    return 0


COMMANDS = {"sweep-power": _cmd_sweep, "sweep-antennas": _cmd_sweep, "sweep-elements": _cmd_sweep,
            "converge": _cmd_converge, "single-run": _cmd_single, "complexity": _cmd_complexity}


def main(argv=None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args, _settings(args))
    except ConfigError as exc:
        print(f"irsrelay: config error: {exc}", file=sys.stderr)
        return 1
    except TrialFailure as exc:
        print(f"irsrelay: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
