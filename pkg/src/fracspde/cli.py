"""Command line entry point.

    fracspde <subcommand> [--config FILE] [--out DIR] ...
    fracspde --replay MANIFEST [--out DIR]

Every run writes its CSV/SVG outputs and a ``manifest.json`` that embeds the
effective config, any input files, the seed and the git blob id of each
output; ``--replay`` re-executes the manifest and compares the outputs byte
for byte.

Exit codes: 0 success, 1 replay mismatch or failed selftest, 2 invalid input,
3 numerical failure.  The only environment variable read is
``FRACSPDE_SEED``, which overrides ``time.seed`` (the effective seed is
recorded, so replays do not depend on it).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import config_from_dict, config_hash, config_to_dict, ensure_runnable
from .errors import NumericalError, ValidationError

SUBCOMMANDS = ("kernel-table", "check-measure", "simulate", "skeleton", "rate", "ldp", "hoelder",
               "selftest")
SEED_ENV = "FRACSPDE_SEED"


def blob_id(data: bytes) -> str:
    """Git blob object id of ``data``."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _fmt(x):
    return format(float(x), ".17g")


def _csv_bytes(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue().encode()


def _signed(k, n):
    return k - n if k >= n // 2 else k


# ---------------------------------------------------------------------------
# readers for input files


def _read_rows(text, where):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ValidationError(f"{where}: empty file")
    return rows[0], rows[1:]


def _parsed(reader):
    def wrapped(text, cfg):
        try:
            return reader(text, cfg)
        except (ValueError, IndexError, KeyError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"{reader.__name__}: malformed row ({exc})") from None

    wrapped.__name__ = reader.__name__
    wrapped.__doc__ = reader.__doc__
    return wrapped


@_parsed
def read_control(text, cfg):
    """Control CSV ``step, k0[, k1...], re, im`` -> ControlPath (absent modes are zero)."""
    from .skeleton import ControlPath

    grid = cfg.grid
    header, rows = _read_rows(text, "control")
    expected = ["step"] + [f"k{i}" for i in range(grid.dim)] + ["re", "im"]
    if header != expected:
        raise ValidationError(f"control: header must be {','.join(expected)}")
    h = np.zeros((cfg.n_steps,) + grid.shape, dtype=complex)
    for row in rows:
        step = int(row[0])
        if not 0 <= step < cfg.n_steps:
            raise ValidationError(f"control: step {step} outside [0, {cfg.n_steps})")
        ks = [int(v) for v in row[1 : 1 + grid.dim]]
        if any(not -grid.points // 2 <= k < grid.points // 2 for k in ks):
            raise ValidationError(f"control: mode index {ks} outside [-N/2, N/2)")
        h[(step,) + tuple(k % grid.points for k in ks)] = complex(float(row[-2]), float(row[-1]))
    path = ControlPath(h, cfg.dt)
    path.check_hermitian(grid)
    return path


def control_rows(h, grid):
    rows = []
    for idx in np.ndindex(h.h_coeffs.shape):
        c = h.h_coeffs[idx]
        if c != 0:
            rows.append([idx[0]] + [_signed(k, grid.points) for k in idx[1:]] + [float(c.real), float(c.imag)])
    return rows


@_parsed
def read_field_series(text, cfg):
    """Trajectory CSV ``t, i0[, i1...], value`` -> (times, values[n_times, *grid])."""
    grid = cfg.grid
    header, rows = _read_rows(text, "target")
    expected = ["t"] + [f"i{i}" for i in range(grid.dim)] + ["value"]
    if header != expected:
        raise ValidationError(f"target: header must be {','.join(expected)}")
    times = sorted({float(r[0]) for r in rows})
    pos = {t: n for n, t in enumerate(times)}
    vals = np.full((len(times),) + grid.shape, np.nan)
    for r in rows:
        if len(r) != grid.dim + 2:
            raise ValidationError(f"target: row {r} has {len(r)} fields, expected {grid.dim + 2}")
        vals[(pos[float(r[0])],) + tuple(int(v) for v in r[1:-1])] = float(r[-1])
    if np.isnan(vals).any():
        raise ValidationError("target: missing grid values")
    return np.asarray(times), vals


def trajectory_rows(times, values, grid):
    rows = []
    for n, t in enumerate(times):
        for idx in np.ndindex(grid.shape):
            rows.append([float(t)] + list(idx) + [float(values[(n,) + idx])])
    return rows


def _trajectory_header(grid):
    return ["t"] + [f"i{i}" for i in range(grid.dim)] + ["value"]


# ---------------------------------------------------------------------------
# subcommands; each returns {filename: bytes} and a summary dict


def _need_config(ctx):
    if ctx["config"] is None:
        raise ValidationError(f"{ctx['command']} needs --config")
    return ctx["config"]


def cmd_kernel_table(ctx):
    from .kernel import green_1d

    args = ctx["args"]
    if ctx["config"] is not None:
        cfg = ctx["config"]
        pairs = list(zip(cfg.idx.alpha, cfg.idx.delta))
    else:
        if args.alpha is None:
            raise ValidationError("kernel-table needs --alpha or --config")
        pairs = [(args.alpha, args.delta)]
    xs = np.linspace(args.x_min, args.x_max, args.n_x)
    rows = []
    for a, d in pairs:
        for t in args.t:
            g = green_1d(a, d, t, xs)
            rows += [[float(a), float(d), float(t), float(x), float(v)] for x, v in zip(xs, g)]
    return {"kernel.csv": _csv_bytes(["alpha", "delta", "t", "x", "G"], rows)}, {"rows": len(rows)}


def cmd_check_measure(ctx):
    from .noise import check_integrability

    cfg = _need_config(ctx)
    rep = check_integrability(cfg.mu, cfg.idx, cfg.eta)
    rows = [[float(r), float(p), float(i)] for r, p, i in zip(rep.radii, rep.partials, rep.increments)]
    out = {"measure.csv": _csv_bytes(["R", "partial_integral", "increment"], rows)}
    return out, {"verdict": rep.verdict, "I(R_max)": rep.limit}


def cmd_simulate(ctx):
    from .solver import simulate_path

    cfg = _need_config(ctx)
    tr = simulate_path(cfg)
    rows = trajectory_rows(tr.times, tr.values, cfg.grid)
    return ({"trajectory.csv": _csv_bytes(_trajectory_header(cfg.grid), rows)},
            {"stream": tr.streams[0], "sup_abs": float(np.max(np.abs(tr.values)))})


def cmd_skeleton(ctx):
    from .skeleton import solve_skeleton

    cfg = _need_config(ctx)
    text = ctx["inputs"].get("control")
    if text is None:
        raise ValidationError("skeleton needs --control")
    h = read_control(text, cfg)
    tr = solve_skeleton(h, cfg)
    rows = trajectory_rows(tr.times, tr.values, cfg.grid)
    return ({"skeleton.csv": _csv_bytes(_trajectory_header(cfg.grid), rows)},
            {"control_cost": 0.5 * h.norm_sq})


def cmd_rate(ctx):
    from .ratefn import rate_linear_oracle, rate_minimize

    cfg = _need_config(ctx)
    text = ctx["inputs"].get("target")
    if text is None:
        raise ValidationError("rate needs --target")
    block = dict(ctx["extras"]["rate"])
    allowed = {"lambdas", "mode", "max_iter", "seed"}
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ValidationError(f"rate: unknown key(s) {unknown}")
    mode = block.get("mode", "trajectory")
    times, vals = read_field_series(text, cfg)
    if mode == "trajectory":
        if vals.shape[0] != cfg.n_steps + 1:
            raise ValidationError("rate: trajectory target needs every step 0..n_steps")
        target = vals
    else:
        target = vals[-1]
    res = rate_minimize(target, cfg, lambdas=block.get("lambdas", (1e0, 1e1, 1e2, 1e3, 1e4, 1e5)),
                        mode=mode, max_iter=int(block.get("max_iter", 2000)),
                        seed=int(block.get("seed", 0)))
    rows = [[float(l), float(c), float(r)] for l, c, r in zip(res.lambdas, res.estimates, res.residuals)]
    out = {
        "rate.csv": _csv_bytes(["lambda", "cost", "residual"], rows),
        "rate_control.csv": _csv_bytes(["step"] + [f"k{i}" for i in range(cfg.grid.dim)] + ["re", "im"],
                                       control_rows(res.h_best, cfg.grid)),
    }
    summary = {"estimate": res.estimate, "max_gradient_check_error": float(np.max(res.grad_check))}
    try:
        oracle = rate_linear_oracle(target, cfg, mode=mode)
        summary["linear_oracle"] = oracle.value if oracle.feasible else "infeasible"
    except ValidationError:
        pass
    return out, summary


def _ldp_block(ctx, allowed):
    block = dict(ctx["extras"]["ldp"])
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ValidationError(f"ldp: unknown key(s) {unknown}")
    return block


_LDP_KEYS = {"threshold", "eps_list", "n_replicas", "importance", "plot",
             "beta1", "beta2", "hoelder_eta", "lags", "q"}


def cmd_ldp(ctx):
    from .harness import estimate_tail, tail_plot_svg

    cfg = _need_config(ctx)
    ensure_runnable(cfg)
    block = _ldp_block(ctx, _LDP_KEYS)
    if "threshold" not in block:
        raise ValidationError("ldp: missing required field 'threshold'")
    res = estimate_tail(cfg, float(block["threshold"]), block.get("eps_list", [0.5, 0.25, 0.125, 0.0625]),
                        n_replicas=int(block.get("n_replicas", 1000)),
                        importance=bool(block.get("importance", True)))
    rows = [[r.eps, r.p_hat, r.rate_hat, float(r.ci[0]), float(r.ci[1]), r.hits, r.verdict]
            for r in res.rows]
    out = {"ldp.csv": _csv_bytes(["eps", "p_hat", "neg_eps_log_p", "ci_low", "ci_high", "hits", "verdict"],
                                 rows)}
    if block.get("plot", False):
        path = ctx["out"] / "ldp.svg"
        tail_plot_svg(res, path)
        out["ldp.svg"] = path.read_bytes()
    return out, {"oracle_rate": res.oracle}


def cmd_hoelder(ctx):
    from .harness import HoelderParams, hoelder_norm, increment_regularity_test
    from .solver import simulate_path

    cfg = _need_config(ctx)
    block = _ldp_block(ctx, _LDP_KEYS)
    for key in ("beta1", "beta2"):
        if key not in block:
            raise ValidationError(f"ldp: missing required field '{key}' for hoelder")
    params = HoelderParams(float(block["beta1"]), float(block["beta2"]),
                           float(block.get("hoelder_eta", cfg.eta)), cfg.idx.alpha0)
    run = cfg.with_(save_every=1)
    res = increment_regularity_test(run, params, n_replicas=int(block.get("n_replicas", 200)),
                                    q=float(block.get("q", 2)), lags=tuple(block.get("lags", (4, 2, 1))))
    rows = [[float(l), float(a), float(b), float(c[0]), float(c[1])]
            for l, a, b, c in zip(res.lags, res.time_ratios, res.space_ratios, res.ratio_ci)]
    norm = hoelder_norm(simulate_path(run).values, run, params)
    out = {"hoelder.csv": _csv_bytes(["lag", "time_ratio", "space_ratio", "ci_low", "ci_high"], rows)}
    return out, {"growth": res.growth, "variation": res.variation, "time_exponent": res.time_exponent,
                 "space_exponent": res.space_exponent, "hoelder_norm_stream0": norm}


def cmd_selftest(ctx):
    from .selftest import run_selftest

    results = run_selftest()
    rows = [[name, "pass" if ok else "fail", detail] for name, ok, detail in results]
    failed = [r[0] for r in rows if r[1] == "fail"]
    return ({"selftest.csv": _csv_bytes(["check", "status", "detail"], rows)},
            {"passed": len(rows) - len(failed), "failed": failed})


COMMANDS = {
    "kernel-table": cmd_kernel_table,
    "check-measure": cmd_check_measure,
    "simulate": cmd_simulate,
    "skeleton": cmd_skeleton,
    "rate": cmd_rate,
    "ldp": cmd_ldp,
    "hoelder": cmd_hoelder,
    "selftest": cmd_selftest,
}


# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="fracspde", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--replay", metavar="MANIFEST", help="re-run a manifest and compare outputs")
    p.add_argument("--out", default=None, help="output directory (default: current, or <manifest dir>/replay)")
    sub = p.add_subparsers(dest="command")
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON config file")
        s.add_argument("--out", dest="sub_out", default=None)
        if name == "kernel-table":
            s.add_argument("--alpha", type=float)
            s.add_argument("--delta", type=float, default=0.0)
            s.add_argument("--t", type=float, nargs="+", default=[1.0])
            s.add_argument("--x-min", type=float, default=-5.0)
            s.add_argument("--x-max", type=float, default=5.0)
            s.add_argument("--n-x", type=int, default=101)
        if name == "skeleton":
            s.add_argument("--control", required=False)
        if name == "rate":
            s.add_argument("--target", required=False)
    return p


_ARG_KEYS = {"kernel-table": ("alpha", "delta", "t", "x_min", "x_max", "n_x")}


def _execute(command, doc, inputs, args_dict, out):
    """Run one subcommand from fully resolved inputs; returns (outputs, summary, cfg)."""
    cfg, extras = (None, {"ldp": {}, "rate": {}}) if doc is None else config_from_dict(doc)
    ctx = {
        "command": command,
        "config": cfg,
        "extras": extras,
        "inputs": inputs,
        "args": argparse.Namespace(**args_dict),
        "out": out,
    }
    outputs, summary = COMMANDS[command](ctx)
    return outputs, summary, cfg


def _write_outputs(out, outputs):
    out.mkdir(parents=True, exist_ok=True)
    ids = {}
    for name, data in sorted(outputs.items()):
        (out / name).write_bytes(data)
        ids[name] = blob_id(data)
    return ids


def run_command(args):
    command = args.command
    out = Path(args.sub_out or args.out or ".")
    doc = None
    if args.config is not None:
        try:
            doc = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ValidationError(f"config file {args.config} not found")
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config file is not valid JSON: {exc}")
        env_seed = os.environ.get(SEED_ENV)
        if env_seed is not None:
            try:
                seed = int(env_seed)
            except ValueError:
                raise ValidationError(f"{SEED_ENV}={env_seed!r} is not an integer")
            if isinstance(doc, dict) and isinstance(doc.get("time"), dict):
                doc["time"]["seed"] = seed
        # normalize through the parser so the manifest holds the effective values
        cfg, extras = config_from_dict(doc)
        doc = config_to_dict(cfg, extras)
    inputs = {}
    for key in ("control", "target"):
        path = getattr(args, key, None)
        if path:
            try:
                inputs[key] = Path(path).read_text()
            except FileNotFoundError:
                raise ValidationError(f"{key} file {path} not found")
    args_dict = {k: getattr(args, k) for k in _ARG_KEYS.get(command, ())}
    out.mkdir(parents=True, exist_ok=True)
    outputs, summary, cfg = _execute(command, doc, inputs, args_dict, out)
    ids = _write_outputs(out, outputs)
    manifest = {
        "version": __version__,
        "command": command,
        "arguments": args_dict,
        "config": doc,
        "config_sha256": None if doc is None else config_hash(doc),
        "seed": None if cfg is None else cfg.seed,
        "inputs": inputs,
        "outputs": ids,
        "summary": summary,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_json_default) + "\n")
    print(json.dumps({"command": command, "outputs": ids, "summary": summary}, sort_keys=True,
                     default=_json_default))
    if command == "selftest" and summary["failed"]:
        return 1
    return 0


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def run_replay(path, out=None):
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"manifest {path} not found")
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest is not valid JSON: {exc}")
    for key in ("command", "config", "inputs", "outputs", "arguments"):
        if key not in manifest:
            raise ValidationError(f"manifest lacks '{key}'")
    doc = manifest["config"]
    if doc is not None and manifest.get("config_sha256") != config_hash(doc):
        raise ValidationError("manifest config does not match its recorded hash")
    out = Path(out) if out else path.parent / "replay"
    out.mkdir(parents=True, exist_ok=True)
    outputs, _, _ = _execute(manifest["command"], doc, manifest["inputs"], manifest["arguments"], out)
    ids = _write_outputs(out, outputs)
    expected = manifest["outputs"]
    bad = sorted(k for k in set(expected) | set(ids) if expected.get(k) != ids.get(k))
    if bad:
        print(f"replay: outputs differ: {', '.join(bad)}")
        return 1
    print(f"replay: {len(ids)} output(s) identical")
    return 0


def run(argv=None):
    """Parse ``argv`` and dispatch; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.replay:
            return run_replay(args.replay, args.out)
        if args.command is None:
            parser.print_usage(sys.stderr)
            return 2
        return run_command(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(run())
