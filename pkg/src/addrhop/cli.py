"""Command-line front end: a thin client over the HTTP service.

Every subcommand serializes its flags into a request model, posts it to the
service (an in-process instance by default, or a remote one via --server) and
renders the response as CSV or a text report. Output starts with '#' manifest
comments recording the package version, the effective parameter set and the
seed, so re-running the same manifest reproduces the file byte for byte.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import asyncio
import sys
from typing import Any

import httpx

from . import __version__
from .sim import DEFAULT_SEED
from .tracking import parse_kv_block

_DEFAULT_S0_HEX = "aaaaaaaaaaaaaaaa"
_DEFAULT_T0_HEX = "5555555555555555"


class UsageError(Exception):
    pass


class ServiceClient:
    """POSTs to a remote service when given one, else answers in-process."""

    def __init__(self, server: str | None = None):
        self.server = server

    def post(self, path: str, payload: dict) -> tuple[int, Any]:
        if self.server:
            resp = httpx.post(self.server.rstrip("/") + path, json=payload, timeout=600.0)
            return resp.status_code, resp.json()

        from .service import create_app  # deferred: fastapi import is not free

        async def _go():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(
                transport=transport, base_url="http://addrhop.internal", timeout=600.0
            ) as client:
                return await client.post(path, json=payload)

        resp = asyncio.run(_go())
        return resp.status_code, resp.json()


def _request(client: ServiceClient, path: str, payload: dict) -> Any:
    status, body = client.post(path, payload)
    if status == 422:
        detail = body.get("detail") if isinstance(body, dict) else body
        raise UsageError(str(detail))
    if status >= 400:
        raise RuntimeError(f"service error {status}: {body}")
    return body


# --- flag/config resolution -------------------------------------------------


def _load_config(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_kv_block(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}")
    except ValueError as exc:
        raise UsageError(f"bad config file: {exc}")


def _resolve(args: argparse.Namespace, config: dict[str, str], key: str, cast, default):
    """Flag value if given, else config-file value, else default (None = required)."""
    flag = getattr(args, key.replace("-", "_"), None)
    if flag is not None:
        return flag
    if key in config:
        try:
            return cast(config[key])
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"config key {key}: {exc}")
    if default is None:
        raise UsageError(f"missing required parameter {key!r} (flag --{key} or config file)")
    return default


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated ints, got {text!r}")


# --- output rendering --------------------------------------------------------


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _manifest(command: str, params: dict[str, Any]) -> list[str]:
    rendered = []
    for key in sorted(params):
        v = params[key]
        if isinstance(v, (list, tuple)):
            v = ",".join(_fmt(item) for item in v)
        rendered.append(f"{key}={_fmt(v)}")
    return [
        f"# addrhop {__version__}",
        f"# command: {command}",
        f"# params: {' '.join(rendered)}",
    ]


def _emit(out_path: str | None, lines: list[str]) -> None:
    text = "\n".join(lines) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- subcommands --------------------------------------------------------------


def _hash_flag_params(args, config) -> dict[str, Any]:
    return {
        "l": _resolve(args, config, "l", int, 16),
        "n": _resolve(args, config, "n", int, 75),
        "s0_hex": _resolve(args, config, "s0_hex", str, _DEFAULT_S0_HEX),
        "t0_hex": _resolve(args, config, "t0_hex", str, _DEFAULT_T0_HEX),
    }


def cmd_tf(args: argparse.Namespace, client: ServiceClient) -> int:
    config = _load_config(args.config)
    payload = _hash_flag_params(args, config) | {
        "subnet": _resolve(args, config, "subnet", str, None),
        "epoch": _resolve(args, config, "epoch", float, 0.0),
        "zeta": _resolve(args, config, "zeta", float, 1.0),
        "start_timestamp": _resolve(args, config, "start", int, 3_000_000),
        "count": _resolve(args, config, "count", int, 6),
    }
    body = _request(client, "/tf", payload)
    lines = _manifest("tf", payload)
    lines.append("timestamp,host_id_binary,host_id_decimal,address")
    for row in body["rows"]:
        lines.append(f"{row['timestamp']},{row['host_id_binary']},{row['host_id']},{row['address']}")
    _emit(args.out, lines)
    return 0


def cmd_hash(args: argparse.Namespace, client: ServiceClient) -> int:
    config = _load_config(args.config)
    payload = _hash_flag_params(args, config)
    if args.timestamp is not None:
        payload["timestamp"] = args.timestamp
    if args.message_hex is not None:
        payload["message_hex"] = args.message_hex
    if ("timestamp" in payload) == ("message_hex" in payload):
        raise UsageError("provide exactly one of --timestamp or --message-hex")
    body = _request(client, "/hash", payload)
    lines = _manifest("hash", payload)
    lines.append("digest_hex,digest_decimal,width_bits")
    lines.append(f"{body['digest_hex']},{body['digest_decimal']},{body['width_bits']}")
    _emit(args.out, lines)
    return 0


def cmd_collision(args: argparse.Namespace, client: ServiceClient) -> int:
    config = _load_config(args.config)
    payload = {
        "m": _resolve(args, config, "m", _int_list, None),
        "k": _resolve(args, config, "k", _int_list, None),
        "h": _resolve(args, config, "h", _int_list, [0]),
        "trials": _resolve(args, config, "trials", int, 100_000),
        "seed": _resolve(args, config, "seed", int, DEFAULT_SEED),
    }
    body = _request(client, "/collision", payload)
    lines = _manifest("collision", payload)
    lines.append("m,k,h,p_analytic,p_mc,trials,seed")
    for row in body["rows"]:
        lines.append(
            f"{row['m']},{row['k']},{row['h']},{_fmt(row['p_analytic'])},{_fmt(row['p_mc'])},"
            f"{row['trials']},{row['seed']}"
        )
        if row.get("note"):
            lines.append(f"# flagged m={row['m']} k={row['k']} h={row['h']}: {row['note']}")
    _emit(args.out, lines)
    return 0


def _sim_payload(args, config) -> tuple[dict[str, Any], dict[str, Any]]:
    """Returns (request payload, manifest params); the manifest keeps the
    delay model in its compact spec-string form."""
    from .service.schemas import delay_schema_from_model
    from .sim import parse_delay_model

    delay = parse_delay_model(_resolve(args, config, "delay", str, "deterministic:0.05"))
    payload = {
        "gamma": _resolve(args, config, "gamma", float, 100.0),
        "cycles": _resolve(args, config, "cycles", int, 100),
        "delay": delay_schema_from_model(delay),
        "subnet": _resolve(args, config, "subnet", str, "10.0.0.0/24"),
        "delta": _resolve(args, config, "delta", float, 0.0),
        "eta": _resolve(args, config, "eta", int, 0),
        "static_count": _resolve(args, config, "static_count", int, 0),
        "addr_change_lag": _resolve(args, config, "addr_change_lag", float, 0.0),
        "seed": _resolve(args, config, "seed", int, DEFAULT_SEED),
    }
    return payload, payload | {"delay": delay.spec_string()}


_SWEEP_HEADER = "zeta,lambda,replications,mean,ci_low,ci_high,min,max"


def _sweep_row(cell: dict) -> str:
    return (
        f"{_fmt(cell['zeta'])},{_fmt(cell['lam'])},{cell['replications']},{_fmt(cell['mean'])},"
        f"{_fmt(cell['ci_low'])},{_fmt(cell['ci_high'])},{_fmt(cell['min'])},{_fmt(cell['max'])}"
    )


def cmd_loss(args: argparse.Namespace, client: ServiceClient) -> int:
    config = _load_config(args.config)
    if args.analytic:
        return _cmd_loss_analytic(args, config, client)
    base, base_manifest = _sim_payload(args, config)
    zetas = _resolve(args, config, "zetas", _float_list, None)
    couple = args.couple_lambda
    if couple is None and "couple_lambda" in config:
        couple = float(config["couple_lambda"])

    if args.trace:
        lambdas = _resolve(args, config, "lambdas", _float_list, [])
        if couple is not None or len(zetas) != 1 or len(lambdas) != 1:
            raise UsageError("--trace needs exactly one zeta and one lambda and no coupling")
        if not args.out:
            raise UsageError("--trace writes the event trace to stdout; use --out for the CSV")
        payload = base | {"zeta": zetas[0], "lam": lambdas[0], "trace": True}
        body = _request(client, "/loss/run", payload)
        loss = body["loss_fraction"]
        lines = _manifest("loss", base_manifest | {"zeta": zetas[0], "lambda": lambdas[0], "trace": True})
        lines.append(_SWEEP_HEADER)
        lines.append(
            f"{_fmt(zetas[0])},{_fmt(lambdas[0])},1,{_fmt(loss)},,,{_fmt(loss)},{_fmt(loss)}"
        )
        _emit(args.out, lines)
        trace_lines = ["time,event,node,address"]
        trace_lines += [f"{_fmt(t)},{ev},{node},{addr}" for t, ev, node, addr in body["trace"]]
        _emit(None, trace_lines)
        return 0

    payload = base | {
        "zetas": zetas,
        "replications": _resolve(args, config, "replications", int, 5),
    }
    manifest = base_manifest | {"zetas": zetas, "replications": payload["replications"]}
    if couple is not None:
        if args.lambdas is not None:
            raise UsageError("--couple-lambda and --lambdas are mutually exclusive")
        payload["couple_lambda"] = couple
        payload["loss_floor"] = _resolve(args, config, "floor", float, 0.01)
        manifest |= {"couple_lambda": couple, "loss_floor": payload["loss_floor"]}
    else:
        payload["lambdas"] = _resolve(args, config, "lambdas", _float_list, None)
        manifest |= {"lambdas": payload["lambdas"]}
    body = _request(client, "/loss/sweep", payload)
    lines = _manifest("loss", manifest)
    lines.append(_SWEEP_HEADER)
    for cell in body["cells"]:
        lines.append(_sweep_row(cell))
    if couple is not None:
        knee = body.get("knee_zeta")
        lines.append(f"# knee_zeta={_fmt(knee) if knee is not None else 'none'}")
    _emit(args.out, lines)
    return 0


def _cmd_loss_analytic(args, config, client: ServiceClient) -> int:
    """Closed-form loss grid: columns zeta,lambda,d_model,loss_analytic."""
    from .sim import DeterministicDelay, parse_delay_model

    if args.d_model is not None:
        d_model = args.d_model
    else:
        delay = parse_delay_model(_resolve(args, config, "delay", str, "deterministic:0.05"))
        if not isinstance(delay, DeterministicDelay):
            raise UsageError("--analytic needs --d-model or a deterministic delay model")
        d_model = delay.d
    payload = {
        "zetas": _resolve(args, config, "zetas", _float_list, None),
        "lambdas": _resolve(args, config, "lambdas", _float_list, None),
        "d_model": d_model,
    }
    body = _request(client, "/loss/analytic", payload)
    lines = _manifest("loss --analytic", payload)
    lines.append("zeta,lambda,d_model,loss_analytic")
    for row in body["rows"]:
        lines.append(f"{_fmt(row['zeta'])},{_fmt(row['lam'])},{_fmt(row['d_model'])},{_fmt(row['loss_analytic'])}")
        if row.get("note"):
            lines.append(f"# flagged zeta={_fmt(row['zeta'])} lambda={_fmt(row['lam'])}: {row['note']}")
    _emit(args.out, lines)
    return 0


def cmd_autocorr(args: argparse.Namespace, client: ServiceClient) -> int:
    config = _load_config(args.config)
    payload = _hash_flag_params(args, config) | {
        "x": _resolve(args, config, "x", int, 8),
        "count": _resolve(args, config, "count", int, 100_000),
        "max_lag": _resolve(args, config, "max_lag", int, 100),
        "start_timestamp": _resolve(args, config, "start", int, 3_000_000),
    }
    body = _request(client, "/autocorr", payload)
    lines = _manifest("autocorr", payload)
    whiteness = "PASS" if body["autocorr_pass"] else "FAIL"
    uniformity = "PASS" if body["chi2_pass"] else "FAIL"
    if args.format == "csv":
        lines.append(f"# max_abs_autocorr={_fmt(body['max_abs_autocorr'])} band={_fmt(body['band'])} whiteness={whiteness}")
        lines.append(
            f"# chi2={_fmt(body['chi2_stat'])} dof={body['chi2_dof']} p={_fmt(body['chi2_pvalue'])} uniformity={uniformity}"
        )
        lines.append("lag,autocorr")
        for lag, val in enumerate(body["autocorr"]):
            lines.append(f"{lag},{_fmt(val)}")
    else:
        lines.append(f"samples: {body['count']}   host-id bits: {payload['x']}")
        lines.append(
            f"whiteness: max |autocorr| over lags 1..{payload['max_lag']} = "
            f"{body['max_abs_autocorr']:.5f}, band +-{body['band']:.5f}  -> {whiteness}"
        )
        lines.append(
            f"uniformity: chi2 = {body['chi2_stat']:.2f} over {body['bins']} bins "
            f"(dof {body['chi2_dof']}, p = {body['chi2_pvalue']:.4g}, significance 1e-3)  -> {uniformity}"
        )
    _emit(args.out, lines)
    return 0


def cmd_sync_check(args: argparse.Namespace, client: ServiceClient) -> int:
    config = _load_config(args.config)
    payload = {
        "delta": _resolve(args, config, "delta", float, None),
        "eta": _resolve(args, config, "eta", int, None),
        "zeta": _resolve(args, config, "zeta", float, 1.0),
        "horizon": _resolve(args, config, "horizon", int, 1000),
        "residual": _resolve(args, config, "residual", float, 0.0),
    }
    if args.drifts is not None:
        payload["drifts"] = args.drifts
    body = _request(client, "/sync-check", payload)
    lines = _manifest("sync-check", payload)
    verdict = "PASS" if body["agreed"] else "FAIL"
    if args.format == "csv":
        lines.append("delta,eta,eta_bound,skew,within_bound,agreed")
        lines.append(
            f"{_fmt(payload['delta'])},{payload['eta']},{body['eta_bound']},{_fmt(body['skew'])},"
            f"{body['within_bound']},{body['agreed']}"
        )
    else:
        lines.append(f"largest safe eta for delta={_fmt(payload['delta'])}: {body['eta_bound']}")
        lines.append(
            f"requested eta {payload['eta']} -> worst-case timestamp skew 2*delta*eta = "
            f"{_fmt(body['skew'])} (bound: < 1): {'ok' if body['within_bound'] else 'VIOLATED'}"
        )
        lines.append(
            f"integer-timestamp agreement over {payload['horizon']} sync periods: {verdict}"
        )
    _emit(args.out, lines)
    return 0


def cmd_serve(args: argparse.Namespace, client: ServiceClient) -> int:
    import uvicorn

    from .chaos import BinaryFraction, HashParams
    from .service import create_app
    from .sim import CentralNode, ParamBundle
    from .tracking import TFParams

    central = None
    if args.central_config:
        config = _load_config(args.central_config)
        if "psk_hex" not in config:
            raise UsageError("central config needs psk_hex")
        bundle = ParamBundle(
            params=TFParams.from_text("\n".join(f"{k}={v}" for k, v in config.items())),
            lam=float(config.get("lambda", 0.0)),
        )
        central = CentralNode(
            psk=bytes.fromhex(config["psk_hex"]),
            bundle=bundle,
            seed=int(config.get("seed", DEFAULT_SEED)),
        )
    uvicorn.run(create_app(central), host=args.host, port=args.port)
    return 0


# --- parser -------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--seed", type=int, help=f"RNG seed (default {DEFAULT_SEED})")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=["csv", "text"], default="csv", help="output format")
    p.add_argument("--server", help="base URL of a running service (default: in-process)")


def _add_hash_params(p: argparse.ArgumentParser) -> None:
    p.add_argument("--l", type=int, help="hash block size in bits (default 16)")
    p.add_argument("--n", type=int, help="tent rounds per block (default 75)")
    p.add_argument("--s0-hex", help="hash seed s0 as 16 hex digits")
    p.add_argument("--t0-hex", help="hash seed t0 as 16 hex digits")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="addrhop",
        description="Address-hopping privacy toolkit: tracking function, collision/loss models, simulator.",
    )
    parser.add_argument("--version", action="version", version=f"addrhop {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("tf", help="print the tracking-function address sequence")
    _add_common(p)
    _add_hash_params(p)
    p.add_argument("--subnet", help="subnet, e.g. 129.110.242.0/24")
    p.add_argument("--epoch", type=float, help="secret epoch offset in seconds (default 0)")
    p.add_argument("--zeta", type=float, help="hop period in seconds (default 1)")
    p.add_argument("--start", type=int, help="first timestamp (default 3000000)")
    p.add_argument("--count", type=int, help="number of rows (default 6)")
    p.set_defaults(func=cmd_tf)

    p = sub.add_parser("hash", help="digest a timestamp or hex message")
    _add_common(p)
    _add_hash_params(p)
    p.add_argument("--timestamp", type=int, help="timestamp message")
    p.add_argument("--message-hex", help="raw message bytes as hex")
    p.set_defaults(func=cmd_hash)

    p = sub.add_parser("collision", help="analytic + Monte Carlo address-collision grid")
    _add_common(p)
    p.add_argument("--m", type=_int_list, help="subnet sizes, comma separated")
    p.add_argument("--k", type=_int_list, help="hopping node counts, comma separated")
    p.add_argument("--h", type=_int_list, help="static node counts, comma separated (default 0)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials per cell (default 100000)")
    p.set_defaults(func=cmd_collision)

    p = sub.add_parser("loss", help="simulated packet-loss sweep over (zeta, lambda)")
    _add_common(p)
    p.add_argument("--zetas", type=_float_list, help="hop periods, comma separated")
    p.add_argument("--lambdas", type=_float_list, help="retention windows, comma separated")
    p.add_argument(
        "--couple-lambda",
        type=float,
        help="couple lambda = RATIO * zeta instead of a lambda grid; reports the knee",
    )
    p.add_argument("--floor", type=float, help="knee detection loss floor (default 0.01)")
    p.add_argument("--replications", type=int, help="runs per cell (default 5)")
    p.add_argument("--gamma", type=float, help="packet rate per second (default 100)")
    p.add_argument("--cycles", type=int, help="hop periods per run (default 100)")
    p.add_argument("--delay", help="delay model: deterministic:D | sexp:DMIN,MEAN | empirical:D1,D2,...")
    p.add_argument("--subnet", help="subnet (default 10.0.0.0/24)")
    p.add_argument("--delta", type=float, help="max clock drift rate (default 0)")
    p.add_argument("--eta", type=int, help="hops per sync period (default 0 = no drift)")
    p.add_argument("--static-count", type=int, help="fixed-address nodes in the subnet")
    p.add_argument("--addr-change-lag", type=float, help="per-hop address-change processing delay")
    p.add_argument("--trace", action="store_true", help="emit the event trace (single cell only)")
    p.add_argument(
        "--analytic",
        action="store_true",
        help="emit the closed-form loss grid (zeta,lambda,d_model,loss_analytic) instead of simulating",
    )
    p.add_argument("--d-model", type=float, help="delay value for --analytic (defaults to the deterministic --delay)")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("autocorr", help="whiteness / uniformity diagnostics of the hash")
    _add_common(p)
    p.set_defaults(format="text")
    _add_hash_params(p)
    p.add_argument("--x", type=int, help="host-id bits (default 8)")
    p.add_argument("--count", type=int, help="samples (default 100000)")
    p.add_argument("--max-lag", type=int, help="max autocorrelation lag (default 100)")
    p.add_argument("--start", type=int, help="first timestamp (default 3000000)")
    p.set_defaults(func=cmd_autocorr)

    p = sub.add_parser("sync-check", help="clock-sync safety verdict and eta bound")
    _add_common(p)
    p.set_defaults(format="text")
    p.add_argument("--delta", type=float, help="max clock drift rate (sec/sec)")
    p.add_argument("--eta", type=int, help="hops per sync period")
    p.add_argument("--zeta", type=float, help="hop period (default 1)")
    p.add_argument("--horizon", type=int, help="sync periods to simulate (default 1000)")
    p.add_argument("--residual", type=float, help="post-sync residual offset (default 0)")
    p.add_argument("--drifts", type=_float_list, help="explicit clock drifts (default +-delta pair)")
    p.set_defaults(func=cmd_sync_check)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument(
        "--central-config",
        help="key=value file with psk_hex and the parameter bundle to distribute",
    )
    p.set_defaults(func=cmd_serve)

    return parser


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    client = ServiceClient(getattr(args, "server", None))
    try:
        return args.func(args, client)
    except (UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except httpx.HTTPError as exc:
        print(f"service unreachable: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())
