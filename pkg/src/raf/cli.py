"""Operator command line: token handling, the identity daemon, benchmarks
and the security-game harness.

Exit codes: 0 success, 1 usage error, 2 validation/token failure, 3 I/O or
endpoint failure.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import click
import httpx

from . import __version__
from .bench import BENCH_MODES, BenchError, run_bench
from .codec import b64url_decode
from .errors import BlacklistUnavailableError, PolicyConfigError, TokenError
from .fernet import FERNET_VERSION, FernetKey, FernetToken
from .policy import find_service_key, load_policy_file
from .service.config import (
    DEMO_PASSWORD,
    DEMO_USERNAME,
    load_config,
    load_service_keys,
    scaffold_demo,
)
from .sim import SCENARIOS, make_strategy, run_flow, run_game_ftt, run_game_utt
from .sim.strategies import STRATEGIES
from .token import (
    DEFAULT_MAX_DEPTH,
    RAF_VERSION,
    TAG_LEN,
    Variant,
    _peel,
    _split_message_tag,
    extract_base_raf,
    is_raf,
    service_issue_ft,
    service_issue_ut,
    user_issue,
)

TOKEN_PATH = "/identity/v3/auth/tokens"
DEFAULT_URL = "http://127.0.0.1:8080"


class _TokenRejected(Exception):
    """The endpoint rejected the token or credentials (exit 2)."""


class _EndpointFailure(Exception):
    """The endpoint misbehaved or is unavailable (exit 3)."""


def _read_token(token: str | None) -> str:
    if token and token != "-":
        return token.strip()
    data = click.get_text_stream("stdin").read().strip()
    if not data:
        raise click.UsageError("no token given (pass it as an argument or on stdin)")
    return data


def _write_output(text: str, output: str) -> None:
    if output == "-":
        click.echo(text)
    else:
        Path(output).write_text(text + "\n", "utf-8")


def _client(url: str) -> httpx.Client:
    return httpx.Client(base_url=url, timeout=30.0)


def _iso(epoch: int) -> str:
    return datetime.fromtimestamp(epoch, timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _error_body(response) -> tuple[str, str]:
    try:
        error = response.json()["error"]
        return error.get("code", "error"), error.get("message", "")
    except Exception:
        return "error", response.text[:200]


def _reject_or_fail(response, context: str):
    code, message = _error_body(response)
    if 400 <= response.status_code < 500:
        raise _TokenRejected(f"{context}: {response.status_code} {code}: {message}")
    raise _EndpointFailure(f"{context}: {response.status_code} {code}: {message}")


@click.group()
@click.version_option(__version__, prog_name="raf")
def cli():
    """Recursive augmented Fernet tokens: grant, derive, inspect, validate,
    serve, benchmark, and play the forgery games."""


@cli.command()
@click.option("--url", default=DEFAULT_URL, show_default=True, help="Identity service base URL.")
@click.option("--username", default=DEMO_USERNAME, show_default=True)
@click.option("--password", default=DEMO_PASSWORD, show_default=False)
@click.option("--domain", default="Default", show_default=True)
@click.option("--project", default="demo", show_default=True)
@click.option("--output", default="-", show_default=True, help="File for the token ('-' = stdout).")
def grant(url, username, password, domain, project, output):
    """Authenticate and print a base identity token."""
    body = {
        "auth": {
            "identity": {
                "methods": ["password"],
                "password": {
                    "user": {
                        "domain": {"name": domain},
                        "name": username,
                        "password": password,
                    }
                },
            },
            "scope": {"project": {"domain": {"name": domain}, "name": project}},
        }
    }
    with _client(url) as client:
        response = client.post(TOKEN_PATH, json=body)
    if response.status_code != 201:
        _reject_or_fail(response, "grant")
    _write_output(response.headers["X-Subject-Token"], output)


@cli.command()
@click.argument("token", required=False)
@click.option("--command", "-c", "command", required=True, help="Command the child token carries.")
@click.option("--lifetime", type=int, default=600, show_default=True)
@click.option("--now", "now_arg", type=int, default=None, help="Issue time (default: current time).")
@click.option("--randomizer", default=None, help="8 bytes, hex; random when omitted.")
@click.option(
    "--variant",
    type=click.Choice([v.value for v in Variant]),
    default=Variant.USER_TIED.value,
    show_default=True,
    help="Derivation discipline for recursive parents.",
)
@click.option("--fernet-key", "fernet_key_path", type=click.Path(exists=True), default=None,
              help="Root key file; enables the verification gate (required for fully-tied).")
@click.option("--keys", "keys_path", type=click.Path(exists=True), default=None,
              help="Service key file (fully-tied).")
@click.option("--policy", "policy_path", type=click.Path(exists=True), default=None,
              help="Compatibility policy (fully-tied routing).")
@click.option("--service-id", default=None, help="Issuing service (fully-tied; default: route of --command).")
@click.option("--output", default="-", show_default=True)
def issue(token, command, lifetime, now_arg, randomizer, variant, fernet_key_path,
          keys_path, policy_path, service_id, output):
    """Derive a child token from TOKEN (or stdin), appending COMMAND."""
    parent = _read_token(token)
    now = int(now_arg) if now_arg is not None else int(time.time())
    if randomizer is not None:
        try:
            rnd = bytes.fromhex(randomizer)
        except ValueError:
            raise click.UsageError("--randomizer must be hex")
        if len(rnd) != 8:
            raise click.UsageError("--randomizer must encode exactly 8 bytes")
    else:
        rnd = os.urandom(8)

    if not is_raf(parent):
        child = user_issue(parent, command, lifetime, now, rnd)
    elif variant == Variant.USER_TIED.value:
        verify_key = None
        if fernet_key_path:
            verify_key = FernetKey.from_encoded(Path(fernet_key_path).read_text("utf-8").strip())
        child = service_issue_ut(parent, command, lifetime, now, rnd, verify_key=verify_key)
    else:
        if not (fernet_key_path and keys_path and policy_path):
            raise click.UsageError(
                "fully-tied issuance needs --fernet-key, --keys and --policy"
            )
        root = FernetKey.from_encoded(Path(fernet_key_path).read_text("utf-8").strip())
        routing = load_policy_file(policy_path)
        keyset = load_service_keys(root, keys_path, expected=len(routing.services))
        if service_id is not None:
            by_id = {service.service_id: service.key_index for service in routing.services}
            if service_id not in by_id:
                raise click.UsageError(
                    f"unknown service id {service_id!r}; policy defines {sorted(by_id)}"
                )
            index = by_id[service_id]
        else:
            index = find_service_key(routing, command.encode("utf-8"))
        child = service_issue_ft(index, keyset, routing, parent, command, lifetime, now, rnd)
    _write_output(child, output)


@cli.command()
@click.argument("token", required=False)
def inspect(token):
    """Dump a token's structure without verifying anything."""
    encoded = _read_token(token)
    raw = b64url_decode(encoded)
    if not raw:
        raise TokenError("empty token")
    click.echo("UNVERIFIED structural dump (no keys involved, nothing checked)")
    if raw[0] == FERNET_VERSION:
        parsed = FernetToken.parse(raw)
        click.echo("kind: fernet")
        click.echo(f"issued: {_iso(parsed.timestamp)} ({parsed.timestamp})")
        click.echo(f"iv: {parsed.iv.hex()}")
        click.echo(f"ciphertext: {len(parsed.ciphertext)} bytes (payload stays encrypted)")
        click.echo(f"tag: {parsed.tag.hex()}")
        return
    if raw[0] != RAF_VERSION:
        raise TokenError(f"unknown version byte 0x{raw[0]:02x} at offset 0")
    message, tag = _split_message_tag(raw, TAG_LEN)
    layers, root = _peel(message, DEFAULT_MAX_DEPTH)
    digest, _base_expiry = extract_base_raf(encoded)
    click.echo("kind: recursive")
    click.echo(f"depth: {len(layers)}")
    for i, layer in enumerate(layers):
        depth = len(layers) - i
        label = "outermost" if i == 0 else ("base" if depth == 1 else "inner")
        command = layer.command.decode("utf-8", errors="replace")
        click.echo(f"layer {depth} ({label}):")
        click.echo(f"  expires: {_iso(layer.expires_at)} ({layer.expires_at})")
        click.echo(f"  randomizer: {layer.randomizer.hex()}")
        click.echo(f"  command: {command!r}")
    if len(root) >= 9:
        issued = int.from_bytes(root[1:9], "big")
        click.echo(f"root: fernet message, issued {_iso(issued)} ({issued}), {len(root)} bytes")
    click.echo(f"tag (outermost layer): {tag.hex()}")
    click.echo(f"base digest: {digest.hex()}")


@cli.command()
@click.argument("token", required=False)
@click.option("--url", default=DEFAULT_URL, show_default=True)
@click.option("--service-id", default="default", show_default=True,
              help="Caller identity for replay accounting.")
def validate(token, url, service_id):
    """Submit TOKEN (or stdin) to the identity service for validation."""
    subject = _read_token(token)
    with _client(url) as client:
        response = client.get(
            TOKEN_PATH,
            headers={"X-Subject-Token": subject, "X-Service-Id": service_id},
        )
    if response.status_code != 200:
        _reject_or_fail(response, "validate")
    body = response.json()
    click.echo(f"kind: {body['token_kind']}")
    click.echo(f"user: {body['payload']['user_id']}  project: {body['payload']['project_id']}")
    for i, command in enumerate(body["commands"], start=1):
        click.echo(f"command {i}: {command!r}")
    click.echo(
        f"effective expiry: {_iso(body['effective_expiry'])} ({body['effective_expiry']})"
    )


@cli.command()
@click.option("--config", "config_path", type=click.Path(), envvar="RAF_CONFIG",
              help="Service config file (or set RAF_CONFIG).")
@click.option("--demo", is_flag=True, help="Scaffold a demo deployment and serve it.")
@click.option("--demo-dir", type=click.Path(), default="raf-demo", show_default=True)
@click.option("--variant", type=click.Choice([v.value for v in Variant]),
              default=Variant.USER_TIED.value, show_default=True, help="Demo variant.")
@click.option("--host", default=None, help="Override the configured listen host.")
@click.option("--port", type=int, default=None, help="Override the configured listen port.")
def serve(config_path, demo, demo_dir, variant, host, port):
    """Run the identity service."""
    import uvicorn

    from .service.app import create_app

    if demo:
        config_path = scaffold_demo(demo_dir, Variant(variant))
        click.echo(f"demo deployment scaffolded at {config_path}", err=True)
        click.echo(f"demo credentials: {DEMO_USERNAME} / {DEMO_PASSWORD}", err=True)
    if not config_path:
        raise click.UsageError("pass --config (or set RAF_CONFIG) or --demo")
    config = load_config(config_path, env=os.environ)
    if host is not None:
        config = dataclasses.replace(config, listen_host=host)
    if port is not None:
        config = dataclasses.replace(config, listen_port=port)
    app = create_app(config)
    click.echo(
        f"serving {config.variant.value} identity at "
        f"http://{config.listen_host}:{config.listen_port}",
        err=True,
    )
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="warning")


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def _echo_table(rows, headers) -> None:
    table = [headers] + [[str(cell) for cell in row] for row in rows]
    widths = [max(len(row[i]) for row in table) for i in range(len(headers))]
    for i, row in enumerate(table):
        click.echo("  ".join(cell.ljust(width) for cell, width in zip(row, widths)))
        if i == 0:
            click.echo("  ".join("-" * width for width in widths))


@cli.command()
@click.option("--url", default=DEFAULT_URL, show_default=True)
@click.option("--mode", "modes", type=click.Choice(BENCH_MODES), multiple=True,
              default=BENCH_MODES, show_default=True)
@click.option("--count", type=int, default=100, show_default=True, help="Operations per run.")
@click.option("--command-length", type=int, default=30, show_default=True,
              help="Command byte length for raf modes.")
@click.option("--validate", "with_validate", is_flag=True,
              help="Also validate each granted token in fernet-roundtrip.")
@click.option("--repeat", type=int, default=1, show_default=True, help="Runs per mode.")
@click.option("--table", "as_table", is_flag=True, help="Human-readable table instead of JSON.")
def bench(url, modes, count, command_length, with_validate, repeat, as_table):
    """Benchmark token operations against a running identity service."""
    with _client(url) as client:
        reports = run_bench(
            modes,
            count,
            client,
            command_length=command_length,
            validate=with_validate,
            repeat=repeat,
        )
    if as_table:
        rows = [
            [
                report.mode,
                report.count,
                f"{report.average:.4f}s",
                f"{report.per_token * 1e6:.1f}us",
                "; ".join(f"{name} = {value:.2f}" for name, value in sorted(report.ratios.items()))
                or "-",
            ]
            for report in reports
        ]
        _echo_table(rows, ["mode", "count", "mean run", "per token", "ratios"])
    else:
        _echo_json([report.as_dict() for report in reports])


@cli.command()
@click.option("--game", "game_name", type=click.Choice(["forge-utt", "forge-ftt"]),
              default="forge-utt", show_default=True)
@click.option("--strategy", type=click.Choice(sorted(STRATEGIES)), required=True)
@click.option("--trials", type=int, default=10_000, show_default=True)
@click.option("--tag-bits", type=click.Choice(["8", "16", "32", "256"]), default="256",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=None, help="Parallel trial workers.")
@click.option("--leaked", type=int, multiple=True,
              help="Leaked service key indices (forge-ftt only).")
@click.option("--table", "as_table", is_flag=True, help="Human-readable table instead of JSON.")
def game(game_name, strategy, trials, tag_bits, seed, workers, leaked, as_table):
    """Run a forgery game and report the adversary's score."""
    adversary = make_strategy(strategy)
    if game_name == "forge-utt":
        if leaked:
            raise click.UsageError("--leaked only applies to forge-ftt")
        outcome = run_game_utt(adversary, trials, int(tag_bits), seed, workers=workers)
    else:
        outcome = run_game_ftt(
            adversary, trials, frozenset(leaked), int(tag_bits), seed, workers=workers
        )
    payload = dataclasses.asdict(outcome)
    payload["forged_token"] = outcome.forged_token.hex() if outcome.forged_token else None
    payload["win_rate"] = outcome.win_rate
    if as_table:
        rows = [[key, payload[key]] for key in sorted(payload)]
        _echo_table(rows, ["field", "value"])
    else:
        _echo_json(payload)


@cli.command()
@click.option("--url", default=DEFAULT_URL, show_default=True)
@click.option("--scenario", "scenarios", type=click.Choice(SCENARIOS), multiple=True,
              default=SCENARIOS, show_default=True)
@click.option("--table", "as_table", is_flag=True, help="Human-readable table instead of JSON.")
def flow(url, scenarios, as_table):
    """Run end-to-end delegation scenarios against the identity service."""
    reports = []
    with _client(url) as client:
        for scenario in scenarios:
            reports.append(run_flow(scenario, client))
    if as_table:
        rows = [
            [report.scenario, step.step, step.expected, step.actual, "ok" if step.ok else "FAIL"]
            for report in reports
            for step in report.steps
        ]
        _echo_table(rows, ["scenario", "step", "expected", "actual", "result"])
    else:
        _echo_json([dataclasses.asdict(report) for report in reports])
    if not all(report.passed for report in reports):
        failed = ", ".join(report.scenario for report in reports if not report.passed)
        click.echo(f"scenario failed: {failed}", err=True)
        return 2
    return 0


def main(argv=None) -> int:
    """Console entry point mapping failures onto stable exit codes."""
    try:
        result = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (TokenError, PolicyConfigError, BlacklistUnavailableError, _TokenRejected) as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (OSError, httpx.HTTPError, BenchError, _EndpointFailure) as exc:
        click.echo(f"error: {exc}", err=True)
        return 3
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return int(result) if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
