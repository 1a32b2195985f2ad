import json

import pytest
from click.testing import CliRunner

from raf.cli import cli, main
from raf.fernet import FernetKey, fernet_issue, gen_fernet_key
from raf.payload import TokenPayload
from raf.token import user_issue, service_issue_ut
from tests.conftest import NOW

CMD1 = "compute/v2.1/servers {'server': {'name': 'vm1'}}"
CMD2 = "network/v2.0/ports {'port': {'network_id': 'net1'}}"


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def granted(live_server, capsys):
    code, out, err = run_cli(capsys, "grant", "--url", live_server)
    assert code == 0, err
    return out.strip()


class TestExitCodes:
    def test_unknown_subcommand_is_usage(self, capsys):
        code, _, _ = run_cli(capsys, "frobnicate")
        assert code == 1

    def test_unknown_option_is_usage(self, capsys):
        code, _, _ = run_cli(capsys, "inspect", "--frobnicate")
        assert code == 1

    def test_version_prints_and_exits_zero(self, capsys):
        code, out, _ = run_cli(capsys, "--version")
        assert code == 0
        assert "raf" in out

    def test_connection_failure_is_io(self, capsys):
        code, _, err = run_cli(
            capsys, "grant", "--url", "http://127.0.0.1:9", "--username", "alice"
        )
        assert code == 3

    def test_serve_without_config_is_usage(self, capsys, monkeypatch):
        monkeypatch.delenv("RAF_CONFIG", raising=False)
        code, _, _ = run_cli(capsys, "serve")
        assert code == 1


class TestGrant:
    def test_grant_prints_a_fernet_token(self, granted):
        assert granted.startswith("gAAAA")

    def test_bad_password_exits_two(self, live_server, capsys):
        code, _, err = run_cli(
            capsys, "grant", "--url", live_server, "--password", "wrong"
        )
        assert code == 2
        assert "invalid-credentials" in err

    def test_output_to_file(self, live_server, capsys, tmp_path):
        target = tmp_path / "token.txt"
        code, out, _ = run_cli(capsys, "grant", "--url", live_server, "--output", str(target))
        assert code == 0
        assert out == ""
        assert target.read_text().strip().startswith("gAAAA")


class TestIssueAndValidate:
    def test_issue_then_validate_round_trip(self, live_server, granted, capsys):
        code, child, _ = run_cli(capsys, "issue", granted, "-c", CMD1)
        assert code == 0
        child = child.strip()
        code, out, _ = run_cli(capsys, "validate", child, "--url", live_server,
                               "--service-id", "cli-test-1")
        assert code == 0
        assert "raf-user-tied" in out
        assert CMD1 in out

    def test_chained_issue_keeps_both_commands(self, live_server, granted, capsys):
        _, first, _ = run_cli(capsys, "issue", granted, "-c", CMD1)
        _, second, _ = run_cli(capsys, "issue", first.strip(), "-c", CMD2)
        code, out, _ = run_cli(capsys, "validate", second.strip(), "--url", live_server,
                               "--service-id", "cli-test-2")
        assert code == 0
        assert CMD1 in out and CMD2 in out

    def test_issue_reads_stdin(self, granted):
        result = CliRunner().invoke(cli, ["issue", "-c", CMD1], input=granted + "\n")
        assert result.exit_code == 0
        assert result.output.strip().startswith("kQ")

    def test_replay_is_exit_two(self, live_server, granted, capsys):
        _, child, _ = run_cli(capsys, "issue", granted, "-c", CMD1)
        child = child.strip()
        code, _, _ = run_cli(capsys, "validate", child, "--url", live_server,
                             "--service-id", "cli-replay")
        assert code == 0
        code, _, err = run_cli(capsys, "validate", child, "--url", live_server,
                               "--service-id", "cli-replay")
        assert code == 2
        assert "replayed-token" in err

    def test_garbage_token_is_exit_two(self, live_server, capsys):
        code, _, err = run_cli(capsys, "validate", "AAAA", "--url", live_server)
        assert code == 2
        assert "invalid-token" in err

    def test_oversized_parent_is_exit_two(self, capsys):
        key = gen_fernet_key()
        payload = TokenPayload("u", "p", ("password",), NOW + 3600, "a")
        base = fernet_issue(FernetKey.from_encoded(key.encode()), payload, NOW, bytes(16))
        huge = user_issue(base, "x" * 70_000, 600, NOW, bytes(8))
        code, _, err = run_cli(capsys, "issue", huge, "-c", "next", "--now", str(NOW))
        assert code == 2
        assert "65535" in err

    def test_bad_randomizer_is_usage(self, granted, capsys):
        code, _, _ = run_cli(capsys, "issue", granted, "-c", CMD1, "--randomizer", "zz")
        assert code == 1
        code, _, _ = run_cli(capsys, "issue", granted, "-c", CMD1, "--randomizer", "aabb")
        assert code == 1

    def test_fully_tied_needs_key_material(self, granted, capsys):
        _, child, _ = run_cli(capsys, "issue", granted, "-c", CMD1)
        code, _, _ = run_cli(capsys, "issue", child.strip(), "-c", CMD2,
                             "--variant", "fully-tied")
        assert code == 1

    def test_fully_tied_issue_from_files(self, tmp_path, capsys):
        from raf.service.config import load_config, scaffold_demo
        from raf.token import Variant

        config_path = scaffold_demo(tmp_path / "deploy", variant=Variant.FULLY_TIED)
        config = load_config(config_path, env={})
        key = FernetKey.from_encoded(config.fernet_key_path.read_text().strip())
        payload = TokenPayload("u", "p", ("password",), NOW + 3600, "a")
        base = fernet_issue(key, payload, NOW, bytes(16))
        _, child, _ = run_cli(capsys, "issue", base, "-c", CMD1, "--now", str(NOW))
        code, grandchild, _ = run_cli(
            capsys, "issue", child.strip(), "-c", CMD2,
            "--variant", "fully-tied",
            "--fernet-key", str(config.fernet_key_path),
            "--keys", str(config.service_keys_path),
            "--policy", str(config.policy_path),
            "--now", str(NOW),
        )
        assert code == 0, grandchild
        assert grandchild.strip().startswith("kQ")
        code, _, _ = run_cli(
            capsys, "issue", child.strip(), "-c", CMD2,
            "--variant", "fully-tied",
            "--fernet-key", str(config.fernet_key_path),
            "--keys", str(config.service_keys_path),
            "--policy", str(config.policy_path),
            "--service-id", "bogus",
        )
        assert code == 1


class TestInspect:
    def test_fernet_dump(self, granted, capsys):
        code, out, _ = run_cli(capsys, "inspect", granted)
        assert code == 0
        assert "UNVERIFIED" in out
        assert "kind: fernet" in out
        assert "issued:" in out

    def test_depth_three_layers_outermost_first(self, capsys):
        key = FernetKey(bytes(range(32)))
        payload = TokenPayload("u-1", "p-1", ("password",), NOW + 3600, "a")
        base = fernet_issue(key, payload, NOW, bytes(16))
        t1 = user_issue(base, CMD1, 600, NOW, b"\x01" * 8)
        t2 = service_issue_ut(t1, CMD2, 500, NOW, b"\x02" * 8)
        t3 = service_issue_ut(t2, "image/v2/images", 400, NOW, b"\x03" * 8)
        code, out, _ = run_cli(capsys, "inspect", t3)
        assert code == 0
        assert "depth: 3" in out
        assert out.index("layer 3 (outermost)") < out.index("layer 2 (inner)") < out.index("layer 1 (base)")
        assert "image/v2/images" in out
        assert "base digest:" in out
        assert "UNVERIFIED" in out

    def test_truncated_token_names_offset(self, capsys):
        key = FernetKey(bytes(range(32)))
        payload = TokenPayload("u-1", "p-1", ("password",), NOW + 3600, "a")
        base = fernet_issue(key, payload, NOW, bytes(16))
        t1 = user_issue(base, CMD1, 600, NOW, b"\x01" * 8)
        from raf.codec import b64url_decode, b64url_encode

        raw = b64url_decode(t1)
        truncated = b64url_encode(raw[:40])
        code, _, err = run_cli(capsys, "inspect", truncated)
        assert code == 2
        assert "offset" in err

    def test_not_base64_is_exit_two(self, capsys):
        code, _, _ = run_cli(capsys, "inspect", "not/valid/base64!!")
        assert code == 2


class TestBenchCli:
    def test_count_zero_without_endpoint(self, capsys):
        code, out, _ = run_cli(capsys, "bench", "--url", "http://127.0.0.1:9",
                               "--count", "0")
        assert code == 0
        reports = json.loads(out)
        assert {r["mode"] for r in reports} == {"fernet-roundtrip", "raf-local-issue", "raf-roundtrip"}
        assert all(r["count"] == 0 for r in reports)

    def test_small_real_run_json(self, live_server, capsys):
        code, out, _ = run_cli(capsys, "bench", "--url", live_server,
                               "--mode", "raf-local-issue", "--count", "5")
        assert code == 0
        (report,) = json.loads(out)
        assert report["mode"] == "raf-local-issue"
        assert report["per_token"] > 0

    def test_table_output(self, live_server, capsys):
        code, out, _ = run_cli(capsys, "bench", "--url", live_server,
                               "--mode", "raf-local-issue", "--count", "3", "--table")
        assert code == 0
        assert "per token" in out

    def test_endpoint_down_is_io(self, capsys):
        code, _, _ = run_cli(capsys, "bench", "--url", "http://127.0.0.1:9",
                             "--mode", "fernet-roundtrip", "--count", "1")
        assert code == 3


class TestGameCli:
    def test_extend_observed_json(self, capsys):
        code, out, _ = run_cli(capsys, "game", "--strategy", "extend-observed",
                               "--trials", "20")
        assert code == 0
        payload = json.loads(out)
        assert payload["wins"] == 0
        assert payload["ver_successes"] == 20
        assert payload["won"] is False
        assert payload["win_rate"] == 0.0

    def test_ftt_leaked_key_table(self, capsys):
        code, out, _ = run_cli(capsys, "game", "--game", "forge-ftt",
                               "--strategy", "leaked-service-key",
                               "--trials", "10", "--leaked", "4", "--table")
        assert code == 0
        assert "ver_successes" in out

    def test_leaked_zero_is_rejected(self, capsys):
        code, _, err = run_cli(capsys, "game", "--game", "forge-ftt",
                               "--strategy", "leaked-service-key",
                               "--trials", "5", "--leaked", "0")
        assert code == 1
        assert "root key" in err

    def test_leaked_with_utt_is_usage(self, capsys):
        code, _, _ = run_cli(capsys, "game", "--strategy", "random-tag",
                             "--trials", "5", "--leaked", "1")
        assert code == 1

    def test_winning_game_reports_forgery_hex(self, capsys):
        code, out, _ = run_cli(capsys, "game", "--strategy", "random-tag",
                               "--trials", "2000", "--tag-bits", "8", "--seed", "0")
        assert code == 0
        payload = json.loads(out)
        assert payload["won"] is True
        assert isinstance(payload["forged_token"], str)
        bytes.fromhex(payload["forged_token"])


class TestFlowCli:
    def test_all_scenarios_pass_against_live_server(self, live_server, capsys):
        code, out, _ = run_cli(capsys, "flow", "--url", live_server)
        assert code == 0
        reports = json.loads(out)
        assert {r["scenario"] for r in reports} == {"create-vm", "replay", "figure-3"}
        assert all(r["passed"] for r in reports)

    def test_single_scenario_table(self, live_server, capsys):
        code, out, _ = run_cli(capsys, "flow", "--url", live_server,
                               "--scenario", "replay", "--table")
        assert code == 0
        assert "replayed-token" in out
