"""End-to-end checks of the command-line front end via main(argv)."""

import json

import pytest
from filelock import FileLock

from chainshare.cli import DEFAULT_WORKSPACE, ENV_WORKSPACE, main


@pytest.fixture(autouse=True)
def _isolated_env(monkeypatch, tmp_path):
    monkeypatch.delenv(ENV_WORKSPACE, raising=False)
    monkeypatch.chdir(tmp_path)


@pytest.fixture
def cli(capsys):
    def run(*argv):
        code = main(list(argv))
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 1, "every invocation prints exactly one JSON object"
        return code, json.loads(lines[0])

    return run


@pytest.fixture
def ws(tmp_path):
    return tmp_path / "ws"


def _init(cli, ws, *extra):
    code, payload = cli("--workspace", str(ws), "--seed", "7", "init", *extra)
    assert code == 0
    return payload


def test_usage_without_subcommand(cli):
    code, payload = cli()
    assert code == 2
    assert payload["code"] == "usage"


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_init_creates_workspace(cli, ws):
    payload = _init(cli, ws)
    assert payload["n_nodes"] == 10
    assert payload["seed"] == 7
    assert sorted(payload["agents"]) == ["owner", "receiver"]
    for name in ("config.json", "chain.jsonl", "agents.json", "state.json"):
        assert (ws / name).exists()
    code, err = cli("--workspace", str(ws), "init")
    assert code == 1 and err["code"] == "workspace"


def test_init_with_config_file(cli, ws, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_nodes": 6, "dpolicy": "all"}))
    code, payload = cli("--workspace", str(ws), "--config", str(cfg), "init")
    assert code == 0
    assert payload["n_nodes"] == 6

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n_nodes": 6, "surprise": 1}))
    code, err = cli("--workspace", str(tmp_path / "ws2"), "--config", str(bad), "init")
    assert code == 1 and err["code"] == "config"


def test_init_rejects_bad_settings(cli, ws):
    code, err = cli("--workspace", str(ws), "init", "--nodes", "3")
    assert code == 1 and err["code"] == "config"


def test_store_get_round_trip(cli, ws, tmp_path):
    _init(cli, ws)
    src = tmp_path / "note.txt"
    src.write_bytes(b"round trips survive process boundaries")
    code, stored = cli("--workspace", str(ws), "store", str(src))
    assert code == 0
    assert len(stored["file_id"]) == 64
    assert stored["chain_blocks"] == 2

    out = tmp_path / "note.out"
    code, got = cli("--workspace", str(ws), "get", stored["file_id"], str(out))
    assert code == 0
    assert out.read_bytes() == src.read_bytes()
    assert got["size"] == len(src.read_bytes())


def test_store_respects_size_limit(cli, ws, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"max_file_size": 8}))
    cli("--workspace", str(ws), "--config", str(cfg), "init")
    big = tmp_path / "big.bin"
    big.write_bytes(b"x" * 9)
    code, err = cli("--workspace", str(ws), "store", str(big))
    assert code == 1 and err["code"] == "too-large"


def test_store_missing_file(cli, ws):
    _init(cli, ws)
    code, err = cli("--workspace", str(ws), "store", str(ws / "absent.bin"))
    assert code == 1 and err["code"] == "io"


def test_store_unknown_agent(cli, ws, tmp_path):
    _init(cli, ws)
    src = tmp_path / "f"
    src.write_bytes(b"data")
    code, err = cli("--workspace", str(ws), "store", str(src), "--owner", "nobody")
    assert code == 1 and err["code"] == "bad-argument"


def test_get_argument_errors(cli, ws, tmp_path):
    _init(cli, ws)
    out = str(tmp_path / "o")
    code, err = cli("--workspace", str(ws), "get", "zz", out)
    assert code == 1 and err["code"] == "bad-argument"
    code, err = cli("--workspace", str(ws), "get", "ab" * 32, out)
    assert code == 1 and err["code"] == "not-found"


def test_commands_require_initialized_workspace(cli, ws, tmp_path):
    src = tmp_path / "f"
    src.write_bytes(b"data")
    code, err = cli("--workspace", str(ws), "store", str(src))
    assert code == 1 and err["code"] == "workspace"


def test_share_accept_flow(cli, ws, tmp_path):
    _init(cli, ws)
    src = tmp_path / "doc"
    data = b"grant redeemed through files alone"
    src.write_bytes(data)
    _, stored = cli("--workspace", str(ws), "store", str(src))

    code, shared = cli(
        "--workspace", str(ws), "share", stored["file_id"], "--to", "receiver"
    )
    assert code == 0
    grant_path = ws / "grants" / f"{stored['file_id'][:16]}.grant"
    assert shared["grant_file"] == str(grant_path)
    assert grant_path.exists()
    assert len(shared["shared_blob_id"]) == 64
    assert shared["shared_blob_id"] != stored["file_id"]

    out = tmp_path / "received"
    code, accepted = cli(
        "--workspace", str(ws), "accept", str(grant_path), str(out)
    )
    assert code == 0
    assert out.read_bytes() == data

    code, audit = cli("--workspace", str(ws), "audit")
    assert code == 0
    assert audit["ok"] is True and audit["blocks"] == 3


def test_receiver_cannot_get_the_owner_file(cli, ws, tmp_path):
    _init(cli, ws)
    src = tmp_path / "private"
    src.write_bytes(b"owner eyes only")
    _, stored = cli("--workspace", str(ws), "store", str(src))
    code, err = cli(
        "--workspace",
        str(ws),
        "get",
        stored["file_id"],
        str(tmp_path / "x"),
        "--agent",
        "receiver",
    )
    assert code == 1 and err["code"] == "not-authorized"


def test_audit_flags_a_tampered_chain(cli, ws, tmp_path):
    _init(cli, ws)
    src = tmp_path / "f"
    src.write_bytes(b"auditable")
    cli("--workspace", str(ws), "store", str(src))

    lines = (ws / "chain.jsonl").read_text().splitlines()
    block = json.loads(lines[1])
    digest = block["records"][0]["content_hash"]
    block["records"][0]["content_hash"] = ("0" if digest[0] != "0" else "1") + digest[1:]
    lines[1] = json.dumps(block)
    (ws / "chain.jsonl").write_text("\n".join(lines) + "\n")

    code, err = cli("--workspace", str(ws), "audit")
    assert code == 1
    assert err["code"] == "chain-invalid"
    assert err["height"] == 1


def test_audit_flags_an_unparseable_chain(cli, ws):
    _init(cli, ws)
    (ws / "chain.jsonl").write_text("this is not json\n")
    code, err = cli("--workspace", str(ws), "audit")
    assert code == 1 and err["code"] == "chain-invalid"


def test_workspace_lock_rejects_concurrent_use(cli, ws):
    _init(cli, ws)
    holder = FileLock(ws / "lock")
    holder.acquire()
    try:
        code, err = cli("--workspace", str(ws), "audit")
        assert code == 1 and err["code"] == "locked"
    finally:
        holder.release()
    code, _ = cli("--workspace", str(ws), "audit")
    assert code == 0


def test_workspace_resolution_order(cli, tmp_path, monkeypatch):
    env_ws = tmp_path / "from-env"
    monkeypatch.setenv(ENV_WORKSPACE, str(env_ws))
    code, _ = cli("--seed", "1", "init")
    assert code == 0 and env_ws.exists()

    flag_ws = tmp_path / "from-flag"
    code, _ = cli("--workspace", str(flag_ws), "--seed", "1", "init")
    assert code == 0 and flag_ws.exists()

    monkeypatch.delenv(ENV_WORKSPACE)
    code, _ = cli("--seed", "1", "init")
    assert code == 0 and (tmp_path / DEFAULT_WORKSPACE).exists()


def test_demo_is_deterministic(cli, tmp_path):
    t1, t2 = tmp_path / "t1.jsonl", tmp_path / "t2.jsonl"
    code1, p1 = cli("--seed", "42", "--json-trace", str(t1), "demo")
    code2, p2 = cli("--seed", "42", "--json-trace", str(t2), "demo")
    assert code1 == code2 == 0
    assert p1 == p2
    assert t1.read_bytes() == t2.read_bytes()
    assert p1["roundtrip_ok"] is True
    assert p1["seed"] == 42
    assert [e["kind"] for e in p1["trace"]] == [
        "STORE_BLOB",
        "REENCRYPT_AND_FORWARD",
        "TRANSFER_BLOB",
        "SAFE_CHANNEL",
        "FETCH_BLOB",
        "BLOB_REPLY",
    ]


def test_global_flags_work_after_the_subcommand(cli, tmp_path):
    _, before = cli("--seed", "42", "demo")
    _, after = cli("demo", "--seed", "42")
    assert before == after

    ws = tmp_path / "tail-flags"
    code, payload = cli("init", "--seed", "9", "--workspace", str(ws))
    assert code == 0
    assert payload["seed"] == 9
    assert ws.exists()


def test_attack_matrix_command(cli):
    code, payload = cli("attack", "matrix")
    assert code == 0
    assert payload["seed"] == 42
    rows = payload["matrix"]
    assert len(rows) == 7
    assert all(row["s_derivable"] is False for row in rows)
    blocked = {
        tuple(r["coalition"]): r["missing_link"] for r in rows if not r["feasible"]
    }
    assert blocked == {
        ("N1", "N2"): "N1 location",
        ("N1", "Receiver"): "N1 location",
        ("N1", "N2", "Receiver"): "N1 location",
    }
