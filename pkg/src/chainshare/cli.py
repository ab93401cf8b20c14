"""Command-line front end: a seeded simulated network with persistent state.

Every invocation prints exactly one JSON object to standard output and
reserves standard error for diagnostics.  Exit code 0 means the operation's
postcondition held; failures exit nonzero with a ``{"code", "message"}``
object.

State between invocations lives in a workspace directory: the chain as one
JSON line per block, node blob stores as plain files, the two parties' key
pairs, and -- for seeded workspaces -- the generator state, so a seeded
multi-step session is bit-reproducible end to end.  A lock file rejects
concurrent invocations on the same workspace.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

from filelock import FileLock, Timeout

from . import __version__
from .attacks import attack_matrix_table
from .crypto import KeyPair, SizeError
from .crypto.rng import RandomSource
from .crypto.scheme import POLICIES
from .ledger import Chain, LedgerCodecError, LedgerError
from .netsim import ConfigurationError, Network
from .protocol import (
    ProtocolError,
    UserAgent,
    run_sharing_scenario,
)

ENV_WORKSPACE = "CHAINSHARE_WORKSPACE"
DEFAULT_WORKSPACE = "chainshare.ws"
LOCK_TIMEOUT = 0.0  # concurrent invocations are an error, not a queue


class CliFailure(Exception):
    """Carries the JSON error object and the exit code."""

    def __init__(self, code: str, message: str, exit_code: int = 1, **extra):
        super().__init__(message)
        self.payload = {"code": code, "message": message, **extra}
        self.exit_code = exit_code


@dataclass
class Config:
    n_nodes: int = 10
    seed: int | None = None
    dpolicy: str = "last"
    max_file_size: int = 16 * 2**20

    def validate(self) -> "Config":
        if self.n_nodes < 4:
            raise CliFailure("config", "n_nodes must be at least 4")
        if self.dpolicy not in POLICIES:
            raise CliFailure(
                "config",
                f"dpolicy must be one of {sorted(POLICIES)}, got {self.dpolicy!r}",
            )
        if self.seed is not None and not 0 <= self.seed < 2**64:
            raise CliFailure("config", "seed must fit in 64 bits")
        if self.max_file_size < 1:
            raise CliFailure("config", "max_file_size must be positive")
        return self


def _load_config_file(path: Path) -> dict:
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise CliFailure("io", f"no config file at {path}") from None
    except json.JSONDecodeError as exc:
        raise CliFailure("config", f"config file is not valid JSON: {exc}") from None
    unknown = set(raw) - set(Config.__dataclass_fields__)
    if unknown:
        raise CliFailure("config", f"unknown config keys: {sorted(unknown)}")
    return raw


class Workspace:
    """On-disk layout: config.json, chain.jsonl, agents.json, state.json,
    nodes/<id>/<blob-id-hex>, grants/, lock."""

    def __init__(self, root: Path):
        self.root = root
        self.config_path = root / "config.json"
        self.chain_path = root / "chain.jsonl"
        self.agents_path = root / "agents.json"
        self.state_path = root / "state.json"
        self.nodes_dir = root / "nodes"
        self.grants_dir = root / "grants"
        self.lock_path = root / "lock"

    @property
    def initialized(self) -> bool:
        return self.config_path.exists()

    def require_initialized(self) -> None:
        if not self.initialized:
            raise CliFailure(
                "workspace", f"workspace {self.root} is not initialized; run init"
            )

    # -- creation ----------------------------------------------------------

    def init(self, config: Config) -> dict:
        if self.initialized:
            raise CliFailure("workspace", f"workspace {self.root} already initialized")
        self.root.mkdir(parents=True, exist_ok=True)
        network = Network(config.n_nodes, config.seed)
        chain = Chain.genesis()
        owner = UserAgent(network, chain, label="owner")
        receiver = UserAgent(network, chain, label="receiver")
        self.config_path.write_text(json.dumps(asdict(config), indent=2) + "\n")
        self._save_agents({"owner": owner, "receiver": receiver})
        self.save_runtime(network, chain)
        return {
            "workspace": str(self.root),
            "n_nodes": config.n_nodes,
            "seed": config.seed,
            "agents": {"owner": owner.node, "receiver": receiver.node},
        }

    # -- persistence -------------------------------------------------------

    def _save_agents(self, agents: dict[str, UserAgent]) -> None:
        blob = {
            name: {
                "node": agent.node,
                "public": agent.keys.public.hex(),
                "private": agent.keys.private.hex(),
            }
            for name, agent in agents.items()
        }
        self.agents_path.write_text(json.dumps(blob, indent=2, sort_keys=True) + "\n")

    def save_runtime(self, network: Network, chain: Chain) -> None:
        self.chain_path.write_text(chain.to_jsonl())
        state = {
            "clock": network.clock,
            "seq": network._seq,
            "rng": network.rng.getstate() if network.rng.seeded else None,
        }
        self.state_path.write_text(json.dumps(state) + "\n")
        self.nodes_dir.mkdir(exist_ok=True)
        for node, node_state in network.nodes.items():
            node_dir = self.nodes_dir / str(node)
            if node_state.blobs:
                node_dir.mkdir(exist_ok=True)
            for blob_id, blob in node_state.blobs.items():
                path = node_dir / blob_id.hex()
                if not path.exists() or path.stat().st_size != len(blob):
                    path.write_bytes(blob)

    def load_config(self) -> Config:
        self.require_initialized()
        return Config(**json.loads(self.config_path.read_text())).validate()

    def load_runtime(self) -> tuple[Config, Network, Chain, dict[str, UserAgent]]:
        config = self.load_config()
        network = Network(config.n_nodes, config.seed)
        try:
            chain = Chain.from_jsonl(self.chain_path.read_text())
        except FileNotFoundError:
            raise CliFailure("workspace", "workspace has no chain file") from None
        if self.state_path.exists():
            state = json.loads(self.state_path.read_text())
            network.clock = state.get("clock", 0)
            network._seq = state.get("seq", 0)
            if network.rng.seeded and state.get("rng") is not None:
                network.rng.setstate(state["rng"])
        if self.nodes_dir.exists():
            for node_dir in self.nodes_dir.iterdir():
                node = int(node_dir.name)
                for blob_path in node_dir.iterdir():
                    network.nodes[node].blobs[
                        bytes.fromhex(blob_path.name)
                    ] = blob_path.read_bytes()
        agents = {}
        for name, info in json.loads(self.agents_path.read_text()).items():
            agents[name] = UserAgent(
                network,
                chain,
                label=name,
                node=info["node"],
                keys=KeyPair(
                    bytes.fromhex(info["public"]), bytes.fromhex(info["private"])
                ),
            )
        return config, network, chain, agents

    def agent(self, agents: dict[str, UserAgent], name: str) -> UserAgent:
        try:
            return agents[name]
        except KeyError:
            raise CliFailure(
                "bad-argument",
                f"no agent named {name!r}; known: {sorted(agents)}",
            ) from None


# -- helpers ---------------------------------------------------------------

def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n")


def _parse_file_id(text: str) -> bytes:
    try:
        file_id = bytes.fromhex(text)
    except ValueError:
        raise CliFailure("bad-argument", f"file id is not hex: {text!r}") from None
    if len(file_id) != 32:
        raise CliFailure("bad-argument", "file id must be 32 bytes of hex")
    return file_id


def _write_trace(network: Network, path: str | None) -> None:
    if path:
        Path(path).write_text(network.trace.to_jsonl())


def _scenario_seed(args, default: int | None = None) -> int | None:
    return args.seed if args.seed is not None else default


# -- subcommand handlers ---------------------------------------------------

def _cmd_init(ws: Workspace, args) -> dict:
    raw = _load_config_file(Path(args.config)) if args.config else {}
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.nodes is not None:
        raw["n_nodes"] = args.nodes
    if args.dpolicy is not None:
        raw["dpolicy"] = args.dpolicy
    return ws.init(Config(**raw).validate())


def _cmd_store(ws: Workspace, args) -> dict:
    config, network, chain, agents = ws.load_runtime()
    owner = ws.agent(agents, args.owner)
    try:
        data = Path(args.path).read_bytes()
    except FileNotFoundError:
        raise CliFailure("io", f"no such file: {args.path}") from None
    if len(data) > config.max_file_size:
        raise CliFailure(
            "too-large",
            f"file is {len(data)} bytes; workspace limit is {config.max_file_size}",
        )
    file_id = owner.store(data, config.dpolicy)
    ws.save_runtime(network, chain)
    _write_trace(network, args.json_trace)
    return {"file_id": file_id.hex(), "size": len(data), "chain_blocks": len(chain)}


def _cmd_get(ws: Workspace, args) -> dict:
    _config, network, chain, agents = ws.load_runtime()
    agent = ws.agent(agents, args.agent)
    data = agent.retrieve(_parse_file_id(args.file_id))
    Path(args.out).write_bytes(data)
    ws.save_runtime(network, chain)
    _write_trace(network, args.json_trace)
    return {"file_id": args.file_id, "out": args.out, "size": len(data)}


def _cmd_share(ws: Workspace, args) -> dict:
    _config, network, chain, agents = ws.load_runtime()
    owner = ws.agent(agents, args.owner)
    receiver = ws.agent(agents, args.to)
    file_id = _parse_file_id(args.file_id)
    grant = owner.share(file_id, receiver.contact())
    wrapped = next(
        e.payload["grant"]
        for e in reversed(network.trace.deliveries_to(receiver.node))
        if e.kind.value == "SAFE_CHANNEL"
    )
    if args.out:
        grant_path = Path(args.out)
    else:
        ws.grants_dir.mkdir(exist_ok=True)
        grant_path = ws.grants_dir / f"{file_id.hex()[:16]}.grant"
    grant_path.write_bytes(wrapped)
    ws.save_runtime(network, chain)
    _write_trace(network, args.json_trace)
    return {
        "file_id": args.file_id,
        "grant_file": str(grant_path),
        "share_location": grant.share_location,
        "shared_blob_id": grant.shared_blob_id.hex(),
    }


def _cmd_accept(ws: Workspace, args) -> dict:
    _config, network, chain, agents = ws.load_runtime()
    receiver = ws.agent(agents, args.agent)
    try:
        wrapped = Path(args.grant).read_bytes()
    except FileNotFoundError:
        raise CliFailure("io", f"no such grant file: {args.grant}") from None
    data = receiver.accept(wrapped)
    Path(args.out).write_bytes(data)
    ws.save_runtime(network, chain)
    _write_trace(network, args.json_trace)
    return {"out": args.out, "size": len(data)}


def _cmd_audit(ws: Workspace, args) -> dict:
    ws.require_initialized()
    try:
        chain = Chain.from_jsonl(ws.chain_path.read_text())
    except FileNotFoundError:
        raise CliFailure("workspace", "workspace has no chain file") from None
    except LedgerCodecError as exc:
        raise CliFailure(
            "chain-invalid",
            f"chain file does not parse: {exc}",
            height=exc.height,
        ) from None
    report = chain.verify()
    if not report.ok:
        raise CliFailure(
            "chain-invalid",
            f"verification failed at height {report.height}: {report.reason}",
            height=report.height,
            reason=report.reason,
        )
    return {"ok": True, "blocks": len(chain), "tip": chain.tip.block_hash.hex()}


def _cmd_attack_matrix(ws: Workspace, args) -> dict:
    seed = _scenario_seed(args, 42)
    run = run_sharing_scenario(seed)
    _write_trace(run.network, args.json_trace)
    return {"seed": seed, "file_id": run.file_id.hex(), "matrix": attack_matrix_table(run)}


def _cmd_demo(ws: Workspace, args) -> dict:
    seed = _scenario_seed(args, 42)
    run = run_sharing_scenario(seed)
    _write_trace(run.network, args.json_trace)
    trace_jsonl = run.network.trace.to_jsonl()
    payload = {
        "seed": seed,
        "file_id": run.file_id.hex(),
        "n1": run.n1,
        "n2": run.n2,
        "share_location": run.grant.share_location,
        "shared_blob_id": run.grant.shared_blob_id.hex(),
        "roundtrip_ok": run.recovered == run.plaintext,
        "chain_blocks": len(run.chain),
        "trace": [json.loads(line) for line in trace_jsonl.splitlines()],
    }
    if not payload["roundtrip_ok"]:
        raise CliFailure("demo", "recovered plaintext differs from the original")
    return payload


# -- argument parsing ------------------------------------------------------

def _add_common_flags(parser: argparse.ArgumentParser, *, suppress: bool) -> None:
    """The global flags, accepted both before and after the subcommand.

    Subparsers register them with SUPPRESS defaults so a subcommand-position
    flag overrides the front-position one without clobbering it otherwise.
    """
    extra = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument(
        "--workspace",
        help=f"state directory (default: ${ENV_WORKSPACE} or ./{DEFAULT_WORKSPACE})",
        **extra,
    )
    parser.add_argument(
        "--seed", type=int, help="64-bit seed for deterministic runs", **extra
    )
    parser.add_argument(
        "--config", help="JSON config file overriding init defaults", **extra
    )
    parser.add_argument(
        "--json-trace",
        help="write this invocation's delivery trace to a file",
        **extra,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chainshare",
        description="Encrypted sharing over a simulated storage network.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    _add_common_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("init", help="create a workspace: config, key pairs, genesis")
    p.add_argument("--nodes", type=int, help="network size (default 10)")
    p.add_argument("--dpolicy", choices=sorted(POLICIES), help="block designation policy")
    p.set_defaults(handler=_cmd_init, needs_lock=True)
    _add_common_flags(p, suppress=True)

    p = sub.add_parser("store", help="encrypt a file and place it on a random node")
    p.add_argument("path")
    p.add_argument("--owner", default="owner", help="storing agent (default owner)")
    p.set_defaults(handler=_cmd_store, needs_lock=True)
    _add_common_flags(p, suppress=True)

    p = sub.add_parser("get", help="fetch and decrypt a stored file")
    p.add_argument("file_id")
    p.add_argument("out")
    p.add_argument("--agent", default="owner", help="retrieving agent (default owner)")
    p.set_defaults(handler=_cmd_get, needs_lock=True)
    _add_common_flags(p, suppress=True)

    p = sub.add_parser("share", help="re-encrypt, relocate, and notify a receiver")
    p.add_argument("file_id")
    p.add_argument("--to", required=True, help="receiving agent name")
    p.add_argument("--owner", default="owner", help="granting agent (default owner)")
    p.add_argument("--out", help="grant file path (default grants/<id>.grant)")
    p.set_defaults(handler=_cmd_share, needs_lock=True)
    _add_common_flags(p, suppress=True)

    p = sub.add_parser("accept", help="redeem a grant file and decrypt the copy")
    p.add_argument("grant")
    p.add_argument("out")
    p.add_argument("--agent", default="receiver", help="accepting agent (default receiver)")
    p.set_defaults(handler=_cmd_accept, needs_lock=True)
    _add_common_flags(p, suppress=True)

    p = sub.add_parser("audit", help="verify the workspace chain end to end")
    p.set_defaults(handler=_cmd_audit, needs_lock=True)
    _add_common_flags(p, suppress=True)

    p = sub.add_parser("attack", help="adversarial analysis")
    attack_sub = p.add_subparsers(dest="attack_command")
    pm = attack_sub.add_parser(
        "matrix", help="collusion matrix of a fresh seeded run (default seed 42)"
    )
    pm.set_defaults(handler=_cmd_attack_matrix, needs_lock=False)
    _add_common_flags(pm, suppress=True)

    p = sub.add_parser(
        "demo", help="one self-contained store/share/accept run with trace"
    )
    p.set_defaults(handler=_cmd_demo, needs_lock=False)
    _add_common_flags(p, suppress=True)

    return parser


def _workspace_root(args) -> Path:
    if args.workspace:
        return Path(args.workspace)
    return Path(os.environ.get(ENV_WORKSPACE, DEFAULT_WORKSPACE))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_usage(sys.stderr)
        _emit({"code": "usage", "message": "no subcommand given"})
        return 2
    ws = Workspace(_workspace_root(args))
    try:
        if args.needs_lock:
            ws.root.mkdir(parents=True, exist_ok=True)
            lock = FileLock(ws.lock_path, timeout=LOCK_TIMEOUT)
            try:
                with lock:
                    payload = handler(ws, args)
            except Timeout:
                raise CliFailure(
                    "locked", f"workspace {ws.root} is in use by another invocation"
                ) from None
        else:
            payload = handler(ws, args)
    except CliFailure as exc:
        _emit(exc.payload)
        return exc.exit_code
    except ProtocolError as exc:
        _emit({"code": exc.code, "message": str(exc)})
        return 1
    except (SizeError, ConfigurationError, LedgerError) as exc:
        _emit({"code": "invalid", "message": str(exc)})
        return 1
    _emit(payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
