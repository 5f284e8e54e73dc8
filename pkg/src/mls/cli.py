"""Operator entry point.

Exit codes: 0 success, 1 operation failure (auth failure, duplicate
provision, timeout), 2 bad configuration, 3 fixture errors.

Config file is flat KEY=VALUE lines (# comments allowed); command-line
flags override file values.  Recognized keys: data_dir, http_port,
sim_seed, link_delay_ms, link_loss, term_start, add_drop_deadline.
"""

from __future__ import annotations

import dataclasses
import sys
from datetime import datetime
from pathlib import Path

import click

from . import learning, metrics
from .gateway import Platform, PlatformConfig, create_app
from .hss import DuplicateIdentity, HssStore, Subscriber, _subscriber_to_dict
from .netsim import dump_trace
from .sip import ParseError, parse_uri


@dataclasses.dataclass
class Config:
    data_dir: Path = Path("fixtures")
    http_port: int = 8470
    sim_seed: int = 42
    link_delay_ms: int = 10
    link_loss: float = 0.0
    term_start: datetime = datetime.fromisoformat("2026-02-01T00:00:00+00:00")
    add_drop_deadline: datetime = datetime.fromisoformat("2026-03-01T00:00:00+00:00")

    def validate(self) -> None:
        if not 1 <= self.http_port <= 65535:
            raise ValueError(f"bad port {self.http_port}")
        if not 0.0 <= self.link_loss <= 1.0:
            raise ValueError(f"loss must be in [0,1], got {self.link_loss}")
        if self.link_delay_ms < 0:
            raise ValueError("delay must be non-negative")
        if self.add_drop_deadline < self.term_start:
            raise ValueError("add_drop_deadline before term_start")


def _load_config_file(path: Path) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise ValueError(f"{path}:{lineno}: expected KEY=VALUE")
        values[key.strip()] = value.strip()
    return values


def build_config(
    config_path: str | None,
    data_dir: str | None,
    port: int | None,
    seed: int | None,
    loss: float | None,
    delay: int | None,
) -> Config:
    cfg = Config()
    try:
        if config_path:
            raw = _load_config_file(Path(config_path))
            if "data_dir" in raw:
                cfg.data_dir = Path(raw["data_dir"])
            if "http_port" in raw:
                cfg.http_port = int(raw["http_port"])
            if "sim_seed" in raw:
                cfg.sim_seed = int(raw["sim_seed"])
            if "link_delay_ms" in raw:
                cfg.link_delay_ms = int(raw["link_delay_ms"])
            if "link_loss" in raw:
                cfg.link_loss = float(raw["link_loss"])
            if "term_start" in raw:
                cfg.term_start = datetime.fromisoformat(raw["term_start"])
            if "add_drop_deadline" in raw:
                cfg.add_drop_deadline = datetime.fromisoformat(raw["add_drop_deadline"])
        if data_dir is not None:
            cfg.data_dir = Path(data_dir)
        if port is not None:
            cfg.http_port = port
        if seed is not None:
            cfg.sim_seed = seed
        if loss is not None:
            cfg.link_loss = loss
        if delay is not None:
            cfg.link_delay_ms = delay
        cfg.validate()
    except (ValueError, OSError) as exc:
        click.echo(f"bad config: {exc}", err=True)
        sys.exit(2)
    return cfg


def _platform_config(cfg: Config) -> PlatformConfig:
    return PlatformConfig(
        sim_seed=cfg.sim_seed,
        link_delay_ms=cfg.link_delay_ms,
        link_loss=cfg.link_loss,
        term_start=cfg.term_start,
        add_drop_deadline=cfg.add_drop_deadline,
    )


def _build_platform(cfg: Config) -> Platform:
    platform = Platform(_platform_config(cfg))
    try:
        counts = platform.load_fixtures(cfg.data_dir)
    except Exception as exc:
        click.echo(f"fixture error: {exc}", err=True)
        sys.exit(3)
    for name, count in sorted(counts.items()):
        click.echo(f"loaded {count} {name}", err=True)
    return platform


_shared_options = [
    click.option("--config", "config_path", type=click.Path(exists=True), default=None),
    click.option("--data-dir", default=None, help="Fixture directory."),
    click.option("--port", type=int, default=None),
    click.option("--seed", type=int, default=None),
    click.option("--loss", type=float, default=None),
    click.option("--delay", type=int, default=None),
]


def shared_options(fn):
    for option in reversed(_shared_options):
        fn = option(fn)
    return fn


@click.group()
def main() -> None:
    """IMS mobile learning platform."""


@main.command()
@shared_options
def serve(config_path, data_dir, port, seed, loss, delay) -> None:
    """Run the HTTP gateway over the simulated core."""
    import uvicorn

    cfg = build_config(config_path, data_dir, port, seed, loss, delay)
    platform = _build_platform(cfg)
    static_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(platform, static_dir if static_dir.is_dir() else None)
    uvicorn.run(app, host="127.0.0.1", port=cfg.http_port, log_level="warning")


@main.command("simulate-ue")
@click.argument("script", type=click.Path(exists=True))
@click.option("--impi", default=None, help="Identity; default: first fixture subscriber.")
@click.option("--key", default=None, help="Secret key hex; default: fixture key.")
@shared_options
def simulate_ue(script, impi, key, config_path, data_dir, port, seed, loss, delay) -> None:
    """Run a scripted UE flow (lines: register | invite | bye | wait <ms>)
    and print the network trace."""
    cfg = build_config(config_path, data_dir, port, seed, loss, delay)
    platform = _build_platform(cfg)
    trace, ok = run_ue_script(platform, Path(script).read_text(), impi, key)
    click.echo(dump_trace(trace), nl=False)
    sys.exit(0 if ok else 1)


def run_ue_script(
    platform: Platform,
    script_text: str,
    impi: str | None = None,
    key_hex: str | None = None,
):
    """Execute a UE script against a platform; returns (trace, all_ok)."""
    from .netsim import LinkConfig
    from .ue import UeAgent

    subs = platform.hss.subscribers()
    if impi is None:
        if not subs:
            raise ValueError("no subscribers provisioned")
        sub = subs[0]
        impi, k = sub.impi, sub.k
    else:
        k = bytes.fromhex(key_hex) if key_hex else platform.hss.lookup_by_impi(impi).k

    agent = UeAgent(
        platform.net, "ue-script", impi,
        impu=platform._impu_for(impi), k=k, domain=platform.config.domain,
    )
    platform.net.connect(
        "ue-script", platform.core.pcscf,
        LinkConfig(
            delay_ms=platform.config.link_delay_ms,
            loss_prob=platform.config.link_loss,
            seed=platform.config.sim_seed,
        ),
    )
    ok = True
    call_id = None
    for lineno, line in enumerate(script_text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        op = parts[0]
        if op == "register":
            result = agent.register()
            ok = ok and result.ok
        elif op == "invite":
            call_id, result = agent.invite()
            ok = ok and result.ok
        elif op == "bye":
            if call_id is None:
                ok = False
                continue
            result = agent.bye(call_id)
            ok = ok and result.ok
            call_id = None
        elif op == "wait":
            target = platform.net.now + int(parts[1])
            platform.net.call_at(target, lambda now: None)
            platform.net.run_until_idle()
        else:
            raise ValueError(f"script line {lineno}: unknown op {op!r}")
    return platform.net.trace, ok


@main.command()
@click.option("--impi", required=True)
@click.option("--key", "key_hex", required=True, help="16-byte secret key, hex.")
@click.option("--impu", "impus", multiple=True, required=True)
@click.option("--role", "roles", multiple=True, required=True)
@click.option("--student-id", required=True)
@shared_options
def provision(impi, key_hex, impus, roles, student_id,
              config_path, data_dir, port, seed, loss, delay) -> None:
    """Add a subscriber to the fixture store."""
    cfg = build_config(config_path, data_dir, port, seed, loss, delay)
    path = cfg.data_dir / "subscribers.jsonl"
    try:
        store = HssStore.load(path) if path.exists() else HssStore()
    except Exception as exc:
        click.echo(f"fixture error: {exc}", err=True)
        sys.exit(3)
    try:
        store.provision(Subscriber(
            impi=impi,
            impus=tuple(parse_uri(u) for u in impus),
            k=bytes.fromhex(key_hex),
            roles=frozenset(roles),
            student_id=student_id,
        ))
    except (DuplicateIdentity, ValueError, ParseError) as exc:
        click.echo(f"provision failed: {exc}", err=True)
        sys.exit(1)
    store.save(path)
    click.echo(f"provisioned {impi}")


@main.command("load-fixtures")
@click.option("--dump-dir", default=None,
              help="Re-emit the loaded fixtures into this directory.")
@shared_options
def load_fixtures(dump_dir, config_path, data_dir, port, seed, loss, delay) -> None:
    """Load and validate all fixture files; optionally re-emit them."""
    import json

    cfg = build_config(config_path, data_dir, port, seed, loss, delay)
    platform = _build_platform(cfg)
    if dump_dir:
        out = Path(dump_dir)
        out.mkdir(parents=True, exist_ok=True)
        platform.hss.save(out / "subscribers.jsonl")
        for name in ("courses.jsonl", "buildings.jsonl", "events.jsonl"):
            rows = learning.load_jsonl(cfg.data_dir / name)
            with open(out / name, "w", encoding="utf-8") as fh:
                for row in rows:
                    fh.write(json.dumps(row) + "\n")
        with open(out / "releases.jsonl", "w", encoding="ascii") as fh:
            for rec in platform.releases:
                fh.write(json.dumps(metrics.record_to_dict(rec)) + "\n")
        click.echo(f"dumped fixtures to {out}")


@main.command("report-metrics")
@click.option("--out-dir", default=None,
              help="Write releases.tsv and trend figures here.")
@shared_options
def report_metrics(out_dir, config_path, data_dir, port, seed, loss, delay) -> None:
    """Print the release summary table; optionally export TSV + figures."""
    cfg = build_config(config_path, data_dir, port, seed, loss, delay)
    try:
        records = metrics.load_releases(cfg.data_dir / "releases.jsonl")
    except Exception as exc:
        click.echo(f"fixture error: {exc}", err=True)
        sys.exit(3)
    click.echo(metrics.render_report(records), nl=False)
    if len(records) >= 2:
        passed, violations = metrics.trend_check(records)
        click.echo(f"trend: {'pass' if passed else 'fail'}")
        for violation in violations:
            click.echo(f"  {violation}")
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        metrics.write_tsv(records, out / "releases.tsv")
        for path in metrics.render_figures(records, out):
            click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
