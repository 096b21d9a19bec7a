"""Command-line front end.

Five subcommands (deploy, simulate, sweep, mc-outage, chain) read one
key/value config file, write CSV or JSON artifacts plus a run manifest into
--out, and exit 0 on success, 1 on a config error, 2 on a runtime error,
3 on an output I/O error. Failures print one JSON line to stderr. All
randomness flows from the config seed (or its --seed override), so reruns
are byte-identical.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__, energy, mcoutage
from .clustering import clusters_to_csv, elect_nccs
from .engine import (SWEEP_AXES, Simulation, events_to_csv, sweep)
from .netmodel import (CONFIG_SCHEMA, InvalidConfig, SimConfig, config_digest,
                       load_config, validate_config)
from .topology import deploy, nodes_to_csv


def _schema_epilog() -> str:
    lines = ["config keys (key = value per line, # comments):"]
    for key, (kind, unit, description) in CONFIG_SCHEMA.items():
        unit_text = f", {unit}" if unit else ""
        lines.append(f"  {key} ({kind.__name__}{unit_text}): {description}")
    return "\n".join(lines)


def parse_values(text: str) -> list[float]:
    """Axis values: 'a,b,c' list, 'a..b' (10 points), or 'a..b..N'."""
    try:
        if ".." in text:
            parts = text.split("..")
            if len(parts) == 2:
                lo, hi, count = float(parts[0]), float(parts[1]), 10
            elif len(parts) == 3:
                lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            else:
                raise ValueError(text)
            if count < 2:
                raise ValueError("range needs at least 2 points")
            step = (hi - lo) / (count - 1)
            return [lo + i * step for i in range(count)]
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise InvalidConfig("values", f"cannot parse {text!r}: {exc}") from exc


def _load(args) -> SimConfig:
    if args.config is None:
        cfg = SimConfig()
    else:
        if not os.path.exists(args.config):
            raise InvalidConfig("config", f"config file not found: {args.config}")
        cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


class _Writer:
    """Serializes artifact writes under --out and remembers relative names."""

    def __init__(self, out_dir: str):
        self.out_dir = out_dir
        self.written: list[str] = []
        os.makedirs(out_dir, exist_ok=True)

    def write(self, name: str, text: str):
        with open(os.path.join(self.out_dir, name), "w", newline="") as fh:
            fh.write(text)
        self.written.append(name)


def _json_table(columns: list[str], rows: list[list]) -> str:
    return json.dumps({"columns": columns, "rows": rows},
                      indent=2, sort_keys=True)


def _write_manifest(writer: _Writer, command: str, cfg: SimConfig,
                    argv: list[str], extras: dict | None = None):
    manifest = {
        "command": command,
        "argv": argv,
        "config_sha256": config_digest(cfg),
        "seed": cfg.seed,
        "outputs": list(writer.written),
        "versions": {
            "nanonetsim": __version__,
            "python": sys.version.split()[0],
            "numpy": np.__version__,
        },
    }
    if extras:
        manifest["meta"] = extras
    writer.write("manifest.json",
                 json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _cmd_deploy(args, argv) -> int:
    cfg = validate_config(_load(args))
    dep = deploy(cfg)
    clusters = elect_nccs(dep, cfg)
    writer = _Writer(args.out)
    if args.format == "csv":
        writer.write("nodes.csv", nodes_to_csv(dep))
        writer.write("clusters.csv", clusters_to_csv(clusters))
    else:
        nodes = [{"id": n.node_id, "x": n.position.x, "y": n.position.y,
                  "z": n.position.z, "layer": n.layer + 1}
                 for n in dep.nodes]
        groups = [{"cluster_id": c.id, "layer": c.layer + 1, "ncc_id": c.ncc,
                   "members": list(c.members)} for c in clusters]
        writer.write("nodes.json", json.dumps(nodes, indent=2) + "\n")
        writer.write("clusters.json", json.dumps(groups, indent=2) + "\n")
    _write_manifest(writer, "deploy", cfg, argv,
                    {"nodes": len(dep.nodes), "clusters": len(clusters)})
    return 0


_CYCLE_COLUMNS = ("cycle", "requests", "delivered_bits", "outage_events",
                  "energy_spent_J", "min_residual_J", "mean_residual_J")


def _cmd_simulate(args, argv) -> int:
    cfg = validate_config(_load(args))
    sim = Simulation(cfg)
    writer = _Writer(args.out)
    rows = []
    for _ in range(cfg.cycles):
        trace = sim.step()
        residuals = list(trace.end_residuals.values())
        rows.append([trace.cycle, len(sim.state.requests),
                     trace.delivered_bits, trace.outage_events,
                     sum(trace.per_node_energy_spent.values()),
                     min(residuals) if residuals else 0.0,
                     sum(residuals) / len(residuals) if residuals else 0.0])
        if args.events:
            writer.write(f"events_{trace.cycle:04d}.csv", events_to_csv(trace))
    if args.format == "csv":
        lines = [",".join(_CYCLE_COLUMNS)]
        for row in rows:
            lines.append(",".join(
                str(x) if isinstance(x, int) else repr(x) for x in row))
        writer.write("cycles.csv", "\n".join(lines) + "\n")
    else:
        writer.write("cycles.json", _json_table(list(_CYCLE_COLUMNS), rows) + "\n")
    delivered = sum(r[2] for r in rows)
    _write_manifest(writer, "simulate", cfg, argv,
                    {"cycles": cfg.cycles, "delivered_bits": delivered})
    return 0


def _cmd_sweep(args, argv) -> int:
    cfg = validate_config(_load(args))
    values = parse_values(args.values)
    table = sweep(cfg, args.axis, values)
    writer = _Writer(args.out)
    if args.format == "csv":
        writer.write("sweep.csv", table.to_csv())
    else:
        writer.write("sweep.json", table.to_json() + "\n")
    _write_manifest(writer, "sweep", cfg, argv, table.meta)
    return 0


def _cmd_mc_outage(args, argv) -> int:
    cfg = validate_config(_load(args))
    k_values = []
    for part in args.k.split(","):
        k = float(part)
        if k < 1 or k != int(k):
            raise InvalidConfig("k", f"link counts must be integers >= 1, got {part!r}")
        k_values.append(int(k))
    gammas = parse_values(args.gammas)
    trials = int(float(args.trials)) if args.trials else cfg.trials
    if trials < 1:
        raise InvalidConfig("trials", "must be >= 1")
    sigma = cfg.channel.shadow_sigma_db if args.sigma is None else args.sigma
    rows = []
    report = 0.0
    for k in k_values:
        run = mcoutage.McRun(k_links=k, gamma_axis_db=tuple(gammas),
                             trials=trials, seed=cfg.seed,
                             link_mean_db=args.mean, link_sigma_db=sigma)
        result = mcoutage.mc_outage(run)
        rows.extend(result.rows)
        report = max(report, mcoutage.mc_vs_analytic_report(result))
    writer = _Writer(args.out)
    if args.format == "csv":
        lines = [",".join(mcoutage.MC_COLUMNS)]
        for row in rows:
            g, p_mc, p_an, se, g_lin, k, p_mcc, p_anc = row
            lines.append(f"{g!r},{p_mc!r},{p_an!r},{se!r},{g_lin!r},{int(k)},"
                         f"{p_mcc!r},{p_anc!r}")
        writer.write("mc_outage.csv", "\n".join(lines) + "\n")
    else:
        writer.write("mc_outage.json",
                     _json_table(list(mcoutage.MC_COLUMNS),
                                 [list(r) for r in rows]) + "\n")
    _write_manifest(writer, "mc-outage", cfg, argv,
                    {"trials": trials, "k": k_values,
                     "max_abs_gap": report})
    return 0


def _cmd_chain(args, argv) -> int:
    cfg = validate_config(_load(args))
    consume = args.consume
    if consume is None:
        consume = cfg.energy.e_tx_j / cfg.message_interval
    chain = energy.build_chain(cfg.energy, consume)
    pi = energy.stationary_distribution(chain)
    writer = _Writer(args.out)
    if args.format == "csv":
        writer.write("chain.csv", energy.chain_to_csv(chain, pi))
    else:
        payload = {
            "beta": chain.beta,
            "energies": list(chain.energies),
            "rates_h": list(chain.rates_h),
            "rates_c": list(chain.rates_c),
            "pi": [float(x) for x in pi],
        }
        writer.write("chain.json", json.dumps(payload, indent=2) + "\n")
    saving = energy.p_es(cfg.energy.e_tx_j / 2.0, cfg.energy.e_tx_j / 2.0,
                         cfg.theta)
    _write_manifest(writer, "chain", cfg, argv,
                    {"beta": chain.beta, "consume_rate_w": consume,
                     "p_es_at_quantum": saving})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nanonetsim",
        description="Energy-harvesting THz nanosensor network simulator.",
        epilog=_schema_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("deploy", help="place nodes, assign layers, form clusters")
    common(p)
    p.set_defaults(func=_cmd_deploy)

    p = sub.add_parser("simulate", help="run transmission cycles")
    common(p)
    p.add_argument("--events", action="store_true",
                   help="also write per-cycle event logs")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="evaluate analytic metrics along an axis")
    common(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", required=True,
                   help="'a,b,c' or 'a..b' (10 points) or 'a..b..N'")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("mc-outage", help="Monte Carlo fusion outage campaign")
    common(p)
    p.add_argument("--k", default="1,2,4", help="comma list of fused link counts")
    p.add_argument("--gammas", default="6..14..17",
                   help="threshold axis in dB (same syntax as --values)")
    p.add_argument("--trials", default=None,
                   help="trial count (accepts 1e6 notation)")
    p.add_argument("--sigma", type=float, default=None,
                   help="link shadowing std dev in dB")
    p.add_argument("--mean", type=float, default=None,
                   help="link mean SINR in dB (default: calibrated)")
    p.set_defaults(func=_cmd_mc_outage)

    p = sub.add_parser("chain", help="energy-state Markov chain and its stationary law")
    common(p)
    p.add_argument("--consume", type=float, default=None,
                   help="consumption rate in W (default: e_tx per message interval)")
    p.set_defaults(func=_cmd_chain)
    return parser


def _fail(exc: BaseException, code: int) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args, argv)
    except InvalidConfig as exc:
        return _fail(exc, 1)
    except OSError as exc:
        return _fail(exc, 3)
    except Exception as exc:
        return _fail(exc, 2)


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
