"""Command-line entry point: prepare | compile | analyze | estimate | simulate.

Exit status: 0 clean, 1 findings or failures, 2 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional

from . import config as config_mod
from .analyzer import analyze, build_state_machine, export_dot
from .ir import IrParseError, compile_ruleset, parse
from .model import PathInfo
from .protocol import HandshakeSim, ProtocolConfig, ledgers_for
from .ruleset import RuleSetError, generate_rulesets
from .sim.physics import ZeroRate, estimate_execution_time
from .sim.sweep import format_table, sweep

EXIT_OK, EXIT_FINDINGS, EXIT_USAGE = 0, 1, 2


def _int_list(text: str) -> list:
    """``0,1,5`` or ``0-19`` (inclusive) or a mix."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    return out


def _float_list(text: str) -> list:
    return [float(p) for p in text.split(",") if p.strip()]


def _load_config(args) -> config_mod.ScenarioConfig:
    if args.config is None:
        return config_mod.ScenarioConfig()
    return config_mod.load(args.config)


def _out_dir(args, cfg) -> Path:
    return Path(args.out if args.out else cfg.output.dir)


def cmd_prepare(args) -> int:
    cfg = _load_config(args)
    req = cfg.build_request()
    topo = cfg.build_topology()
    p = cfg.protocol
    ledgers = ledgers_for(topo, p.tbe_fraction, p.cap_fraction)
    pconf = ProtocolConfig(c_fiber=cfg.simulation.c_fiber, estimate_time=p.estimate_time,
                           decision_allowance=p.decision_allowance, decision_time=p.decision_time)
    sim = HandshakeSim(topo, ledgers, pconf)
    cid = sim.submit(req, p.decision, amounts=p.amounts)
    prep = sim.run()[cid]
    text = "\n".join(sim.trace) + "\n"
    text += f"outcome {prep.outcome}" + (f" ({prep.reason})" if prep.reason else "") + "\n"
    text += sim.ledger_text()
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "handshake.txt").write_text(text)
    return EXIT_FINDINGS if sim.violations else EXIT_OK


def cmd_compile(args) -> int:
    cfg = _load_config(args)
    req = cfg.build_request()
    topo = cfg.build_topology()
    rulesets = generate_rulesets(req, PathInfo.from_topology(topo))
    files = {}
    for owner, rs in rulesets.items():
        files[f"{owner}.ruleset.json"] = rs.dumps()
        for rule, prog in zip(rs.rules, compile_ruleset(rs)):
            files[f"{owner}_rule{rule.index}_{rule.name}.qir"] = prog.serialize()
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(files.items()):
        (out / name).write_text(text)
        print(out / name)
    return EXIT_OK


def cmd_analyze(args) -> int:
    status = EXIT_OK
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    for name in args.paths:
        path = Path(name)
        try:
            prog = parse(path.read_text())
        except OSError as exc:
            print(f"{path}: error: {exc.strerror}")
            status = EXIT_FINDINGS
            continue
        except IrParseError as exc:
            print(f"{path}: parse error: {exc}")
            status = EXIT_FINDINGS
            continue
        report = analyze(prog)
        verdict = "pass" if report.passed else "FAIL"
        print(f"{path}: {verdict}")
        if not report.passed:
            status = EXIT_FINDINGS
            for leak in report.qubit_leaks:
                print(f"  leak {leak.qubit} at {leak.ret_state} via {' '.join(leak.witness)}")
            for key in ("unreachable_states", "nonterminating_states", "branch_gaps", "uninitialized_reads"):
                items = getattr(report, key)
                if items:
                    print(f"  {key}: {', '.join(items)}")
        if out:
            stem = path.stem
            (out / f"{stem}.report.json").write_text(report.to_text())
            (out / f"{stem}.dot").write_text(export_dot(build_state_machine(prog), stem))
    return status


def cmd_estimate(args) -> int:
    cfg = _load_config(args)
    req = cfg.build_request()
    distances = args.sweep if args.sweep else [None]
    results = []
    for d in distances:
        topo = cfg.build_topology(d)
        try:
            est = estimate_execution_time(req, topo, cfg.link_models(topo), timing=cfg.timing(),
                                          model=cfg.model_override())
        except ZeroRate as exc:
            results.append({"distance_km": topo.total_km, "error": str(exc)})
            continue
        results.append({"distance_km": topo.total_km, **est.to_dict()})
    text = json.dumps(results if args.sweep else results[0], indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "estimate.json").write_text(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    req = cfg.build_request()
    seeds = args.seed if args.seed is not None else list(cfg.simulation.seeds)
    distances = args.sweep if args.sweep else list(cfg.simulation.sweep_km)
    rows = sweep(req, cfg.build_topology, distances, seeds, cfg.link_models, cfg.sim_config(),
                 cfg.model_override(), cfg.simulation.max_estimated_time)
    text = format_table(rows)
    sys.stdout.write(text)
    out = _out_dir(args, cfg) if (args.out or args.config) else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.txt").write_text(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qruleset", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="scenario YAML file")
        p.add_argument("--out", help="output directory")
        return p

    common(sub.add_parser("prepare", help="run the preparation handshake")).set_defaults(func=cmd_prepare)
    common(sub.add_parser("compile", help="write IR files for every rule")).set_defaults(func=cmd_compile)
    p = common(sub.add_parser("analyze", help="statically check IR files"), config=False)
    p.add_argument("paths", nargs="+")
    p.set_defaults(func=cmd_analyze)
    p = common(sub.add_parser("estimate", help="server-side execution time estimate"))
    p.add_argument("--sweep", type=_float_list, help="comma separated end-to-end distances (km)")
    p.set_defaults(func=cmd_estimate)
    p = common(sub.add_parser("simulate", help="estimate vs simulation table"))
    p.add_argument("--seed", type=_int_list, help="seed list, e.g. 0-19 or 1,2,3")
    p.add_argument("--sweep", type=_float_list, help="comma separated end-to-end distances (km)")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (config_mod.ConfigError, RuleSetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
