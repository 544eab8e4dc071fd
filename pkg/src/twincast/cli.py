"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 infeasible instance or a
failed verification.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import qlearn
from .domain import ConfigError, SystemConfig, dumps_config, load_config
from .sim import (CSV_HEADER, SCHEMES, ReservationEnv, Scenario, init_state, metrics_to_csv,
                  metrics_to_json, run_episode, summarize)
from .solver import (ConvexTerm, Instance, InfeasibleReservation, SearchSpaceTooLarge,
                     Subproblem, branch_and_bound, exhaustive_oracle, fs_schedule,
                     random_instance)
from .udt import dump_twins
from .utility import unit_capacity

log = logging.getLogger("twincast")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------- instance files

_GROUP_KEYS = ("xi", "vartheta", "ell", "R", "O", "m_prev", "n_prev")
_INSTANCE_DEFAULTS = {"B": 2e6, "omega": 2e9, "varpi1": 0.5, "varpi2": 0.5, "varpi3": 0.7,
                      "varpi4": 1.0, "delta1": 1.5, "delta2": 0.3, "delta3": 0.3}


def parse_instance(text: str) -> Instance:
    """INI text: ``[instance]`` with M, N and optional B, omega, weights; one ``[group.N]`` per group."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(f"malformed instance file: {exc.message.splitlines()[0]}") from None
    if "instance" not in cp:
        raise UsageError("instance file: missing section [instance]")
    head = cp["instance"]

    def number(section, key, kind=float):
        if key not in section:
            raise UsageError(f"instance file: missing key {key!r} in [{section.name}]")
        try:
            return kind(section[key])
        except ValueError:
            raise UsageError(f"instance file: key {key!r} in [{section.name}] "
                             f"is not a valid {kind.__name__}: {section[key]!r}") from None

    known = {"M", "N", *_INSTANCE_DEFAULTS}
    for key in head:
        if key not in known:
            raise UsageError(f"instance file: unknown key {key!r} in [instance]")
    M, N = number(head, "M", int), number(head, "N", int)
    p = {k: number(head, k) if k in head else v for k, v in _INSTANCE_DEFAULTS.items()}
    names = sorted((s for s in cp.sections() if s.startswith("group.")),
                   key=lambda s: int(s.split(".", 1)[1]) if s.split(".", 1)[1].isdigit() else -1)
    m_terms, n_terms, m_prev, n_prev = [], [], [], []
    for name in names:
        sec = cp[name]
        for key in sec:
            if key not in _GROUP_KEYS:
                raise UsageError(f"instance file: unknown key {key!r} in [{name}]")
        g = {k: number(sec, k, int if k.endswith("_prev") else float) for k in _GROUP_KEYS}
        try:
            m_terms.append(ConvexTerm("bandwidth", g["xi"], unit_capacity(p["B"], g["ell"]), g["R"]))
            n_terms.append(ConvexTerm("vm", g["vartheta"], p["omega"], g["O"]))
        except ValueError as exc:
            raise UsageError(f"instance file: [{name}]: {exc}") from None
        m_prev.append(g["m_prev"])
        n_prev.append(g["n_prev"])
    deltas = (p["delta1"], p["delta2"], p["delta3"])
    try:
        return Instance(Subproblem(tuple(m_terms), tuple(m_prev), M, p["varpi1"], p["varpi3"], deltas),
                        Subproblem(tuple(n_terms), tuple(n_prev), N, p["varpi2"], p["varpi4"], deltas))
    except ValueError as exc:
        raise UsageError(f"instance file: {exc}") from None


def format_instance(inst: Instance, B: float = 1.0) -> str:
    """Inverse of ``parse_instance`` for generated instances (ell chosen to match each capacity)."""
    bw, vm = inst.bandwidth, inst.vm
    lines = ["[instance]", f"M = {bw.budget}", f"N = {vm.budget}", f"B = {B!r}",
             f"varpi1 = {bw.varpi_op!r}", f"varpi3 = {bw.varpi_rec!r}",
             f"varpi2 = {vm.varpi_op!r}", f"varpi4 = {vm.varpi_rec!r}",
             f"delta1 = {bw.deltas[0]!r}", f"delta2 = {bw.deltas[1]!r}", f"delta3 = {bw.deltas[2]!r}"]
    omegas = {t.cap for t in vm.terms}
    if len(omegas) > 1:
        raise ValueError("instance files carry a single omega")
    if omegas:
        lines.append(f"omega = {omegas.pop()!r}")
    for g, (tm, tn) in enumerate(zip(bw.terms, vm.terms)):
        ell = 2.0 ** (tm.cap / B) - 1.0
        lines += ["", f"[group.{g}]", f"xi = {tm.sensitivity!r}", f"vartheta = {tn.sensitivity!r}",
                  f"ell = {ell!r}", f"R = {tm.demand!r}", f"O = {tn.demand!r}",
                  f"m_prev = {bw.prev[g]}", f"n_prev = {vm.prev[g]}"]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- helpers

def _config(args) -> SystemConfig:
    cfg = SystemConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"--config: no such file {args.config}")
        try:
            cfg = load_config(path)
        except ConfigError as exc:
            raise UsageError(f"{args.config}: {exc}") from None
    if getattr(args, "demand_mode", None):
        cfg = replace(cfg, demand_mode=args.demand_mode)
    return cfg


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _agent(args):
    if not getattr(args, "agent_weights", None):
        return None
    try:
        net, _ = qlearn.load_weights(args.agent_weights)
    except (OSError, ValueError) as exc:
        raise UsageError(f"--agent-weights: {exc}") from None
    return net


def _fmt_vec(v) -> str:
    return "(" + ",".join(str(x) for x in v) + ")"


# ---------------------------------------------------------------- commands

def cmd_gen(args) -> int:
    cfg = _config(args)
    _write(args.out, dumps_config(cfg))
    if args.instance:
        inst = random_instance(np.random.default_rng(args.seed), args.groups, cfg.M, cfg.N)
        _write(args.instance, format_instance(inst))
    if args.twins:
        state = init_state(Scenario(seed=args.seed), cfg)
        _write(args.twins, dump_twins(state.twins))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    scenario = Scenario(windows=args.windows, scheme=args.scheme, seed=args.seed)
    rows = run_episode(scenario, cfg, _agent(args), timing=args.timing)
    for r in rows:
        log.info("window %d: lambda=%d utility=%.4f", r.window, r.lambda_star, r.utility)
    _write(args.out, metrics_to_json(rows) if args.format == "json" else metrics_to_csv(rows))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    acfg = qlearn.AgentConfig(episodes=args.episodes, episode_len=args.episode_len)
    rng = np.random.default_rng(args.seed)
    if args.env == "bandit":
        env = qlearn.ContextualBandit(n_actions=cfg.max_clusters, seed=args.seed)
        n_inputs = env.dim
    else:
        env = ReservationEnv(cfg, Scenario(windows=args.episode_len, seed=args.seed))
        n_inputs = env.n_inputs
    agent = qlearn.Agent(n_inputs, cfg.max_clusters, acfg, rng=np.random.default_rng(args.seed),
                         seed=args.seed)
    curve = qlearn.train(env, agent, rng)
    qlearn.save_weights(agent.main, args.out, seed=args.seed, steps=agent.steps)
    text = "episode,mean_reward\n" + "".join(f"{i + 1},{r:.10g}\n" for i, r in enumerate(curve))
    _write(args.curve, text)
    return EXIT_OK


_METHODS = {"fs": fs_schedule, "bnb": branch_and_bound, "oracle": exhaustive_oracle}


def cmd_solve(args) -> int:
    path = Path(args.instance)
    if not path.is_file():
        raise UsageError(f"--instance: no such file {args.instance}")
    inst = parse_instance(path.read_text(encoding="utf-8"))
    try:
        dec = _METHODS[args.method](inst)
    except InfeasibleReservation as exc:
        print(f"infeasible: bandwidth deficit {exc.deficit_m}, VM deficit {exc.deficit_n}")
        return EXIT_FAIL
    except SearchSpaceTooLarge as exc:
        print(f"oracle refused: {exc}")
        return EXIT_FAIL
    print(f"m={_fmt_vec(dec.m)}")
    print(f"n={_fmt_vec(dec.n)}")
    print(f"objective={dec.stats['objective']:.12g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    schemes = args.schemes.split(",")
    for s in schemes:
        if s not in SCHEMES:
            raise UsageError(f"--schemes: unknown scheme {s!r}")
    agent = _agent(args)
    cols = CSV_HEADER.split(",")[2:]
    lines = ["scheme," + ",".join(f"{c}_mean,{c}_std" for c in cols)]
    for scheme in schemes:
        rows = []
        for k in range(args.seeds):
            scen = Scenario(windows=args.windows, scheme=scheme, seed=args.seed + k)
            rows += run_episode(scen, cfg, agent, timing=not args.no_timing)
        stats = summarize(rows)
        lines.append(scheme + "," + ",".join(f"{stats[c][0]:.10g},{stats[c][1]:.10g}" for c in cols))
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    failures = 0
    for i in range(args.instances):
        inst = random_instance(rng)
        ref = exhaustive_oracle(inst).stats["objective"]
        fs = fs_schedule(inst).stats["objective"]
        bb = branch_and_bound(inst).stats["objective"]
        if abs(fs - ref) > 1e-9 or abs(bb - ref) > 1e-9:
            failures += 1
            log.error("instance %d: oracle %.12g fs %.12g bnb %.12g", i, ref, fs, bb)
    print(f"{args.instances - failures}/{args.instances} instances agree")
    return EXIT_OK if failures == 0 else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="twincast", description="Twin-assisted multicast short-video reservation")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    def common(sp, demand=True):
        sp.add_argument("--config", help="system config file (key = value lines)")
        sp.add_argument("--seed", type=int, default=0)
        if demand:
            sp.add_argument("--demand-mode", choices=("literal", "dimensional"))

    g = sub.add_parser("gen", help="write a config file, optionally an instance and a twin snapshot")
    common(g)
    g.add_argument("--out", default="-")
    g.add_argument("--instance", help="also write a random solver instance here")
    g.add_argument("--groups", type=int, default=4)
    g.add_argument("--twins", help="also write the bootstrapped twin pool here")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="simulate one episode and export per-window metrics")
    common(r)
    r.add_argument("--scheme", choices=SCHEMES, default="proposed")
    r.add_argument("--windows", type=int, default=90)
    r.add_argument("--out", default="-")
    r.add_argument("--format", choices=("csv", "json"), default="csv")
    r.add_argument("--agent-weights")
    r.add_argument("--timing", action="store_true",
                   help="record wall-clock runtime_ms (output is then not reproducible)")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("train", help="train the group-count agent")
    common(t)
    t.add_argument("--env", choices=("sim", "bandit"), default="sim")
    t.add_argument("--episodes", type=int, default=300)
    t.add_argument("--episode-len", type=int, default=90)
    t.add_argument("--out", required=True, help="weights file")
    t.add_argument("--curve", default="-", help="training curve CSV")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="solve one reservation instance file")
    s.add_argument("--instance", required=True)
    s.add_argument("--method", choices=tuple(_METHODS), default="fs")
    s.set_defaults(func=cmd_solve)

    b = sub.add_parser("bench", help="summary statistics per scheme over several seeds")
    common(b)
    b.add_argument("--schemes", default=",".join(SCHEMES))
    b.add_argument("--seeds", type=int, default=10)
    b.add_argument("--windows", type=int, default=90)
    b.add_argument("--out", default="-")
    b.add_argument("--agent-weights")
    b.add_argument("--no-timing", action="store_true")
    b.set_defaults(func=cmd_bench)

    o = sub.add_parser("oracle-check", help="compare FS and branch and bound against enumeration")
    o.add_argument("--instances", type=int, default=200)
    o.add_argument("--seed", type=int, default=0)
    o.set_defaults(func=cmd_oracle_check)
    return p


def _setup_logging() -> None:
    level = os.environ.get("TWINCAST_LOG", "error").upper()
    if level not in ("ERROR", "INFO", "DEBUG"):
        level = "ERROR"
    logging.basicConfig(level=getattr(logging, level), format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)


def execute(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "windows", 1) < 1:
            raise UsageError("--windows: must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"twincast: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(execute())


if __name__ == "__main__":
    main()
