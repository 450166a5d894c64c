"""Command-line front end: abstract | simulate | validate | plot.

Exit codes: 0 success, 1 bad config or missing artifacts, 2 abstraction
failure, 3 validation violations.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import svg
from .bounds import build_embedding, compute_bounds
from .config import RunConfig, load_config, parse_config
from .errors import AbstractionFailure, ConfigError, HorizonExceededError
from .partition import isotropic_cover, locate_region
from .plant import TraceEvent, simulate_traffic
from .quotient import (TrafficAutomaton, build_quotient, replay_trace,
                       to_timed_automaton)
from .reachability import compute_flow_pipes, transitions

log = logging.getLogger("etcabs")

EXIT_OK, EXIT_CONFIG, EXIT_ABSTRACTION, EXIT_VIOLATION = 0, 1, 2, 3
SIGMA_HINT = ("increase the value of sigma_bar until every certified bound "
              "lies strictly below it")


def _f(v):
    return repr(float(v))


def _write(path: Path, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


@dataclass
class Abstraction:
    partition: object
    tables: object
    tau_prime: float
    bounds: list
    pipes: list
    transitions: object
    automaton: TrafficAutomaton


def run_abstraction(cfg: RunConfig, threads: int = 1) -> Abstraction:
    p = cfg.make_plant()
    ac = cfg.abstraction
    part = isotropic_cover(p.n, ac.m_bar)
    tab = build_embedding(p, ac.sigma_bar, ac.l, ac.N_conv, ac.nu_grid, ac.nu_safety,
                          ac.eps_max_doubling_cap)
    bounds, tau_prime = compute_bounds(p, tab, part, threads)
    pipes = compute_flow_pipes(p, part, bounds, ac.flowpipe_step, threads)
    trans = transitions(part, pipes, threads)
    qs = build_quotient(part, bounds, trans, ac.initial)
    return Abstraction(part, tab, tau_prime, bounds, pipes, trans, to_timed_automaton(qs))


def _bounds_csv(part, bounds):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    n1 = part.n - 1
    head = ["s"]
    for k in range(1, n1 + 1):
        head += [f"theta{k}_lo", f"theta{k}_hi"]
    w.writerow(head + ["tau_lo", "tau_hi", "saturated"])
    for b in bounds:
        row = [b.index]
        for lo, hi in part.region(b.index).angular_box:
            row += [_f(lo), _f(hi)]
        w.writerow(row + [_f(b.tau_lo), _f(b.tau_hi), int(b.saturated)])
    return out.getvalue()


def cmd_abstract(cfg: RunConfig, out: Path, threads: int = 1) -> int:
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    ac = cfg.abstraction
    try:
        res = run_abstraction(cfg, threads)
    except AbstractionFailure as exc:
        _write(out / "metadata.json", _dump({"status": "abstraction-failure",
                                             "message": str(exc)}))
        print(f"abstraction failure: {exc}", file=sys.stderr)
        return EXIT_ABSTRACTION
    saturated = [b.index for b in res.bounds if b.saturated]
    at_limit = [b.index for b in res.bounds if b.tau_lo >= ac.sigma_bar]
    meta = {
        "status": "ok",
        "epsilon": res.automaton.epsilon,
        "epsilon_method": "max over regions of (tau_hi - tau_lo)",
        "q": res.partition.q,
        "n": res.partition.n,
        "tau_prime": res.tau_prime,
        "embedding": res.tables.metadata(),
        "saturated_regions": saturated,
        "lower_at_sigma_bar": at_limit,
        "dead_end_locations": res.automaton.dead_ends,
        "origin_in_pipe_regions": res.transitions.origin_in_pipe,
        "inexact_hull_regions": sorted({s.region for pipe in res.pipes for s in pipe
                                        if not s.exact_hull}),
        "edge_count": len(res.transitions),
        "config": cfg.to_dict(),
    }
    if saturated or at_limit:
        meta["status"] = "abstraction-failure"
        meta["message"] = SIGMA_HINT
        _write(out / "metadata.json", _dump(meta))
        print(f"abstraction failure: bounds reach sigma_bar = {ac.sigma_bar} in regions "
              f"{sorted(set(saturated + at_limit))}; {SIGMA_HINT}", file=sys.stderr)
        return EXIT_ABSTRACTION

    _write(out / "regions.json", res.partition.to_json() + "\n")
    _write(out / "bounds.json", _dump([{
        "s": b.index, "tau_lo": b.tau_lo, "tau_hi": b.tau_hi, "saturated": b.saturated,
        "lower_certificate": b.lower_certificate, "upper_certificate": b.upper_certificate,
    } for b in res.bounds]))
    if "csv" in cfg.output.formats:
        _write(out / "bounds.csv", _bounds_csv(res.partition, res.bounds))
    _write(out / "flowpipes.json", _dump({str(pipe[0].region): [s.to_dict() for s in pipe]
                                          for pipe in res.pipes}))
    _write(out / "automaton.json", res.automaton.to_json() + "\n")
    if "xml" in cfg.output.formats:
        _write(out / "automaton.xml", res.automaton.to_xml(cfg.output.xml_scale))
    _write(out / "metadata.json", _dump(meta))
    # wall time lives apart so the other artifacts stay byte-reproducible
    _write(out / "timing.json", _dump({"wall_time_s": time.perf_counter() - start}))
    print(f"q = {res.partition.q}, edges = {len(res.transitions)}, "
          f"epsilon = {res.automaton.epsilon:.6f}")
    return EXIT_OK


def initial_states(n, count, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((count, n))
    return X / np.linalg.norm(X, axis=1)[:, None]


def cmd_simulate(cfg: RunConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    p = cfg.make_plant()
    part = isotropic_cover(p.n, cfg.abstraction.m_bar)
    sc = cfg.simulation
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trace", "k", "t_k"] + [f"x{i + 1}" for i in range(p.n)] + ["tau_k", "region"])
    summary = []
    for i, x0 in enumerate(initial_states(p.n, sc.trace_count, sc.seed)):
        entry = {"trace": i, "x0": x0.tolist()}
        try:
            tr = simulate_traffic(p, x0, sc.horizon, cfg.abstraction.sigma_bar, sc.scan_dt)
        except HorizonExceededError as exc:
            entry.update(status="horizon-exceeded", message=str(exc), events=0)
            summary.append(entry)
            continue
        for k, ev in enumerate(tr):
            w.writerow([i, k, _f(ev.t)] + [_f(v) for v in ev.x]
                       + [_f(ev.tau), locate_region(part, ev.x)])
        entry.update(status="truncated" if tr.truncated else "ok", events=len(tr))
        summary.append(entry)
    _write(out / "traces.csv", buf.getvalue())
    _write(out / "traces_summary.json", _dump(summary))
    failed = sum(e["status"] == "horizon-exceeded" for e in summary)
    print(f"{len(summary)} traces, {failed} horizon-exceeded")
    return EXIT_OK


def read_traces(path: Path):
    traces = {}
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        xcols = [c for c in rd.fieldnames if c.startswith("x")]
        for row in rd:
            ev = TraceEvent(float(row["t_k"]), np.array([float(row[c]) for c in xcols]),
                            float(row["tau_k"]))
            traces.setdefault(int(row["trace"]), []).append(ev)
    return [traces[k] for k in sorted(traces)]


def _load_automaton(out: Path):
    with open(out / "automaton.json") as fh:
        return TrafficAutomaton.from_dict(json.load(fh))


def cmd_validate(cfg: RunConfig, out: Path) -> int:
    try:
        ta = _load_automaton(out)
        traces = read_traces(out / "traces.csv")
    except FileNotFoundError as exc:
        print(f"missing artifact: {exc.filename}; run abstract and simulate first",
              file=sys.stderr)
        return EXIT_CONFIG
    p = cfg.make_plant()
    part = isotropic_cover(p.n, cfg.abstraction.m_bar)
    if part.q != len(ta.locations):
        print("automaton does not match the configured partition", file=sys.stderr)
        return EXIT_CONFIG
    per_trace, bound_viol, edge_viol = [], 0, 0
    seen = set()
    for i, tr in enumerate(traces):
        regions = [locate_region(part, ev.x) for ev in tr]
        for k, ev in enumerate(tr):
            loc = ta.locations[regions[k] - 1]
            if not loc.tau_lo - 1e-6 <= ev.tau <= loc.tau_hi + 1e-6:
                bound_viol += 1
        for a, b in zip(regions, regions[1:]):
            seen.add((a, b))
            if not ta.has_edge(a, b):
                edge_viol += 1
        r = replay_trace(ta, tr, part)
        per_trace.append({"trace": i, "accepted": r.ok, "failed_step": r.step,
                          "reason": r.reason})
    n_edges = len(ta.edges)
    covered = sum(1 for e in seen if ta.has_edge(*e))
    report = {
        "traces": per_trace,
        "bound_violations": bound_viol,
        "transition_violations": edge_viol,
        "observed_transitions": sorted([list(e) for e in seen]),
        "coverage_ratio": covered / n_edges if n_edges else 0.0,
        "epsilon": ta.epsilon,
    }
    _write(out / "validation.json", _dump(report))
    rejected = sum(not t["accepted"] for t in per_trace)
    print(f"{len(per_trace)} traces, {rejected} rejected, bound violations {bound_viol}, "
          f"transition violations {edge_viol}, coverage {report['coverage_ratio']:.3f}")
    return EXIT_VIOLATION if (bound_viol or edge_viol or rejected) else EXIT_OK


def cmd_plot(cfg: RunConfig, out: Path) -> int:
    try:
        ta = _load_automaton(out)
    except FileNotFoundError as exc:
        print(f"missing artifact: {exc.filename}; run abstract first", file=sys.stderr)
        return EXIT_CONFIG
    p = cfg.make_plant()
    part = isotropic_cover(p.n, cfg.abstraction.m_bar)
    bounds = [_Bound(loc.id, loc.tau_lo, loc.tau_hi) for loc in ta.locations]
    edges = sorted({(e.src, e.dst) for e in ta.edges})
    _write(out / "bounds.svg", svg.bounds_chart(bounds))
    _write(out / "bounds_plot.csv", "s,tau_lo,tau_hi\n" + "".join(
        f"{b.index},{_f(b.tau_lo)},{_f(b.tau_hi)}\n" for b in bounds))
    if part.n == 2:
        _write(out / "polar.svg", svg.polar_chart(part, bounds))
    else:
        print(f"n = {part.n}: polar view skipped")
    _write(out / "transitions.svg", svg.transition_chart(part.q, edges))
    _write(out / "transitions.csv", "src,dst\n" + "".join(f"{s},{t}\n" for s, t in edges))
    if (out / "traces.csv").exists():
        samples = [(locate_region(part, ev.x), ev.tau)
                   for tr in read_traces(out / "traces.csv") for ev in tr]
        _write(out / "scatter.svg", svg.scatter_chart(bounds, samples))
        _write(out / "scatter.csv", "region,tau\n" + "".join(
            f"{s},{_f(t)}\n" for s, t in samples))
    else:
        print("no traces.csv: scatter view skipped")
    return EXIT_OK


@dataclass
class _Bound:
    index: int
    tau_lo: float
    tau_hi: float


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("ETCABS_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise ConfigError("ETCABS_THREADS", f"expected an integer, got {env!r}")


def build_parser():
    ap = argparse.ArgumentParser(prog="etcabs", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["abstract", "simulate", "validate", "plot"])
    ap.add_argument("--config", help="JSON run configuration (defaults built in)")
    ap.add_argument("--out", help="output directory (overrides output.directory)")
    ap.add_argument("--threads", type=int, help="worker processes (env ETCABS_THREADS)")
    ap.add_argument("--seed", type=int, help="overrides simulation.seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config) if args.config else parse_config({})
        if args.seed is not None:
            cfg.simulation.seed = args.seed
        threads = _threads(args.threads)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output.directory)
    if args.command == "abstract":
        return cmd_abstract(cfg, out, threads)
    if args.command == "simulate":
        return cmd_simulate(cfg, out)
    if args.command == "validate":
        return cmd_validate(cfg, out)
    return cmd_plot(cfg, out)


if __name__ == "__main__":
    sys.exit(main())
