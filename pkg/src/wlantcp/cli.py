"""Command-line front end.

    python -m wlantcp analyze|simulate|compare|plotdata --scenario FILE [options]

Exit codes: 0 success, 2 usage or scenario error, 3 numerical failure.
Set ``WLANTCP_WORKERS`` to run simulation seeds in parallel processes.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .bcmp import build_network, solve_mva, solve_mva_approx
from .chain import wlan_throughputs
from .errors import InvalidParameterError, LatticeBudgetError, NumericalFailureError
from .scenario import Scenario, ScenarioError, load_scenario
from .sim import SimConfig, Summary, run_batch

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.4g}"


def rate_labels(scn: Scenario) -> list[str]:
    return [f"{c.rate / 1e6:g}" for c in scn.classes.classes if c.count > 0]


@dataclass
class AnalysisPoint:
    rtpd_ms: float
    phi_ap: float
    phi_sta: list[float]
    n_ap: float
    n_sta: list[float]  # per STA, by class
    n_rtpd: float
    t_h: float
    class_throughput: list[float]
    approximate: bool


def analyze(scn: Scenario, n_max: int | None = None, approx: bool | None = None):
    """Run the WLAN model once and the closed network at every RTPD point.

    Returns ``(points, tail_bound)``.
    """
    n_max = scn.n_max if n_max is None else n_max
    approx = (scn.mva == "approx") if approx is None else approx
    thr = wlan_throughputs(scn.classes, scn.params, n_max)
    active = [j for j, c in enumerate(scn.classes.classes) if c.count > 0]
    points = []
    for ms, sec in zip(scn.rtpd_ms, scn.rtpd):
        net = build_network(scn.classes, thr, scn.w_conn, sec)
        res = solve_mva_approx(net) if approx else solve_mva(net)
        points.append(AnalysisPoint(
            rtpd_ms=ms,
            phi_ap=thr.phi_ap,
            phi_sta=[float(thr.phi_sta[j]) for j in active],
            n_ap=res.n_ap,
            n_sta=res.n_sta_by_class().tolist(),
            n_rtpd=res.n_rtpd,
            t_h=res.t_h,
            class_throughput=res.lam.tolist(),
            approximate=res.approximate,
        ))
    return points, thr.tail_bound


def simulate(scn: Scenario, seeds=None):
    seeds = scn.seeds if seeds is None else seeds
    out = []
    for ms, sec in zip(scn.rtpd_ms, scn.rtpd):
        cfg = SimConfig(scn.classes, scn.params, scn.w_conn, sec, scn.duration, scn.warmup)
        out.append((ms, run_batch(cfg, seeds)))
    return out


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerows(rows)
    return buf.getvalue()


def analysis_table(scn: Scenario, points, tail_bound: float) -> str:
    labels = rate_labels(scn)
    header = (["rtpd_ms", "phi_ap"] + [f"phi_sta_{r}" for r in labels] + ["n_ap"]
              + [f"n_sta_{r}" for r in labels] + ["n_rtpd", "t_h"])
    rows = [header]
    for p in points:
        rows.append([fmt(p.rtpd_ms), fmt(p.phi_ap), *map(fmt, p.phi_sta), fmt(p.n_ap),
                     *map(fmt, p.n_sta), fmt(p.n_rtpd), fmt(p.t_h)])
    text = _csv(rows)
    if tail_bound > scn.tail_tolerance:
        text += f"# warning: stationary tail mass {tail_bound:.3g} exceeds {scn.tail_tolerance:.3g}; raise --nmax\r\n"
    return text


SIM_METRICS = {"ap_queue": "ap_queue_mean", "inflight": "inflight_mean",
               "ap_throughput": "ap_throughput", "collision_fraction": "collision_fraction"}


def _summaries(scn: Scenario, batch) -> dict[str, Summary]:
    out = {name: batch.metric(attr) for name, attr in SIM_METRICS.items()}
    for r, s in zip(rate_labels(scn), batch.per_class("sta_queue_by_class")):
        out[f"sta_queue_{r}"] = s
    for r, s in zip(rate_labels(scn), batch.per_class("sta_throughput")):
        out[f"sta_throughput_{r}"] = s
    return out


def simulation_table(scn: Scenario, results) -> str:
    rows = []
    for ms, batch in results:
        summ = _summaries(scn, batch)
        if not rows:
            header = ["rtpd_ms", "runs"]
            for name in summ:
                header += [f"{name}_{s}" for s in ("mean", "max", "min", "ci95")]
            rows.append(header)
        row = [fmt(ms), str(len(batch.runs))]
        for s in summ.values():
            row += [fmt(s.mean), fmt(s.max), fmt(s.min), fmt(s.ci)]
        rows.append(row)
    return _csv(rows)


def comparison_pairs(scn: Scenario, points, results):
    """Join analysis and simulation by RTPD; only points present in both grids are paired."""
    labels = rate_labels(scn)
    sim_by = {ms: _summaries(scn, b) for ms, b in results} if results is not None else {}
    out = []
    for p in points:
        ana = {"ap_queue": p.n_ap, "inflight": p.n_rtpd, "ap_throughput": p.t_h}
        for r, q, lam in zip(labels, p.n_sta, p.class_throughput):
            ana[f"sta_queue_{r}"] = q
            ana[f"sta_throughput_{r}"] = lam
        if results is None:
            out += [(p.rtpd_ms, m, v, None) for m, v in ana.items()]
        elif p.rtpd_ms in sim_by:
            s = sim_by[p.rtpd_ms]
            out += [(p.rtpd_ms, m, v, s[m].mean) for m, v in ana.items()]
    return out


def rel_error_pct(analysis: float, simulation: float) -> float:
    if analysis == 0:
        return 0.0 if simulation == 0 else math.inf
    return 100.0 * (simulation - analysis) / analysis


def comparison_table(pairs, threshold: float) -> str:
    rows = [["rtpd_ms", "metric", "analysis", "simulation", "rel_error_pct", "flag"]]
    for ms, metric, a, s in pairs:
        if s is None:
            rows.append([fmt(ms), metric, fmt(a), "", "", "no-sim"])
            continue
        err = rel_error_pct(a, s)
        flag = "FLAG" if abs(err) >= threshold else "ok"
        rows.append([fmt(ms), metric, fmt(a), fmt(s), fmt(err), flag])
    return _csv(rows)


def _parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"--seeds: expected comma-separated integers, got {text!r}") from exc
    if not seeds:
        raise UsageError("--seeds: empty list")
    return seeds


def _emit(files: dict[str, str], out: str | None, overwrite: bool):
    if out is None:
        for text in files.values():
            sys.stdout.write(text)
        return
    outdir = Path(out)
    targets = {outdir / name: text for name, text in files.items()}
    clash = [str(p) for p in targets if p.exists()]
    if clash and not overwrite:
        raise UsageError(f"refusing to overwrite {', '.join(clash)} (pass --overwrite)")
    outdir.mkdir(parents=True, exist_ok=True)
    for p, text in targets.items():
        p.write_bytes(text.encode())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="wlantcp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in [("analyze", "analytical sweep over RTPD"),
                        ("simulate", "discrete-event simulation sweep"),
                        ("compare", "analysis vs simulation with relative errors"),
                        ("plotdata", "throughput-vs-RTPD series for plotting")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", help="output directory (default: stdout; plotdata: current directory)")
        p.add_argument("--seeds", help="comma-separated simulation seeds, overrides the scenario")
        p.add_argument("--threshold", type=float, default=5.0, help="flag threshold in percent (compare)")
        p.add_argument("--nmax", type=int, help="chain truncation level")
        p.add_argument("--approx-mva", action="store_true", help="use the Schweitzer approximation")
        p.add_argument("--no-sim", action="store_true", help="skip simulation (compare, plotdata)")
        p.add_argument("--overwrite", action="store_true", help="replace existing output files")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scn = load_scenario(args.scenario)
        if args.nmax is not None and args.nmax < 1:
            raise UsageError("--nmax must be >= 1")
        if args.threshold < 0:
            raise UsageError("--threshold must be >= 0")
        seeds = _parse_seeds(args.seeds) if args.seeds else None
        approx = True if args.approx_mva else None
        use_sim = scn.sim_enabled and not args.no_sim
        cmd = args.command
        if cmd == "analyze":
            pts, tail = analyze(scn, args.nmax, approx)
            _emit({"analyze.csv": analysis_table(scn, pts, tail)}, args.out, args.overwrite)
        elif cmd == "simulate":
            _emit({"simulate.csv": simulation_table(scn, simulate(scn, seeds))}, args.out, args.overwrite)
        elif cmd == "compare":
            pts, _ = analyze(scn, args.nmax, approx)
            results = simulate(scn, seeds) if use_sim else None
            pairs = comparison_pairs(scn, pts, results)
            _emit({"compare.csv": comparison_table(pairs, args.threshold)}, args.out, args.overwrite)
        elif cmd == "plotdata":
            pts, _ = analyze(scn, args.nmax, approx)
            files = {"plot_analysis.csv": _csv([["rtpd_ms", "throughput"]]
                                               + [[fmt(p.rtpd_ms), fmt(p.t_h)] for p in pts])}
            if use_sim:
                res = simulate(scn, seeds)
                files["plot_simulation.csv"] = _csv(
                    [["rtpd_ms", "throughput"]]
                    + [[fmt(ms), fmt(b.metric("ap_throughput").mean)] for ms, b in res])
            _emit(files, args.out or ".", args.overwrite)
    except (ScenarioError, UsageError) as exc:
        print(f"wlantcp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LatticeBudgetError as exc:
        print(f"wlantcp: numerical failure: {exc} (try --approx-mva)", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericalFailureError as exc:
        print(f"wlantcp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InvalidParameterError as exc:
        print(f"wlantcp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
