"""Print analysis (and optionally simulation) columns next to the published tables.

    python3 scripts/reproduce_tables.py [--sim] [--seeds 30] [--duration 200]
"""
import argparse
from pathlib import Path

from wlantcp.cli import analyze, simulate
from wlantcp.scenario import load_scenario

ROOT = Path(__file__).resolve().parents[1]

PUBLISHED = {
    "n_ap": [297.9, 295.2, 292.5, 289.8, 287.0, 284.3, 281.5, 278.7, 276.6],
    "n_rtpd": [2.58, 4.27, 7.16, 10.72, 13.18, 16.15, 18.26, 20.13, 23.59],
    "t_h": [274.8, 271.5, 271.1, 269.5, 268.1, 270.8, 268.5, 267.2, 263.4],
}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--scenario", default=str(ROOT / "scenarios" / "mixed5.json"))
    ap.add_argument("--sim", action="store_true", help="also run the simulator")
    ap.add_argument("--seeds", type=int, default=30)
    ap.add_argument("--duration", type=float, default=None)
    args = ap.parse_args()

    scn = load_scenario(args.scenario)
    pts, tail = analyze(scn)
    sims = {}
    if args.sim:
        if args.duration is not None:
            from dataclasses import replace
            scn = replace(scn, duration=args.duration, warmup=min(scn.warmup, args.duration / 10))
        sims = dict(simulate(scn, list(range(1, args.seeds + 1))))

    print(f"WLAN service rates: tail mass {tail:.2e}")
    for key, label in [("n_ap", "AP queue"), ("n_rtpd", "in flight"), ("t_h", "AP throughput")]:
        print(f"\n{label}")
        print(f"{'rtpd':>6} {'published':>10} {'ours':>10} {'diff%':>7}" + (f" {'sim':>10}" if sims else ""))
        for i, p in enumerate(pts):
            ours = getattr(p, key)
            pub = PUBLISHED[key][i] if i < len(PUBLISHED[key]) else float("nan")
            line = f"{p.rtpd_ms:6g} {pub:10.2f} {ours:10.2f} {100 * (ours - pub) / pub:+7.2f}"
            if sims:
                attr = {"n_ap": "ap_queue_mean", "n_rtpd": "inflight_mean", "t_h": "ap_throughput"}[key]
                line += f" {sims[p.rtpd_ms].metric(attr).mean:10.2f}"
            print(line)


if __name__ == "__main__":
    main()
