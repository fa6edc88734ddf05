"""Throughput and AP backlog against RTPD for several TCP window sizes (analysis only).

    python3 scripts/window_sweep.py --windows 20 40 60 --rtpd 0 200 20
"""
import argparse

import numpy as np

from wlantcp import RateClassConfig, build_network, solve_mva, wlan_throughputs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--windows", type=int, nargs="+", default=[20, 40, 60])
    ap.add_argument("--rtpd", type=float, nargs=3, default=[10, 90, 10], metavar=("START", "STOP", "STEP"))
    args = ap.parse_args()

    cfg = RateClassConfig.from_counts([5.5e6, 11e6], [2, 3])
    thr = wlan_throughputs(cfg)
    grid = np.arange(args.rtpd[0], args.rtpd[1] + 1e-9, args.rtpd[2])
    print("w_conn,rtpd_ms,t_h,n_ap,n_rtpd")
    for w in args.windows:
        for ms in grid:
            r = solve_mva(build_network(cfg, thr, w, ms / 1000))
            print(f"{w},{ms:g},{r.t_h:.4g},{r.n_ap:.4g},{r.n_rtpd:.4g}")


if __name__ == "__main__":
    main()
