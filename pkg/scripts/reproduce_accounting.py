#!/usr/bin/env python3
"""Regenerate the per-split accounting table and the beta-sweep curves.

Writes split_accounting.csv (FLOPs/params per side with proportions) and
beta_sweep.csv (normalized compute for the early/mid/late splits over a log
beta grid), and prints both to stdout.
"""

import argparse
from pathlib import Path

import numpy as np

import splitwire as sw
from splitwire.accounting import conv_weight_params
from splitwire.cost import beta_sweep


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-c", type=int, default=1024)
    parser.add_argument("--stages", type=int, choices=(1, 2), default=2)
    parser.add_argument("--output-dir", type=Path, default=Path("results"))
    args = parser.parse_args()

    graph = sw.build_resnet(34, "cifar", 100)
    args.output_dir.mkdir(parents=True, exist_ok=True)

    lines = ["split,flops_t_m,prop_t,params_t_m,flops_r_m,prop_r,params_r_m"]
    print(f"{'split':6} {'FLOPs_t(M)':>11} {'%':>6} {'Param_t(M)':>11} {'FLOPs_r(M)':>11} {'%':>6} {'Param_r(M)':>11}")
    for sp in sw.INNER_SPLIT_POINTS:
        model = sw.apply_split(graph, sp, args.n_c, args.stages)
        fl, pa = sw.count_flops(model), sw.count_params(model)
        p_t = conv_weight_params(pa.per_tensor_t) / 1e6
        p_r = conv_weight_params(pa.per_tensor_r) / 1e6
        row = (sp.key, fl.f_m_t / 1e6, fl.proportion_t, p_t, fl.f_m_r / 1e6, fl.proportion_r, p_r)
        print(f"{row[0]:6} {row[1]:>11.2f} {row[2]:>6.2f} {row[3]:>11.3f} {row[4]:>11.2f} {row[5]:>6.2f} {row[6]:>11.3f}")
        lines.append(f"{row[0]},{row[1]:.2f},{row[2]:.2f},{row[3]:.3f},{row[4]:.2f},{row[5]:.2f},{row[6]:.3f}")
    (args.output_dir / "split_accounting.csv").write_text("\n".join(lines) + "\n")

    grid = np.logspace(-5, 0, 26)
    lines = ["beta,split,normalized_tcomp"]
    for sp in ("SP-2", "SP-3", "SP-4"):
        report = sw.count_flops(sw.apply_split(graph, sp, args.n_c, args.stages))
        for beta, value in beta_sweep(report, grid):
            lines.append(f"{beta:.10g},{sp},{value:.10g}")
    (args.output_dir / "beta_sweep.csv").write_text("\n".join(lines) + "\n")
    print(f"\nwrote {args.output_dir / 'split_accounting.csv'} and {args.output_dir / 'beta_sweep.csv'}")


if __name__ == "__main__":
    main()
