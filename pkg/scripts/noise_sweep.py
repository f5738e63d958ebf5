"""Compensation residual versus scalar noise level, averaged over seeds."""
import argparse

import numpy as np

from magcomp.evaluation import rmse, rmse_detrended
from magcomp.simulator import NoiseSpec, SimConfig, simulate_flight
from magcomp.tolles_lawson import compensate, fit_coefficients


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 0.01, 0.1, 0.5, 1.0])
    p.add_argument("--seeds", type=int, default=20)
    args = p.parse_args()

    print(f"{'sigma_nT':>9} {'rmse_nT':>10} {'detrended_nT':>13} {'max|dtheta|':>12}")
    for sigma in args.sigmas:
        plain, detr, dtheta = [], [], []
        for seed in range(args.seeds):
            cfg = SimConfig(noise=NoiseSpec(sigma, 0.0), seed=seed)
            fr, tr = simulate_flight(cfg)
            c = fit_coefficients(fr["UNCOMPMAG1"], *fr.flux("B"))
            comp = compensate(c, fr["UNCOMPMAG1"], *fr.flux("B"))
            plain.append(rmse(comp, tr.H_et_true))
            detr.append(rmse_detrended(comp, tr.H_et_true))
            dtheta.append(np.max(np.abs(c.theta - cfg.theta_true)))
        print(f"{sigma:9.3f} {np.mean(plain):10.4f} {np.mean(detr):13.4f} "
              f"{np.mean(dtheta):12.4g}")


if __name__ == "__main__":
    main()
