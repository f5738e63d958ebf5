"""Write the synthetic anomaly map used by configs/survey.cfg."""
import argparse
from pathlib import Path

from magcomp.map_tools import save_map
from magcomp.simulator import synthetic_anomaly_map


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default=str(Path(__file__).parent / "configs" / "map.txt"))
    p.add_argument("--amplitude", type=float, default=300.0, help="source amplitude (nT)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alt", type=float, default=3000.0,
                   help="map altitude (m); the simulator samples the map as given")
    args = p.parse_args()
    save_map(synthetic_anomaly_map(amplitude_nT=args.amplitude, seed=args.seed,
                                   alt_m=args.alt), args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
