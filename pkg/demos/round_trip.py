"""A buyer facing a seller in a drifting random-walk environment trades a round trip.

Runs the ``fig6`` preset (inventories +1e5 and -1e5, b = -1) at the lowest
volatility, once with a negative drift and once with it flipped, and prints
the buyer's mean schedule together with the U-shaped total volume.
"""

from dataclasses import replace

from impact_game import preset, run_scenario
from impact_game.scenarios import apply_point


def schedule(scenario):
    point, flat = next(iter(scenario.grid()))
    return point, run_scenario(replace(flat, sweep=()))[0].summary


def main():
    base = preset("fig6")
    T = base.market.T
    for drift in (-0.5, 0.5):
        point, s = schedule(apply_point(base, {"env.a": drift}))
        print(f"drift a = {drift:+.1f}, sigma = {point['env.sigma']}")
        print("  t      buyer q     seller q   total volume")
        for t in range(T):
            print(f"  {t + 1:<3d} {s.mean[t, 0]:10.0f}  {s.mean[t, 1]:10.0f}  {s.total_volume[t]:12.0f}")
        tv = s.total_volume
        print(f"  buyer sells first: {s.mean[0, 0] < 0}; U-shaped volume: {min(tv[0], tv[-1]) > tv.min()}")
        print()


if __name__ == "__main__":
    main()
