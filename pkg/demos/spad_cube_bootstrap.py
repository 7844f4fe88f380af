"""Binned bootstrap on a synthetic timestamp cube.

A fan-shaped scene is rendered with secondary returns and dark-count spikes,
saved in the cube format, then cleaned and re-binned by the CLI. Each bin
size reports simulated and predicted MSE against the pseudo ground truth.
"""

from _common import OUT, run

from photon_limits.spaddata import make_fan_cube, save_cube

OUT.mkdir(exist_ok=True)
cube, _ = make_fan_cube(size=32, frames=1000, sigma_t=0.5, signal_fraction=0.5, secondary_fraction=0.1, spike_fraction=0.1, rng=0)
save_cube(cube, OUT / "fan_cube.txt")
run("bootstrap", "--cube", str(OUT / "fan_cube.txt"), "--sigma-t", "0.5", "--bins", "1,2,4,8,16", "--out", str(OUT / "bootstrap.csv"))
