"""The same sweep under several uniform background levels.

A higher floor raises the variance branch and pushes the optimum towards
larger pixels. One table is written per floor value.
"""

from _common import CONFIGS, OUT, run

run("floor-sweep", "--config", str(CONFIGS / "noise_floor.cfg"), "--out", str(OUT / "floor.csv"), "--svg", str(OUT / "floor.svg"))
