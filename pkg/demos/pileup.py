"""Sweep with an exponentially decaying pile-up background.

The early-arrival background is much stronger than the signal, yet the
numerical Fisher prediction still follows the simulation.
"""

from _common import CONFIGS, OUT, run

run("pileup", "--config", str(CONFIGS / "pileup.cfg"), "--out", str(OUT / "pileup.csv"), "--svg", str(OUT / "pileup.svg"))
