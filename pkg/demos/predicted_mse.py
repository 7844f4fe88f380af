"""Closed-form bias, variance and MSE for the sigmoid scene, without simulation."""

from _common import CONFIGS, run

run("theory", "--config", str(CONFIGS / "table1.cfg"))
