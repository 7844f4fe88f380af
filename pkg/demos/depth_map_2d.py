"""Trade-off on a smooth 2D depth map with N x N pixels.

Bias and variance are reported separately so the two closed-form branches
can be checked on their own.
"""

from _common import CONFIGS, OUT, run

run("sweep2d", "--config", str(CONFIGS / "depthmap2d.cfg"), "--out", str(OUT / "sweep2d.csv"), "--svg", str(OUT / "sweep2d.svg"))
