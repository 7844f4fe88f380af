"""MSE of a 1D sigmoid scene against the number of pixels.

Few large pixels blur the edge (bias), many small pixels each see few
photons (variance). The sweep prints simulated and predicted MSE per pixel
count and draws both curves; the valley sits near N = 64.
"""

from _common import CONFIGS, OUT, run

run("sweep1d", "--config", str(CONFIGS / "table1.cfg"), "--out", str(OUT / "sweep1d.csv"), "--svg", str(OUT / "sweep1d.svg"))
