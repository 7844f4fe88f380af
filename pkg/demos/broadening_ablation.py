"""Full against simplified variance prediction.

The simplified model drops the spread of arrival times inside a pixel. It
tracks the simulation closely here because that spread is small next to the
pulse width except at the coarsest pixels.
"""

from _common import CONFIGS, OUT, run

run("ablation", "--config", str(CONFIGS / "table1.cfg"), "--out", str(OUT / "ablation.csv"), "--svg", str(OUT / "ablation.svg"))
