"""Grid cells and pulse widths in physical units for a 10 mm array."""

from _common import run

run("units")
