from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from photon_limits.scene import ConfigurationError
from photon_limits.spaddata import (
    BOOTSTRAP_CSV_HEADER,
    TimestampCube,
    binned_bias,
    binned_bootstrap_mse,
    estimate_alpha0,
    estimate_sigma_t,
    fan_tau_map,
    load_cube,
    make_fan_cube,
    pseudo_ground_truth,
    reject_outliers,
    save_cube,
    write_bootstrap_csv,
)


@pytest.fixture(scope="module")
def dirty():
    """Fan cube with a secondary pulse, start/end spikes and no ambient floor."""
    return make_fan_cube(
        size=32, frames=1000, sigma_t=0.5, signal_fraction=0.5, secondary_fraction=0.1, spike_fraction=0.1, rng=0
    )


@pytest.fixture(scope="module")
def cleaned(dirty):
    return reject_outliers(dirty[0], 0.5, rng=0)


def test_empty_body(tmp_path):
    (tmp_path / "c.txt").write_text("# 2 3 100 0.01\n")
    cube = load_cube(tmp_path / "c.txt")
    assert cube.counts.shape == (2, 3) and cube.counts.sum() == 0


def test_roundtrip(tmp_path, dirty):
    cube = dirty[0]
    save_cube(cube, tmp_path / "c.txt")
    back = load_cube(tmp_path / "c.txt")
    assert (back.height, back.width, back.frames, back.tdc_resolution) == (32, 32, 1000, 0.01)
    assert back.times.tobytes() == cube.times.tobytes()
    assert np.array_equal(back.offsets, cube.offsets)


@pytest.mark.parametrize(
    "body",
    ["0 0\n", "5 0 1.0\n", "0 0 -1.0\n", "0 0 nan\n", "0 0 1.0 2\n"],
)
def test_malformed_cubes(tmp_path, body):
    (tmp_path / "c.txt").write_text("# 2 2 10 0.01\n" + body)
    with pytest.raises(ValueError):
        load_cube(tmp_path / "c.txt")


def test_missing_header(tmp_path):
    (tmp_path / "c.txt").write_text("0 0 1.0\n")
    with pytest.raises(ValueError):
        load_cube(tmp_path / "c.txt")


def test_fan_map_shape():
    tau = fan_tau_map(64)
    assert set(np.unique(tau[tau == 7.0])) == {7.0}
    assert 4.5 <= tau[tau < 7.0].min() and tau[tau < 7.0].max() < 7.0
    assert 0.1 < np.mean(tau < 7.0) < 0.5


def test_clean_pulse_retained():
    cube, _ = make_fan_cube(size=16, frames=1000, sigma_t=0.5, signal_fraction=0.5, rng=1)
    clean = reject_outliers(cube, 0.5, rng=1)
    assert clean.times.size / cube.times.size >= 0.99


def test_secondary_and_spikes_removed(dirty, cleaned):
    cube, tau = dirty
    for p, (kept, raw) in enumerate(zip(cleaned.pixels(), cube.pixels())):
        t0 = tau.ravel()[p]
        # nothing near the secondary pulse (+5) or the range ends survives
        assert np.all(np.abs(kept - t0) < 2.0)
        n_main = np.sum(np.abs(raw - t0) <= 3 * 0.5)
        assert kept.size >= 0.97 * n_main


def test_idempotent(cleaned):
    again = reject_outliers(cleaned, 0.5, rng=0)
    assert again.times.tobytes() == cleaned.times.tobytes()


@pytest.mark.parametrize("seed", [3, 4])
def test_idempotent_other_seeds(seed):
    cube, _ = make_fan_cube(
        size=16, frames=500, sigma_t=0.5, signal_fraction=0.5, secondary_fraction=0.1, spike_fraction=0.1, background_fraction=0.1, rng=seed
    )
    once = reject_outliers(cube, 0.5, rng=seed)
    assert reject_outliers(once, 0.5, rng=seed).times.size == once.times.size


def test_empty_pixels_pass_through():
    pixels = [np.array([4.0, 4.1, 3.9]), np.empty(0), np.array([5.0]), np.empty(0)]
    cube = TimestampCube.from_pixels(2, 2, 10, 0.01, pixels)
    clean = reject_outliers(cube, 0.5)
    assert clean.counts.tolist() == [[3, 0], [1, 0]]
    pgt = pseudo_ground_truth(clean)
    assert pgt.missing.tolist() == [[False, True], [False, True]]
    assert pgt.coverage == 0.5


def test_pseudo_ground_truth_recovery(dirty, cleaned):
    _, tau = dirty
    pgt = pseudo_ground_truth(cleaned)
    ratio = np.abs(pgt.tau - tau) / (3 * 0.5 / np.sqrt(pgt.counts))
    # a 3-sigma band holds for 99.7% of pixels; allow that many to fall outside
    assert np.mean(ratio > 1) <= 0.01
    assert ratio.max() <= 5 / 3


def test_sigma_estimate(cleaned):
    assert estimate_sigma_t(cleaned).mean == pytest.approx(0.5, rel=0.03)


def test_sigma_of_constant_stamps():
    cube = TimestampCube.from_pixels(1, 2, 5, 0.01, [np.full(5, 3.0), np.full(2, 1.0)])
    sig = estimate_sigma_t(cube)
    assert sig.mean == 0.0 and np.all(sig.map == 0.0)


def test_alpha0_definition(cleaned):
    assert estimate_alpha0(cleaned, 3) == pytest.approx(cleaned.times.size / 1000 * 3)
    with pytest.raises(ValueError):
        estimate_alpha0(cleaned, 0)


def test_full_frame_bin_variance():
    tau = np.full((16, 16), 5.0)
    cube, _ = make_fan_cube(size=16, frames=400, sigma_t=0.5, signal_fraction=0.8, tau_map=tau, rng=5)
    pgt = pseudo_ground_truth(cube)
    (pt,) = binned_bootstrap_mse(cube, pgt, [16], K=3, resamples=3000, rng=6)
    assert pt.var_sim == pytest.approx(0.25 / (3 * 256), rel=0.1)


def test_flat_scene_variance_shrinks_with_bins():
    tau = np.full((16, 16), 5.0)
    cube, _ = make_fan_cube(size=16, frames=400, sigma_t=0.5, signal_fraction=0.8, tau_map=tau, rng=5)
    pts = binned_bootstrap_mse(cube, pseudo_ground_truth(cube), [1, 2, 4, 8, 16], resamples=200, rng=7)
    v = [p.var_sim for p in pts]
    assert all(b < a for a, b in zip(v, v[1:]))


def test_bias_nonnegative_nondecreasing(cleaned):
    pgt = pseudo_ground_truth(cleaned)
    bias = [binned_bias(cleaned, pgt, b) for b in (1, 2, 4, 8, 16, 32)]
    assert bias[0] == 0.0
    assert all(x >= 0 for x in bias)
    assert all(b >= a - 1e-12 for a, b in zip(bias, bias[1:]))


def test_bad_bin_size(cleaned):
    with pytest.raises(ConfigurationError):
        binned_bias(cleaned, pseudo_ground_truth(cleaned), 3)


def test_no_valley_for_short_pulses():
    cube, _ = make_fan_cube(
        size=32, frames=1000, sigma_t=0.05, signal_fraction=0.9, secondary_fraction=0.03, spike_fraction=0.03, background_fraction=0.02, rng=2
    )
    clean = reject_outliers(cube, 0.05, rng=2)
    pts = binned_bootstrap_mse(clean, pseudo_ground_truth(clean), [32, 16, 8, 4, 2, 1], rng=3)
    n = [p.n_effective for p in pts]
    sim = [p.mse_sim for p in pts]
    theory = [p.mse_theory for p in pts]
    assert n == [1, 2, 4, 8, 16, 32]
    assert int(np.argmin(sim)) == len(sim) - 1
    # the four-fold symmetric fan gives N = 1 and N = 2 the same bias
    assert all(b <= a * (1 + 1e-4) for a, b in zip(theory, theory[1:]))
    assert int(np.argmin(theory)) == len(theory) - 1
    assert all(b < a for a, b in zip(sim[1:], sim[2:]))


def test_bootstrap_csv(cleaned):
    pts = binned_bootstrap_mse(cleaned, pseudo_ground_truth(cleaned), [1, 4], resamples=10)
    lines = write_bootstrap_csv(pts).splitlines()
    assert lines[0] == BOOTSTRAP_CSV_HEADER
    assert [ln.split(",")[:2] for ln in lines[1:]] == [["1", "32"], ["4", "8"]]


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 1000), st.floats(0.1, 1.0))
def test_cleaning_is_idempotent_property(seed, sigma):
    cube, _ = make_fan_cube(
        size=8, frames=200, sigma_t=sigma, signal_fraction=0.5, secondary_fraction=0.1, spike_fraction=0.1, background_fraction=0.1, rng=seed
    )
    once = reject_outliers(cube, sigma, rng=seed)
    twice = reject_outliers(once, sigma, rng=seed)
    assert twice.times.tobytes() == once.times.tobytes()
