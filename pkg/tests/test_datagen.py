import json

import numpy as np
import pytest

from heatload.analysis import cross_correlation
from heatload.datagen import GenConfig, XorShift64Star, default_profile, generate, preset, write_dataset
from heatload.series import Unit, differentiate_shift, read_csv


def test_rng_is_reproducible_and_uniform():
    a = [XorShift64Star(5).uniform() for _ in range(3)]
    r = XorShift64Star(5)
    assert [r.uniform() for _ in range(1)][0] == a[0]
    u = np.array([r.uniform() for _ in range(20000)])
    assert 0.0 <= u.min() and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.01
    z = np.array([r.normal() for _ in range(20000)])
    assert abs(z.mean()) < 0.03 and abs(z.std() - 1) < 0.03


def test_generate_is_deterministic():
    a = generate(preset("default", rng_seed=3))
    b = generate(preset("default", rng_seed=3))
    c = generate(preset("default", rng_seed=4))
    np.testing.assert_array_equal(a.raw_consumption.values, b.raw_consumption.values)
    np.testing.assert_array_equal(a.raw_temperature.times, b.raw_temperature.times)
    assert not np.array_equal(a.true_load.values, c.true_load.values)


def test_all_variation_disabled_gives_ramp():
    cfg = GenConfig(days=3, daily_profile=(0.0,) * 24, temp_coupling=0.0)
    g = generate(cfg)
    np.testing.assert_array_equal(g.true_load.values, cfg.base_load)
    np.testing.assert_allclose(np.diff(g.accumulated.values), cfg.base_load)
    assert len(g.raw_consumption) == 24 * 3 + 1


def test_accumulated_is_monotone_and_load_non_negative():
    g = generate(GenConfig(days=20, noise_stddev=3.0, rng_seed=1))
    assert g.true_load.values.min() >= 0.0
    assert np.all(np.diff(g.accumulated.values) >= 0)
    assert np.all(np.diff(g.raw_consumption.values) >= 0)


def test_noise_free_differencing_recovers_true_load():
    g = generate(preset("default", noise_stddev=0.0, jitter_stddev=0.0, dropout_prob=0.0))
    d = differentiate_shift(g.accumulated, 0)
    np.testing.assert_allclose(d.values, g.true_load.values[1:], rtol=1e-12)


def test_dropout_count():
    g = generate(GenConfig(days=16, dropout_prob=0.1, rng_seed=9))
    t = g.raw_consumption.times
    assert abs(len(t) - 346) <= 15
    assert t[0] == g.true_load.start and t[-1] == g.true_load.end


def test_jitter_keeps_order_and_ends():
    g = generate(GenConfig(days=4, jitter_stddev=1500.0, rng_seed=2))
    t = g.raw_consumption.times
    assert np.all(np.diff(t) > 0)
    assert t[0] == g.true_load.start and t[-1] == g.true_load.end
    assert not np.all(t % 3600 == 0)


def test_temperature_lead_shows_in_cross_correlation():
    g = generate(preset("default", rng_seed=7))
    cc = cross_correlation(g.true_load, g.temperature, 6)
    assert int(np.argmin(cc.coefficients)) == 1


def test_default_profile_shape():
    p = np.array(default_profile(0.4))
    assert len(p) == 24 and abs(p.sum()) < 1e-12
    assert np.abs(p).max() == pytest.approx(0.4)


@pytest.mark.parametrize("kw", [{"days": 0}, {"base_load": 0.0}, {"noise_stddev": -1.0},
                                {"dropout_prob": 1.0}, {"daily_profile": (1.0,) * 24},
                                {"daily_profile": (0.0,) * 23}])
def test_invalid_config(kw):
    with pytest.raises(ValueError):
        GenConfig(**kw)


def test_unknown_preset():
    with pytest.raises(ValueError):
        preset("winter")


def test_write_dataset(tmp_path):
    cfg = preset("default", days=2)
    g = generate(cfg)
    paths = write_dataset(g, cfg, tmp_path)
    assert [p.name for p in paths] == ["consumption.csv", "temperature.csv", "true_load.csv", "config.json"]
    raw = read_csv(paths[0])
    np.testing.assert_array_equal(raw.values, g.raw_consumption.values)
    assert read_csv(paths[1], Unit.DEG_C).unit is Unit.DEG_C
    assert json.loads(paths[3].read_text())["days"] == 2
