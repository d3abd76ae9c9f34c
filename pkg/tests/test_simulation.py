import csv
import io
import json
import math

import numpy as np
import pytest

from macstbc.simulation import (
    CSV_COLUMNS,
    SimConfig,
    measure_receive_snr,
    run_sweep,
    run_trial,
    sample_channel,
    sample_symbols,
    trial_rng,
)
from macstbc.sphere_decoder import DecoderRefusal, PamConstellation


def test_channel_statistics(rng):
    ch = sample_channel(2, 50_000, rng)
    h = np.concatenate([ch.H1.ravel(), ch.H2.ravel()])
    assert abs(np.mean(np.abs(h) ** 2) - 1) < 0.02
    assert abs(np.corrcoef(h.real, h.imag)[0, 1]) < 0.02
    assert abs(np.var(h.real) - 0.5) < 0.01


def test_qam_energy(rng):
    c = PamConstellation(16)
    z = sample_symbols(2_000_000, c, rng)
    x = c.to_qam(z)
    assert abs(np.mean(np.abs(x) ** 2) - 1) < 1e-3


def test_trial_rng_streams_distinct():
    a = trial_rng(1, 0, 0).standard_normal(4)
    assert not np.allclose(a, trial_rng(1, 0, 1).standard_normal(4))
    assert not np.allclose(a, trial_rng(1, 1, 0).standard_normal(4))
    np.testing.assert_array_equal(a, trial_rng(1, 0, 0).standard_normal(4))


def test_run_trial_deterministic():
    cfg = SimConfig(snr_db=(5.0,), trials=1, master_seed=42)
    a, b = run_trial(cfg, 3), run_trial(cfg, 3)
    np.testing.assert_array_equal(a.z, b.z)
    np.testing.assert_array_equal(a.z_hat, b.z_hat)


@pytest.mark.parametrize("design,nt,k", [("alamouti", None, None), ("case2", 2, 3), ("cod", 4, None)])
def test_noiseless_trials_error_free(design, nt, k):
    cfg = SimConfig(design=design, nt=nt, k=k, qam=16, snr_db=(0.0,), trials=1)
    for t in range(30):
        assert run_trial(cfg, t, noise_scale=0.0).errors == 0


def test_bruteforce_and_conditional_same_errors():
    base = dict(qam=4, snr_db=(0.0, 6.0), trials=200, master_seed=7)
    a = run_sweep(SimConfig(decoder="bruteforce", **base))
    b = run_sweep(SimConfig(decoder="conditional", **base))
    c = run_sweep(SimConfig(decoder="generic", **base))
    for p, q, r in zip(a.points, b.points, c.points):
        assert (p.errors_user1, p.errors_user2) == (q.errors_user1, q.errors_user2)
        assert (p.errors_user1, p.errors_user2) == (r.errors_user1, r.errors_user2)


def test_snr_calibration():
    cfg = SimConfig(snr_db=(10.0,), trials=1, master_seed=3)
    assert abs(measure_receive_snr(cfg, 100_000) / 10.0 - 1) < 0.03


@pytest.mark.parametrize("kwargs", [
    {"trials": 0}, {"trials": -1}, {"qam": 8}, {"decoder": "fast"}, {"snr_db": ()}, {"jobs": 0},
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_conditional_refuses_spatial():
    cfg = SimConfig(design="spatial", nt=2, trials=1)
    with pytest.raises(DecoderRefusal):
        run_trial(cfg, 0)
    assert run_trial(SimConfig(design="spatial", nt=2, trials=1, decoder="generic"), 0, noise_scale=0).errors == 0


def test_csv_format():
    res = run_sweep(SimConfig(snr_db=(0.0, 10.0), trials=50, master_seed=1))
    text = res.to_csv()
    rows = list(csv.DictReader(io.StringIO(text)))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [float(r["snr_db"]) for r in rows] == [0.0, 10.0]
    assert all(int(r["trials"]) == 50 for r in rows)
    for r in rows:
        assert math.isclose(float(r["ser_total"]), (float(r["ser_user1"]) + float(r["ser_user2"])) / 2)
    assert text == run_sweep(SimConfig(snr_db=(0.0, 10.0), trials=50, master_seed=1)).to_csv()


def test_json_format(tmp_path):
    res = run_sweep(SimConfig(snr_db=(5.0,), trials=20))
    path = tmp_path / "r.json"
    res.to_json(path)
    doc = json.loads(path.read_text())
    assert doc["design"] and doc["Nt"] == 2 and doc["k"] == 2
    assert set(doc["points"][0]) >= set(CSV_COLUMNS) | {"mean_stats"}
    assert "wall_time" not in path.read_text()


def test_jobs_do_not_change_results():
    base = dict(qam=16, snr_db=(5.0, 15.0), trials=60, master_seed=9)
    serial = run_sweep(SimConfig(jobs=1, **base))
    parallel = run_sweep(SimConfig(jobs=3, **base))
    assert serial.to_csv() == parallel.to_csv()


def test_ser_decreases_with_snr():
    res = run_sweep(SimConfig(qam=16, snr_db=(0.0, 10.0, 20.0), trials=400, master_seed=2))
    ser = res.ser
    assert ser[0] > ser[1] > ser[2]
