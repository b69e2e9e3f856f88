import json
import math
import pathlib

import numpy as np
import pytest

import porkcast

ROOT = pathlib.Path(__file__).resolve().parents[2]
SAMPLE = ROOT / "data" / "sample" / "prices.csv"


@pytest.fixture(scope="module")
def sample():
    return porkcast.load_csv(SAMPLE.read_text())


def test_sample_panel_shape_and_repair(sample):
    panel, repairs = sample
    assert panel.values.shape == (322, 8)
    assert panel.weeks[0] == "2016-W01"
    assert panel.weeks[-1] == "2022-W09"
    assert "ES-LLEIDA" in panel.markets
    assert [(r["market"], r["week"]) for r in repairs] == [("ES-HUESCA", "2018-W04")]
    assert repairs[0]["replaced"] == pytest.approx(1.293)


def test_parse_error_is_a_value_error():
    with pytest.raises(porkcast.DataError) as err:
        porkcast.load_csv("date,market,price_eur_kg\n2016-01-04,ES-ZARAGOZA,abc\n")
    assert isinstance(err.value, ValueError)
    assert "line 2" in str(err.value)


def test_correlations_match_numpy(sample):
    panel, _ = sample
    markets, r = porkcast.correlations(panel)
    assert markets == panel.markets
    np.testing.assert_allclose(r, np.corrcoef(panel.values, rowvar=False), atol=1e-12)
    selected = porkcast.select_markets(panel, "ES-LLEIDA", 0.98)
    assert selected[0] == "ES-LLEIDA"


def test_dataset_and_ridge_against_numpy(sample):
    panel, _ = sample
    ds = porkcast.build_dataset(panel, "ES-LLEIDA", 2, "subscription")
    X, y = ds["features"], ds["targets"]
    assert X.shape == (320, 16)
    w, b = porkcast.ridge_fit(X, y, 0.0)
    A = np.column_stack([X, np.ones(len(y))])
    ref = np.linalg.lstsq(A, y, rcond=None)[0]
    np.testing.assert_allclose(w, ref[:-1], atol=1e-6)
    assert b == pytest.approx(ref[-1], abs=1e-6)


def test_metrics():
    y = np.array([1.0, 2.0, 3.0])
    assert porkcast.rmse(y, y) == 0.0
    assert porkcast.r2(y, np.full(3, 2.0)) == 0.0
    assert porkcast.rmse(y, np.array([2.0, 2.0, 2.0])) == pytest.approx(math.sqrt(2 / 3))


def test_adf_on_random_walk_and_noise():
    rng = np.random.default_rng(3)
    walk = np.cumsum(rng.normal(size=300))
    noise = rng.normal(size=300)
    assert not porkcast.adf_test(list(walk))["rejects_5pct"]
    assert porkcast.adf_test(list(noise))["rejects_5pct"]


def test_sarima_recovers_ar1():
    rng = np.random.default_rng(5)
    y = np.zeros(500)
    for t in range(1, 500):
        y[t] = 0.7 * y[t - 1] + rng.normal()
    out = porkcast.sarima_forecast(list(y), (1, 0, 0), steps=3)
    assert out["model"]["ar"][0] == pytest.approx(0.7, abs=0.08)
    assert len(out["forecast"]) == 3


def test_evaluate_synthetic_is_deterministic():
    panel = porkcast.synthetic_panel(11, weeks=200)
    a = porkcast.evaluate(panel, models="ridge,arima", trials=4)
    b = porkcast.evaluate(panel, models="ridge,arima", trials=4, threads=2)
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    rows = {(r["family"], r["scenario"]): r for r in a["rows"]}
    assert rows[("ridge", "subscription")]["rmse"] < rows[("ridge", "public")]["rmse"]
    assert rows[("arima", "public")]["predictions"] == rows[("arima", "subscription")]["predictions"]


def test_run_command_usage_and_ingest():
    code, out, err = porkcast.run_command(["frobnicate"])
    assert code == 1 and err
    code, out, _ = porkcast.run_command(["ingest", "--data", str(SAMPLE.parent)])
    assert code == 0
    assert "repairs: 1" in out
