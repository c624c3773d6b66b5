import math

import numpy as np
import pytest

from actionrd.errors import ConfigError, InfeasibleTarget
from actionrd.scenario import (ErasureParams, ScenarioInstance, analytic_rdc, build_erasure,
                               load_scenario, scenario_from_dict)
from oracles import h2


def test_erasure_source_and_channels():
    sc = build_erasure(K=4, q=0.5, p=0.0)
    assert np.allclose(sc.px, [0.125, 0.125, 0.125, 0.125, 0.5])
    assert np.allclose(sc.channel[1][:, :5], np.eye(5))
    assert np.allclose(sc.channel[0][:, 5], 1.0)
    assert np.all(sc.distortion[4] == 0)
    assert np.allclose(sc.distortion[:4, :4], 1 - np.eye(4))
    assert list(sc.cost) == [0.0, 1.0]


def test_erasure_noisy_channel_rows():
    sc = build_erasure(K=4, q=0.5, p=0.1)
    assert np.allclose(sc.channel[1].sum(axis=1), 1)
    assert np.allclose(sc.channel[1][:, 5], 0.1)


def test_analytic_zero_at_full_budget():
    assert analytic_rdc(0.0, 1.0) == 0.0


@pytest.mark.parametrize("D", [0.02, 0.1, 0.2, 0.3])
def test_analytic_without_budget_is_classic(D):
    # only the relevant half of the source costs rate: (1-q) R_4(D / (1-q))
    w, K = 0.5, 4
    d = D / w
    ref = w * (math.log2(K) - h2(d) - d * math.log2(K - 1)) if d < (K - 1) / K else 0.0
    assert analytic_rdc(D, 0.0) == pytest.approx(ref, abs=1e-9)


def _gamma_scan(D, C, K=4, q=0.5):
    # independent evaluation of the symmetric-action family on a fine grid
    best = math.inf
    lo, hi = max(0.0, (C - (1 - q)) / q), min(1.0, C / q)
    for g in np.linspace(lo, hi, 4001):
        r = (C - q * g) / (1 - q)
        pa1 = C
        joint = np.array([[(1 - q) * (1 - r), (1 - q) * r], [q * (1 - g), q * g]])
        ha = -sum(v * math.log2(v) for v in (pa1, 1 - pa1) if v > 0)
        i_xa = ha - sum(joint[i].sum() * h2(joint[i, 1] / joint[i].sum()) for i in range(2))
        p0rel = (1 - q) * (1 - r)
        p0 = 1 - C
        rate = i_xa
        if p0rel > 0:
            d = D / p0rel
            rate += p0rel * (math.log2(K) - h2(d) - d * math.log2(K - 1)) if d < (K - 1) / K else 0.0
        elif p0 <= 0 and D < 0:
            rate = math.inf
        best = min(best, rate)
    return max(best, 0.0)


@pytest.mark.parametrize("D,C", [(0.05, 0.25), (0.1, 0.5), (0.02, 0.75), (0.2, 0.25)])
def test_analytic_matches_gamma_scan(D, C):
    assert analytic_rdc(D, C) == pytest.approx(_gamma_scan(D, C), abs=2e-4)


def test_analytic_rejects_noise_and_bad_targets():
    with pytest.raises(InfeasibleTarget):
        analytic_rdc(0.1, 0.5, p=0.1)
    with pytest.raises(InfeasibleTarget):
        analytic_rdc(-0.1, 0.5)


def test_toml_round_trip(tmp_path):
    sc = build_erasure(K=3, q=0.4, p=0.2)
    f = tmp_path / "s.toml"
    f.write_text(sc.to_toml())
    back = load_scenario(f)
    assert back.fingerprint == sc.fingerprint
    assert back.a_labels == sc.a_labels and back.y_labels == sc.y_labels


@pytest.mark.parametrize("kw", [
    dict(px=[0.6, 0.6], channel=np.ones((1, 2, 1)), distortion=1 - np.eye(2), cost=[0.0]),
    dict(px=[0.5, 0.5], channel=np.full((1, 2, 2), 0.4), distortion=1 - np.eye(2), cost=[0.0]),
    dict(px=[0.5, 0.5], channel=np.ones((1, 2, 1)), distortion=np.ones((2, 2)), cost=[0.0]),
    dict(px=[0.5, 0.5], channel=np.ones((1, 2, 1)), distortion=1 - np.eye(2), cost=[0.5]),
    dict(px=[0.5, 0.5], channel=np.ones((2, 2, 1)), distortion=1 - np.eye(2), cost=[0.0]),
])
def test_invalid_instances(kw):
    with pytest.raises(ConfigError):
        ScenarioInstance(**kw)


def test_invalid_files(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("x = [")
    with pytest.raises(ConfigError):
        load_scenario(bad)
    with pytest.raises(ConfigError):
        scenario_from_dict({"x": ["0"], "y": ["0"], "a": ["on"], "px": [1.0], "cost": [0.0],
                            "distortion": [[0.0]], "channel": {}})
    with pytest.raises(ConfigError):
        ErasureParams(K=0)
