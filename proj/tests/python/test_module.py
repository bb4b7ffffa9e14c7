import math
import re

import numpy as np
import pytest

import lsrlab

LINE = "C4 _ _ _ D4 _ r r E4 _ _ _ _ _ _ _ _ _ _ _ _ _ _ _"


def test_parse_and_attributes():
    m = lsrlab.parse_measure(LINE)
    assert str(m) == LINE
    assert m == lsrlab.Measure(LINE)
    a = m.attributes()
    assert a["nd"] == 3
    assert a["nr"] == 4
    # slots 0, 4, 8: weights 5, 1, 1
    assert a["rc"] == 0 + 4 + 4
    assert a["aij"] == 2


def test_errors_are_typed():
    with pytest.raises(lsrlab.LsrlabError, match="WrongSlotCount"):
        lsrlab.parse_measure("C4 _ _")
    with pytest.raises(lsrlab.LsrlabError):
        lsrlab.spearman([1.0], [2.0])


def test_metrics():
    assert lsrlab.spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert lsrlab.spearman([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    assert lsrlab.cosine_similarity([1, 0], [0, 1]) == pytest.approx(0.0)
    assert lsrlab.cosine_similarity([1, 2], [2, 4]) == pytest.approx(1.0)
    m = lsrlab.parse_measure(LINE)
    assert lsrlab.reconstruction_accuracy([m], [m]) == pytest.approx(100.0)


def test_mu_law_bins_occupancy():
    rng = np.random.default_rng(3)
    values = list(rng.exponential(size=800))
    bins = lsrlab.mu_law_bins(values, 8, 255.0)
    counts = np.bincount(bins, minlength=8)
    assert len(counts) == 8
    assert counts.min() > 0


def test_synthetic_and_split():
    c = lsrlab.synthetic_corpus(5, 200)
    assert len(c) == 200
    assert lsrlab.synthetic_corpus(5, 200).measures == c.measures
    train, test, val = lsrlab.split_corpus(c, seed=1)
    assert len(train) + len(test) + len(val) == 200
    stats = c.statistics()
    assert stats["measures"] == 200
    assert math.isfinite(stats["nd"][0])


def test_preset_and_digest():
    ini = lsrlab.preset_config("desk")
    assert "[latent]" in ini
    assert lsrlab.config_digest(ini) == lsrlab.config_digest(ini)
    assert lsrlab.config_digest(ini) != lsrlab.config_digest(re.sub(r"epochs = \d+", "epochs = 999", ini))
    with pytest.raises(lsrlab.LsrlabError):
        lsrlab.config_digest("[nonsense]\nx = 1\n")


def test_tiny_run_and_model(tmp_path):
    ini = f"""
[experiment]
out = {tmp_path}
[data]
synthetic_n = 80
[latent]
dims = 4
[train]
epochs = 1
"""
    r = lsrlab.run_single(ini)
    assert r["status"] == "ok"
    assert r["latent_dim"] == 4
    assert 0.0 <= r["metrics"]["reconstruction_accuracy"] <= 100.0
    assert lsrlab.read_reports(tmp_path / "report.csv")[0]["config_digest"] == r["config_digest"]

    model = lsrlab.Model(tmp_path / "checkpoint")
    assert model.kind == "measure_vae"
    assert model.latent_dim == 4
    # Decoded samples stay inside the model's vocabulary.
    data = model.decode(np.random.default_rng(0).normal(size=(40, 4)))
    assert len(data) == 40
    assert all(len(str(m).split()) == 24 for m in data)
    z = model.encode(data)
    assert z.shape == (40, 4)
    assert [str(m) for m in model.reconstruct(data)] == [str(m) for m in model.decode(z)]
    with pytest.raises(lsrlab.LsrlabError, match="UnknownToken"):
        model.encode([lsrlab.parse_measure("C0 " + "_ " * 23)])
    sweep = model.interpolate(data, data[0], "nd")
    assert [round(mu, 1) for mu, _, _ in sweep] == [round(-0.5 + 0.1 * k, 1) for k in range(11)]
    assert all(a["nd"] == m.attributes()["nd"] for _, m, a in sweep)
