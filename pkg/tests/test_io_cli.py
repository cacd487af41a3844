import csv
import json
import math

import numpy as np
import pytest

from gffchem.cli import main
from gffchem.config import ConfigError, RunConfig
from gffchem.io import FieldFormatError, emit_results, read_field, read_json_results, write_field
from gffchem.lattice import BoxRegion
from gffchem.sampler import sample_dirichlet_spectral


@pytest.mark.parametrize("side", [5, 64])
def test_field_round_trip(tmp_path, side):
    f = sample_dirichlet_spectral(BoxRegion.from_shape((side,) * 3, (1, -2, 5)), 4, 1)
    write_field(f, tmp_path / "f.gff")
    g = read_field(tmp_path / "f.gff", expect_dim=3)
    assert g.box == f.box and np.array_equal(g.values, f.values) and g.meta == f.meta


def test_field_format_errors(tmp_path):
    f = sample_dirichlet_spectral(BoxRegion.ball(2, 3), 4, 1)
    p = tmp_path / "f.gff"
    write_field(f, p)
    raw = p.read_bytes()
    bad = tmp_path / "bad.gff"
    bad.write_bytes(b"GFF2" + raw[4:])
    with pytest.raises(FieldFormatError, match="magic"):
        read_field(bad)
    bad.write_bytes(raw[:100])
    with pytest.raises(FieldFormatError, match="truncated"):
        read_field(bad)
    bad.write_bytes(raw + b"x")
    with pytest.raises(FieldFormatError, match="trailing"):
        read_field(bad)
    with pytest.raises(FieldFormatError, match="dimension"):
        read_field(p, expect_dim=4)


def test_emit_csv_and_json(tmp_path):
    emit_results([], "csv", tmp_path / "e.csv", columns=["N", "p_hat"])
    assert (tmp_path / "e.csv").read_text() == "N,p_hat\n"
    recs = [{"N": 16, "p_hat": 0.1, "censored": False}, {"N": 32, "p_hat": 1 / 3, "censored": True}]
    emit_results(recs, "csv", tmp_path / "r.csv")
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert float(rows[1]["p_hat"]) == 1 / 3 and rows[1]["censored"] == "true"
    emit_results(recs, "json", tmp_path / "r.json", meta={"seed": 1})
    assert read_json_results(tmp_path / "r.json") == {"meta": {"seed": 1}, "records": recs}


def test_emit_nan_aborts(tmp_path):
    with pytest.raises(ValueError, match="p_hat"):
        emit_results([{"N": 1, "p_hat": math.nan}], "csv", tmp_path / "x.csv")
    assert not (tmp_path / "x.csv").exists()


def test_config_round_trip_and_errors():
    cfg = RunConfig(N=[16, 32], h=-0.3, C=4.5, seed=11)
    assert RunConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ConfigError) as ei:
        RunConfig.from_dict({"zeta": 1})
    assert ei.value.key == "zeta"
    for key, val in [("d", 2), ("h1", 5.0), ("eps", 0.0), ("n", 0), ("F_reading", "x")]:
        with pytest.raises(ConfigError) as ei:
            RunConfig.from_dict({key: val})
        assert ei.value.key == key


def test_cli_green(capsys):
    assert main(["green", "--tol", "1e-3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["value"] == pytest.approx(1.516386, abs=1e-3)
    assert len(out["trace"]["raw"]) >= 2


def test_cli_sample_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.gff", tmp_path / "b.gff"
    assert main(["sample", "--box", "4", "--seed", "7", "--out", str(a)]) == 0
    assert main(["sample", "--box", "4", "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_cli_estimate_and_rerun(tmp_path, capsys):
    out = tmp_path / "est.csv"
    argv = ["estimate", "--event", "stretch", "--N", "4,8", "--n", "6", "--seed", "1", "--h", "0", "--C", "3",
            "--output", str(out)]
    assert main(argv) == 0
    rows = list(csv.DictReader(open(out)))
    assert [r["N"] for r in rows] == ["4", "8"]
    meta = read_json_results(out.with_suffix(".json"))["meta"]
    assert meta["command"] == "estimate" and meta["config"]["seed"] == 1
    again = tmp_path / "again.csv"
    assert main(["estimate", "--config", str(out.with_suffix(".json")), "--output", str(again)]) == 0
    assert again.read_bytes() == out.read_bytes()


def test_cli_errors_are_records(capsys):
    assert main(["estimate", "--n", "0"]) == 2
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "config" and err["key"] == "n"
    assert main(["sample", "--box", "2"]) == 2
