import datetime as dt

import numpy as np
import pytest
import yaml

from episens.config import RunConfig, config_digest, config_from_dict, load_config
from episens.errors import DataError, MalformedRow, MissingColumn
from episens.persist import read_csv, read_sample_csv, write_csv, write_json


class TestConfig:
    def test_defaults_reproduce_study_setup(self):
        cfg = RunConfig().validate()
        assert cfg.pre_window == (dt.date(2020, 2, 24), dt.date(2020, 3, 8))
        assert cfg.post_window == (dt.date(2020, 3, 9), dt.date(2020, 4, 20))
        assert cfg.issuance_date == dt.date(2020, 3, 9)
        assert cfg.n_pop == 60_360_000.0
        assert cfg.uq.delta_rel == 0.30
        assert cfg.uq.max_delay_days == 7

    def test_load_with_overrides(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump({
            "data_file": "x.csv",
            "seed": 5,
            "pre_window": ["2020-02-24", "2020-03-01"],
            "fit": {"pre": {"bounds": {"beta": [0.0, 1.5]}, "i0": 100}},
            "uq": {"n_samples": 123, "i0_base": 250},
            "gsa": {"mode": "finite-change"},
        }))
        cfg = load_config(path)
        assert cfg.seed == 5
        assert cfg.pre_window[1] == dt.date(2020, 3, 1)
        assert cfg.fit.pre.bounds["beta"] == (0.0, 1.5)
        assert cfg.fit.pre.i0 == 100.0
        assert cfg.fit.post.i0 is None
        assert cfg.uq.n_samples == 123
        assert cfg.uq.i0_base == 250.0
        assert cfg.gsa.mode == "finite-change"

    def test_invalid_window_rejected(self):
        with pytest.raises(DataError):
            config_from_dict({"pre_window": ["2020-03-08", "2020-02-24"]})

    def test_unknown_gsa_mode_rejected(self):
        with pytest.raises(DataError):
            config_from_dict({"gsa": {"mode": "sideways"}})

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_config(tmp_path / "absent.yaml")

    def test_digest_stable_and_sensitive(self):
        a = RunConfig()
        b = RunConfig()
        assert config_digest(a) == config_digest(b)
        b.seed = 99
        assert config_digest(a) != config_digest(b)

    def test_digest_ignores_threads_and_out_dir(self):
        a = RunConfig()
        b = RunConfig()
        b.threads = 8
        b.out_dir = "elsewhere"
        assert config_digest(a) == config_digest(b)


class TestPersist:
    def test_csv_round_trip_with_metadata(self, tmp_path):
        path = tmp_path / "t.csv"
        write_csv(path, ("a", "b"), [(1, 2.5), (3, 4.0)], {"seed": 7})
        text = path.read_text()
        assert text.startswith("# seed=7\n")
        header, rows = read_csv(path)
        assert header == ["a", "b"]
        assert rows == [["1", "2.5"], ["3", "4.0"]]

    def test_float_formatting_round_trips_exactly(self, tmp_path):
        value = 0.1 + 0.2  # not representable prettily
        path = write_csv(tmp_path / "f.csv", ("x",), [(value,)], {})
        _, rows = read_csv(path)
        assert float(rows[0][0]) == value

    def test_json_includes_meta(self, tmp_path):
        path = write_json(tmp_path / "r.json", {"answer": 42}, {"seed": 1})
        import json

        payload = json.loads(path.read_text())
        assert payload["_meta"]["seed"] == 1
        assert payload["answer"] == 42

    def test_sample_csv_reader(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text(
            "# seed=5\n"
            "alpha,beta,total_confirmed,failed\n"
            "0.1,1.9,50000.0,0\n"
            "0.12,2.1,,1\n"
        )
        names, X, y, failed = read_sample_csv(path)
        assert names == ["alpha", "beta"]
        assert X.shape == (2, 2)
        assert y[0] == 50000.0 and np.isnan(y[1])
        assert failed.tolist() == [False, True]

    def test_sample_csv_requires_output_column(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("alpha,beta\n0.1,1.9\n")
        with pytest.raises(MissingColumn):
            read_sample_csv(path)

    def test_empty_csv_rejected(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("# only a comment\n")
        with pytest.raises(MalformedRow):
            read_csv(path)
