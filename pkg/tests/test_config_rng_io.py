import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fdmimo.config import ConfigError, SimConfig, config_hash, load_config
from fdmimo.io import provenance_line, read_csv, write_csv, write_json
from fdmimo.rng import purpose_tag, stream


class TestRng:
    def test_reproducible(self):
        assert np.array_equal(stream(4, "x", 1, 2).random(5), stream(4, "x", 1, 2).random(5))

    def test_streams_differ(self):
        a = stream(4, "x", 1, 2).random(3)
        for other in (stream(5, "x", 1, 2), stream(4, "y", 1, 2), stream(4, "x", 2, 1), stream(4, "x", 1)):
            assert not np.array_equal(a, other.random(3))

    def test_negative(self):
        with pytest.raises(ValueError):
            stream(-1, "x")
        with pytest.raises(ValueError):
            stream(1, "x", -3)

    def test_tag_stable(self):
        import zlib
        assert purpose_tag("channel") == zlib.crc32(b"channel")

    @given(st.integers(0, 2**40), st.integers(0, 1000), st.integers(1, 50))
    def test_order_independent(self, seed, i, n):
        # consuming one stream never shifts another
        first = stream(seed, "p", i + 1).random(4)
        stream(seed, "p", i).random(n)
        assert np.array_equal(first, stream(seed, "p", i + 1).random(4))


class TestConfig:
    def test_defaults(self):
        cfg = load_config({})
        assert cfg.sim.n_sites == 19 and cfg.sim.ues_per_cell == 10
        assert cfg.feedback.report_period_ms == 5 and cfg.feedback.delay_ms == 6
        assert cfg.traffic.packet_bytes == 500_000
        assert cfg.array.n_elements == 64 and cfg.txru.L == 16
        assert cfg.scenario.carrier_freq == 2.0e9

    @pytest.mark.parametrize("bad", [
        {"foo": 1},
        {"sim": {"n_subframe": 10}},
        {"array": {"M": 8, "Q": 2}},
        {"txru": {"grid": {"NV": 2, "NX": 8}}},
        {"scenario": {"isd_m": 3}},
        {"feedback": {"feedback_class": "C"}},
        {"traffic": {"kind": "ftp", "arrival_rate": 0}},
        {"sim": {"n_sites": 5}},
        {"sim": {"n_sites": 7}},  # wraparound needs 19
        {"txru": {"L": 12, "grid": {"NV": 2, "NH": 8}}},
        {"txru": {"L": 24, "grid": {"NV": 3, "NH": 8}}},
        {"feedback": {"feedback_class": "B", "N_B": 0}},
        {"feedback": {"feedback_class": "B"}, "array": {"P": 1}, "txru": {"grid": {"NV": 2, "NH": 8}}},
        {"array": {"carrier_hz": 3.5e9}, "scenario": {"carrier_freq": 2e9}},
        {"sim": {"ues_per_cell": 0}},
        {"feedback": {"beam_elevations_deg": [1, 2]}},
    ])
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_round_trip_and_hash(self):
        d = {"array": {"M": 4, "dv_lambda": 0.5}, "txru": {"L": 8, "grid": {"NV": 1, "NH": 8}},
             "feedback": {"feedback_class": "B2", "N_B": 4},
             "traffic": {"kind": "ftp", "arrival_rate": 1.5}, "sim": {"n_subframes": 50}}
        cfg = load_config(d)
        again = SimConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again == cfg
        assert config_hash(again) == config_hash(cfg)
        assert config_hash(load_config({})) != config_hash(cfg)

    def test_file_and_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"sim": {"n_subframes": 3}}')
        assert load_config(str(p)).sim.n_subframes == 3
        p.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(str(p))

    def test_umi_and_35ghz(self):
        cfg = load_config({"scenario": {"kind": "UMi3D"}, "array": {"carrier_hz": 3.5e9}})
        assert cfg.scenario.isd == 200 and cfg.scenario.carrier_freq == 3.5e9


class TestIo:
    def test_provenance(self):
        line = provenance_line("abc", [1, 2], x=3)
        assert line.startswith("# fdmimo ") and "config=abc" in line and "seed=1,2" in line and "x=3" in line

    def test_csv_round_trip(self, tmp_path):
        p = tmp_path / "sub" / "t.csv"
        write_csv(p, ["a", "b"], [(1, 0.1), {"a": np.int64(2), "b": np.float64(1 / 3)}], "# prov")
        prov, header, rows = read_csv(p)
        assert prov == "# prov" and header == ["a", "b"]
        assert rows == [["1", "0.1"], ["2", repr(1 / 3)]]
        assert float(rows[1][1]) == 1 / 3
        assert not [f for f in p.parent.iterdir() if f.name.startswith(".tmp")]

    def test_empty_csv(self, tmp_path):
        p = tmp_path / "e.csv"
        p.write_text("# only\n")
        with pytest.raises(ValueError):
            read_csv(p)

    def test_json(self, tmp_path):
        p = tmp_path / "x.json"
        write_json(p, {"b": 1, "a": [1.5]})
        assert json.loads(p.read_text()) == {"a": [1.5], "b": 1}
