"""Channel/scene/config file formats: round trips and structured errors."""

import json

import numpy as np
import pytest

from conftest import random_components

import risopt as ro
from risopt.fileio import (
    load_components,
    load_ris_config,
    load_scene,
    load_varactor_model,
    read_csv,
    save_components,
    save_ris_config,
    save_scene,
    save_varactor_model,
    write_csv,
)
from risopt.ris import C_OFF, C_ON, DEFAULT_VARACTOR, onebit_configuration
from risopt.ris import column_paired_grouping
from risopt.scene import default_scene, synthesize_components


class TestChannelFile:
    def test_round_trip_is_exact(self, rng, tmp_path):
        comps = random_components(rng)
        path = tmp_path / "channels.json"
        save_components(comps, path)
        loaded = load_components(path)
        assert np.array_equal(loaded.h_u, comps.h_u)
        assert np.array_equal(loaded.h_0, comps.h_0)
        assert np.array_equal(loaded.g_l, comps.g_l)
        assert np.array_equal(loaded.z_ll, comps.z_ll)
        assert loaded.frequency == comps.frequency

    def test_double_round_trip_byte_identical(self, rng, tmp_path):
        comps = random_components(rng)
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        save_components(comps, first)
        save_components(load_components(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_row_count_mismatch_names_field(self, rng, tmp_path):
        comps = random_components(rng, k=3, m=3, n=4)
        path = tmp_path / "channels.json"
        save_components(comps, path)
        doc = json.loads(path.read_text())
        doc["h_u"] = doc["h_u"][:2]  # K=3 header with only 2 rows
        path.write_text(json.dumps(doc))
        with pytest.raises(ro.ChannelFileError, match="h_u"):
            load_components(path)

    def test_asymmetric_z_names_field(self, rng, tmp_path):
        comps = random_components(rng, k=2, m=2, n=4)
        path = tmp_path / "channels.json"
        save_components(comps, path)
        doc = json.loads(path.read_text())
        doc["z_ll"][0][1][0] *= 1.001  # relative 1e-3 asymmetry
        path.write_text(json.dumps(doc))
        with pytest.raises(ro.ChannelFileError, match="z_ll"):
            load_components(path)

    def test_malformed_json_rejected(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ro.ChannelFileError):
            load_components(path)

    def test_missing_field_named(self, rng, tmp_path):
        comps = random_components(rng, k=2, m=2, n=3)
        path = tmp_path / "channels.json"
        save_components(comps, path)
        doc = json.loads(path.read_text())
        del doc["g_l"]
        path.write_text(json.dumps(doc))
        with pytest.raises(ro.ChannelFileError, match="g_l"):
            load_components(path)

    def test_non_pair_entry_rejected(self, rng, tmp_path):
        comps = random_components(rng, k=2, m=2, n=3)
        path = tmp_path / "channels.json"
        save_components(comps, path)
        doc = json.loads(path.read_text())
        doc["h_0"][1][0] = 3.14  # scalar where [re, im] expected
        path.write_text(json.dumps(doc))
        with pytest.raises(ro.ChannelFileError, match="h_0"):
            load_components(path)


class TestSceneFile:
    def test_round_trip_preserves_synthesis(self, tmp_path):
        scene = default_scene(n_ports=6, max_reflection_order=1)
        path = tmp_path / "scene.json"
        save_scene(scene, path)
        loaded = load_scene(path)
        a = synthesize_components(scene)
        b = synthesize_components(loaded)
        assert np.allclose(a.h_u, b.h_u, rtol=1e-12)
        assert np.allclose(a.h_0, b.h_0, rtol=1e-12)
        assert np.allclose(a.g_l, b.g_l, rtol=1e-12)
        assert np.allclose(a.z_ll, b.z_ll, rtol=1e-12)

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "scene.json"
        path.write_text(json.dumps({"frequency_hz": 5.8e9}))
        with pytest.raises(ro.SceneFileError, match="max_order"):
            load_scene(path)

    def test_bad_wall_point_named(self, tmp_path):
        doc = {
            "frequency_hz": 5.8e9,
            "max_order": 1,
            "walls": [{"p1": [0, 0], "p2": "oops"}],
            "bs": [[6, -3]],
            "users": [[1, 1]],
            "ris": {"origin": [0, 0], "n_ports": 2, "spacing": 0.025},
        }
        path = tmp_path / "scene.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ro.SceneFileError, match=r"walls\[0\]"):
            load_scene(path)

    def test_bad_n_ports_rejected(self, tmp_path):
        doc = {
            "frequency_hz": 5.8e9,
            "max_order": 1,
            "walls": [],
            "bs": [[6, -3]],
            "users": [[1, 1]],
            "ris": {"origin": [0, 0], "n_ports": 0},
        }
        path = tmp_path / "scene.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ro.SceneFileError, match="n_ports"):
            load_scene(path)


class TestRisConfigFile:
    def test_round_trip(self, tmp_path):
        grouping = column_paired_grouping(8)
        config = onebit_configuration(grouping, (1, 0, 0, 1), 8)
        path = tmp_path / "config.json"
        save_ris_config(config, path)
        loaded = load_ris_config(path)
        assert loaded.control_mode == config.control_mode
        assert np.allclose(loaded.capacitances, config.capacitances, rtol=1e-12)
        assert loaded.grouping == config.grouping
        assert loaded.c_on == pytest.approx(C_ON)
        assert loaded.c_off == pytest.approx(C_OFF)

    def test_unknown_mode_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"mode": "psychic", "capacitances_pf": [0.5]}))
        with pytest.raises(ro.SceneFileError, match="mode"):
            load_ris_config(path)


class TestVaractorFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "varactor.json"
        save_varactor_model(DEFAULT_VARACTOR, path)
        loaded = load_varactor_model(path)
        assert loaded.c_j == pytest.approx(DEFAULT_VARACTOR.c_j, rel=1e-12)
        assert loaded.v_j == pytest.approx(DEFAULT_VARACTOR.v_j, rel=1e-12)
        assert loaded.r_v == DEFAULT_VARACTOR.r_v
        assert loaded.l_v == pytest.approx(DEFAULT_VARACTOR.l_v, rel=1e-12)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "varactor.json"
        path.write_text(json.dumps({"c_j_pf": 0.2}))
        with pytest.raises(ro.SceneFileError):
            load_varactor_model(path)


class TestCsv:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "table.csv"
        cols = {"a": [1.5, 2.25, float("nan")], "b": [0.1, -3.0, 4.0]}
        write_csv(path, cols, comments=("hello", "world"))
        comments, loaded = read_csv(path)
        assert comments == ["hello", "world"]
        assert loaded["b"] == [0.1, -3.0, 4.0]
        assert loaded["a"][0] == 1.5
        assert np.isnan(loaded["a"][2])

    def test_length_mismatch_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_csv(tmp_path / "bad.csv", {"a": [1.0], "b": [1.0, 2.0]})
