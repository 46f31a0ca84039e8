"""Tests for the settings layer and the key=value text format."""

import json
import math

import pytest

from src.core.errors import SpecValidationError
from src.core.settings import (LabSettings, load_settings, parse_angle, parse_key_value_text, parse_scalar,
                               save_settings)


def test_missing_file_gives_defaults(tmp_path):
    settings = load_settings(tmp_path / "absent.json")
    assert settings == LabSettings()
    assert settings.topology.n_theta == 256
    assert settings.localization.ipr_threshold_factor == 10.0


def test_shipped_config_loads(repo_root):
    settings = load_settings(repo_root / "config" / "lab_config.json")
    assert settings.spectral.left_method in ("adjoint", "lapack")
    assert settings.sweep.workers >= 1


def test_overrides_apply_on_top_of_file(tmp_path):
    path = tmp_path / "lab.json"
    path.write_text(json.dumps({"topology": {"n_theta": 128}}))
    settings = load_settings(path, ["topology.n_theta=64", "spectral.perturb_retry=true"])
    assert settings.topology.n_theta == 64
    assert settings.spectral.perturb_retry is True


def test_unknown_entry_is_named():
    with pytest.raises(SpecValidationError) as info:
        load_settings(None, ["topology.n_thetas=64"])
    assert info.value.key == "topology.n_thetas"


def test_out_of_range_entry_is_named(tmp_path):
    with pytest.raises(SpecValidationError) as info:
        load_settings(tmp_path / "absent.json", ["topology.n_theta=2"])
    assert info.value.key == "topology.n_theta"


def test_override_needs_section():
    with pytest.raises(SpecValidationError):
        load_settings(None, ["n_theta=64"])


def test_invalid_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(SpecValidationError):
        load_settings(path)


def test_save_and_reload(tmp_path):
    settings = load_settings(tmp_path / "absent.json", ["entanglement.n_cutoffs=12"])
    save_settings(settings, tmp_path / "out" / "settings.json")
    assert load_settings(tmp_path / "out" / "settings.json") == settings


@pytest.mark.parametrize("text,expected", [
    ("pi/10", math.pi / 10),
    ("-pi/2", -math.pi / 2),
    ("0.5*pi", math.pi / 2),
    ("2pi", 2 * math.pi),
    ("pi", math.pi),
    ("1.5", 1.5),
    (0.25, 0.25),
])
def test_parse_angle(text, expected):
    assert parse_angle(text) == pytest.approx(expected)


def test_parse_angle_rejects_garbage():
    with pytest.raises(ValueError):
        parse_angle("tau/2")


def test_parse_scalar():
    assert parse_scalar("true") is True
    assert parse_scalar("12") == 12
    assert parse_scalar("1e-3") == pytest.approx(1e-3)
    assert parse_scalar("null") is None
    assert parse_scalar("lapack") == "lapack"


def test_key_value_text():
    pairs = parse_key_value_text("# comment\nkind = Model1\n\nJ=0.5  # trailing\n")
    assert pairs == [("kind", "Model1"), ("J", "0.5")]


def test_key_value_text_rejects_duplicates_and_bare_lines():
    with pytest.raises(SpecValidationError) as info:
        parse_key_value_text("J=1\nJ=2\n")
    assert info.value.key == "J"
    with pytest.raises(SpecValidationError):
        parse_key_value_text("just words\n")
