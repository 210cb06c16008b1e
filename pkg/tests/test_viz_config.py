import xml.etree.ElementTree as ET

import numpy as np
import pytest

from rmanet.config import merge, read_config, write_effective
from rmanet.errors import ConfigError
from rmanet.transformer import TransformParams
from rmanet.viz import render_overlay, transforms_csv


def sample_image(rng):
    return rng.uniform(size=(3, 8, 8)).astype(np.float32)


def test_svg_is_well_formed_xml(rng):
    svg = render_overlay(sample_image(rng), [(0.0, 0.0, 8.0, 8.0), (2.0, 2.0, 6.0, 5.0)])
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")


def test_all_rects_inside_viewport(rng):
    boxes = [(0.0, 0.0, 8.0, 8.0), (1.5, 2.5, 7.0, 8.0)]
    svg = render_overlay(sample_image(rng), boxes)
    root = ET.fromstring(svg)
    for rect in root:
        x = float(rect.get("x"))
        y = float(rect.get("y"))
        w = float(rect.get("width"))
        h = float(rect.get("height"))
        assert 0.0 <= x and 0.0 <= y
        assert x + w <= 8.0 + 1e-9 and y + h <= 8.0 + 1e-9


def test_svg_bytes_deterministic(rng):
    img = sample_image(rng)
    boxes = [(1.0, 1.0, 5.0, 5.0)]
    assert render_overlay(img, boxes) == render_overlay(img, boxes)


def test_distinct_colors_per_region(rng):
    svg = render_overlay(sample_image(rng), [(0, 0, 2, 2)] * 3)
    strokes = [line.split('stroke="')[1].split('"')[0] for line in svg.splitlines() if "stroke=" in line]
    assert len(set(strokes)) == 3


def test_transforms_csv_format():
    rows = transforms_csv([TransformParams.identity(), TransformParams(0.5, 0.4, -0.1, 0.2)]).splitlines()
    assert rows[0] == "k,sx,sy,tx,ty"
    assert rows[1].startswith("1,1.000000,1.000000")
    assert rows[2] == "2,0.500000,0.400000,-0.100000,0.200000"


class TestConfigFile:
    def test_parse_types(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 9\nlr = 0.01\nchannels = 8,16,16\ncell_tanh = true\n# note\n\n")
        cfg = read_config(str(path))
        assert cfg == {"seed": 9, "lr": 0.01, "channels": (8, 16, 16), "cell_tanh": True}

    def test_unknown_key_rejected_with_line(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 1\nwarmup = 5\n")
        with pytest.raises(ConfigError) as e:
            read_config(str(path))
        assert "line 2" in str(e.value) and "warmup" in str(e.value)

    def test_bad_value_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("epochs = soon\n")
        with pytest.raises(ConfigError):
            read_config(str(path))

    def test_missing_file_rejected(self):
        with pytest.raises(ConfigError):
            read_config("/nonexistent/run.cfg")

    def test_merge_precedence(self):
        merged = merge({"seed": 1, "lr": 0.1}, {"seed": 2}, {"seed": None, "lr": 0.5})
        assert merged == {"seed": 2, "lr": 0.5}

    def test_effective_config_written(self, tmp_path):
        write_effective({"seed": 3, "channels": (1, 2)}, str(tmp_path))
        text = (tmp_path / "config.txt").read_text()
        assert "channels = 1,2" in text and "seed = 3" in text
