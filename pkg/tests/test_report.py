import json

import numpy as np

from meyerlab import report


class TestFormatting:
    def test_fmt_number(self):
        assert report.fmt_number(3) == "3"
        assert report.fmt_number(3.0) == "3"
        assert report.fmt_number(0.1) == "0.1"
        assert report.fmt_number(1.0 / 3.0) == "0.333333333333"
        assert report.fmt_number(np.float64(2.5)) == "2.5"

    def test_twelve_significant_digits(self):
        assert report.fmt_number(1.2345678901234567) == "1.23456789012"

    def test_write_csv(self, tmp_path):
        path = tmp_path / "t.csv"
        report.write_csv(path, ["a", "b"], [(1, 2.5), (3.0, 1.0 / 3.0)])
        text = path.read_text()
        assert text == "a,b\n1,2.5\n3,0.333333333333\n"

    def test_write_json_plain_types(self, tmp_path):
        path = tmp_path / "t.json"
        report.write_json(path, {"x": np.float64(1.5), "v": np.arange(3),
                                 "nan": float("nan")})
        data = json.loads(path.read_text())
        assert data == {"nan": None, "v": [0, 1, 2], "x": 1.5}

    def test_manifest_has_no_clock(self, tmp_path):
        path = tmp_path / "m.json"
        report.write_manifest(path, {"experiment": "density"})
        data = json.loads(path.read_text())
        assert set(data) == {"config", "version"}


class TestFigures:
    def test_png_written(self, tmp_path):
        p = tmp_path / "f.png"
        report.fig_bars(["a", "b"], [1.0, 2.0], p)
        blob = p.read_bytes()
        assert blob[:8] == b"\x89PNG\r\n\x1a\n"

    def test_png_deterministic(self, tmp_path):
        a = tmp_path / "a.png"
        b = tmp_path / "b.png"
        report.fig_bars(["a", "b"], [1.0, 2.0], a)
        report.fig_bars(["a", "b"], [1.0, 2.0], b)
        assert a.read_bytes() == b.read_bytes()
