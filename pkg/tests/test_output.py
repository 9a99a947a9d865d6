"""Tests for the CSV, VTK and manifest emitters."""

import hashlib
import json

import numpy as np
import pytest

from fracch.errors import ShapeError
from fracch.grid import StructuredGrid, constant_field, field_from_function
from fracch.observables import TimeSeries
from fracch.output import (emit_field, emit_timeseries, read_timeseries,
                           write_manifest)


class TestTimeseriesCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        t = np.array([0.0, 0.1, 0.2])
        rng = np.random.default_rng(8)
        series = [TimeSeries(t, rng.standard_normal(3), "mass"),
                  TimeSeries(t, np.exp(rng.standard_normal(3)), "energy")]
        p = emit_timeseries(series, tmp_path / "ts.csv")
        back = read_timeseries(p)
        assert set(back) == {"mass", "energy"}
        assert np.array_equal(back["mass"].values, series[0].values)
        assert np.array_equal(back["energy"].values, series[1].values)
        assert np.array_equal(back["mass"].times, t)

    def test_lf_and_utf8(self, tmp_path):
        t = np.array([0.0, 1.0])
        p = emit_timeseries([TimeSeries(t, t, "x")], tmp_path / "ts.csv")
        raw = p.read_bytes()
        assert b"\r" not in raw
        assert raw.decode("utf-8").startswith("time,x\n")

    def test_seventeen_significant_digits(self, tmp_path):
        v = np.array([1.0 / 3.0, np.pi])
        p = emit_timeseries([TimeSeries([0.0, 1.0], v, "x")],
                            tmp_path / "ts.csv")
        body = p.read_text().splitlines()[1]
        assert "3.3333333333333331e-01" in body

    def test_mismatched_time_axes_rejected(self, tmp_path):
        a = TimeSeries([0.0, 1.0], [1.0, 2.0], "a")
        b = TimeSeries([0.0, 2.0], [1.0, 2.0], "b")
        with pytest.raises(ShapeError):
            emit_timeseries([a, b], tmp_path / "ts.csv")


class TestVtkField:
    def test_2d_header(self, tmp_path):
        g = StructuredGrid([4, 3])
        p = emit_field(constant_field(g, 0.5), tmp_path / "f.vtk",
                       label="phi")
        lines = p.read_text().splitlines()
        assert lines[0].startswith("# vtk DataFile")
        assert lines[2] == "ASCII"
        assert lines[3] == "DATASET STRUCTURED_POINTS"
        assert lines[4] == "DIMENSIONS 5 4 1"
        assert lines[7] == "POINT_DATA 20"
        assert lines[8] == "SCALARS phi double 1"
        assert lines[9] == "LOOKUP_TABLE default"
        assert len(lines) == 10 + 20

    def test_node_order_x_fastest(self, tmp_path):
        g = StructuredGrid([2, 2])
        f = field_from_function(g, lambda x, y: x + 10.0 * y)
        p = emit_field(f, tmp_path / "f.vtk")
        vals = [float(v) for v in p.read_text().splitlines()[10:]]
        assert vals[:3] == pytest.approx([0.0, 0.5, 1.0])
        assert vals[3] == pytest.approx(5.0)

    def test_1d_and_3d_dimension_padding(self, tmp_path):
        g1 = StructuredGrid([4])
        p1 = emit_field(constant_field(g1, 0.0), tmp_path / "a.vtk")
        assert "DIMENSIONS 5 1 1" in p1.read_text()
        g3 = StructuredGrid([2, 2, 2])
        p3 = emit_field(constant_field(g3, 0.0), tmp_path / "b.vtk")
        assert "DIMENSIONS 3 3 3" in p3.read_text()

    def test_custom_domain_origin_spacing(self, tmp_path):
        g = StructuredGrid([4], domain=[(-1.0, 1.0)])
        text = emit_field(constant_field(g, 0.0),
                          tmp_path / "c.vtk").read_text()
        origin = [float(v) for v in
                  [ln for ln in text.splitlines()
                   if ln.startswith("ORIGIN")][0].split()[1:]]
        assert origin[0] == -1.0
        spacing = [float(v) for v in
                   [ln for ln in text.splitlines()
                    if ln.startswith("SPACING")][0].split()[1:]]
        assert spacing[0] == pytest.approx(0.5)


class TestManifest:
    def test_hashes_and_sorting(self, tmp_path):
        b = tmp_path / "b.csv"
        a = tmp_path / "a.csv"
        b.write_text("bee\n")
        a.write_text("ay\n")
        m = write_manifest([b, a], tmp_path)
        data = json.loads(m.read_text())
        names = [e["path"] for e in data["artifacts"]]
        assert names == ["a.csv", "b.csv"]
        assert data["artifacts"][0]["sha256"] == hashlib.sha256(
            b"ay\n").hexdigest()

    def test_deterministic_bytes(self, tmp_path):
        f = tmp_path / "x.csv"
        f.write_text("data\n")
        m1 = write_manifest([f], tmp_path).read_bytes()
        m2 = write_manifest([f], tmp_path).read_bytes()
        assert m1 == m2
