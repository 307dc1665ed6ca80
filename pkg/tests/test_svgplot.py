import numpy as np
import pytest

from sparsetomo.svgplot import (
    Series,
    anchored_slope_series,
    loglog_svg,
    monomial_series,
    save_svg,
)

X = np.array([10.0, 20.0, 40.0, 80.0])
Y = np.array([1.0, 0.5, 0.25, 0.125])


def test_series_validation():
    Series("ok", X, Y)
    with pytest.raises(ValueError, match="equal-length"):
        Series("bad", X, Y[:2])
    with pytest.raises(ValueError, match="positive"):
        Series("bad", X, np.array([1.0, -0.5, 0.25, 0.125]))
    with pytest.raises(ValueError, match="positive"):
        Series("bad", np.array([0.0, 20.0, 40.0, 80.0]), Y)
    with pytest.raises(ValueError, match="positive"):
        Series("bad", X, np.array([1.0, np.nan, 0.25, 0.125]))
    with pytest.raises(ValueError, match="length mismatch"):
        Series("bad", X, Y, band_lo=Y[:2], band_hi=Y[:2])
    with pytest.raises(ValueError, match="come together"):
        Series("bad", X, Y, band_lo=Y)
    with pytest.raises(ValueError, match="style"):
        Series("bad", X, Y, style="wavy")


def test_svg_deterministic_and_well_formed(tmp_path):
    series = [
        Series("data", X, Y, band_lo=Y * 0.8, band_hi=Y * 1.2),
        monomial_series(X, 10.0, -1.0, "fit"),
        anchored_slope_series(X, Y[0], -1.0, "target"),
    ]
    svg1 = loglog_svg(series, title="decay", xlabel="N", ylabel="distance")
    svg2 = loglog_svg(series, title="decay", xlabel="N", ylabel="distance")
    assert svg1 == svg2
    assert svg1.startswith("<svg ") and svg1.rstrip().endswith("</svg>")
    assert svg1.count("<polyline") == 3
    assert svg1.count("<polygon") == 1
    assert svg1.count("<circle") == len(X)  # markers only on the solid series
    for label in ("data", "fit", "target", "decay", "distance"):
        assert label in svg1
    assert "stroke-dasharray" in svg1

    out = tmp_path / "plot.svg"
    save_svg(out, svg1)
    assert out.read_text() == svg1


def test_empty_plot_rejected():
    with pytest.raises(ValueError, match="nothing to plot"):
        loglog_svg([])


def test_degenerate_single_point():
    svg = loglog_svg([Series("pt", [5.0], [2.0])])
    assert "<circle" in svg


def test_band_clamped_to_floor():
    lo = np.array([1e-30, 0.4, 0.2, 0.1])  # tiny lower edge must not blow the axis
    svg = loglog_svg([Series("d", X, Y, band_lo=lo, band_hi=Y * 1.1)])
    assert "1e-30" not in svg
    assert "<polygon" in svg


def test_reference_series_values():
    mono = monomial_series(X, 2.0, -0.5, "m")
    assert np.allclose(mono.y, 2.0 * X ** -0.5)
    anch = anchored_slope_series(X, 3.0, -1.0, "a")
    assert anch.y[0] == 3.0
    assert np.allclose(anch.y, 3.0 * (X / X[0]) ** -1.0)
    assert mono.style == "dashed" and anch.style == "dotted"
