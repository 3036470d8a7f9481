import numpy as np
import pytest

from rdcarleman.svgplot import svg_line_plot


def test_writes_wellformed_svg(tmp_path):
    out = tmp_path / "p.svg"
    x = np.linspace(0, 1, 20)
    svg_line_plot(out, [("a", x, np.sin(x)), ("b", x, np.cos(x))],
                  title="demo", xlabel="t", ylabel="v")
    text = out.read_text()
    assert text.startswith("<svg")
    assert text.rstrip().endswith("</svg>")
    assert text.count("<polyline") == 2
    assert "demo" in text and ">t<" in text


def test_deterministic_bytes(tmp_path):
    x = np.linspace(0, 2, 30)
    y = np.exp(-x)
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    svg_line_plot(a, [("e", x, y)], logy=True)
    svg_line_plot(b, [("e", x, y)], logy=True)
    assert a.read_bytes() == b.read_bytes()


def test_logy_drops_nonpositive(tmp_path):
    out = tmp_path / "p.svg"
    x = np.array([0.0, 1.0, 2.0, 3.0])
    y = np.array([1.0, 0.0, -1.0, 10.0])
    svg_line_plot(out, [("a", x, y)], logy=True)
    # only two survivors, still one polyline with two points
    text = out.read_text()
    assert text.count("<polyline") == 1
    assert "1e0" in text and "1e1" in text


def test_all_points_dropped_raises(tmp_path):
    x = np.array([0.0, 1.0])
    with pytest.raises(ValueError, match="drawable"):
        svg_line_plot(tmp_path / "p.svg", [("a", x, np.array([-1.0, 0.0]))],
                      logy=True)


def test_nan_filtered(tmp_path):
    out = tmp_path / "p.svg"
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([1.0, np.nan, 3.0])
    svg_line_plot(out, [("a", x, y)])
    assert out.read_text().count(",") >= 2


def test_flat_curve_does_not_divide_by_zero(tmp_path):
    out = tmp_path / "p.svg"
    x = np.array([0.0, 1.0])
    svg_line_plot(out, [("flat", x, np.array([2.0, 2.0]))])
    assert "<polyline" in out.read_text()
