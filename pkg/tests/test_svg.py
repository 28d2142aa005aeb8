import xml.etree.ElementTree as ET

import pytest

from matcoach.svg import HEIGHT, PALETTE, WIDTH, line_chart


def small_chart():
    series = [
        ("first", [(0.0, 0.2), (10.0, 0.5), (20.0, 0.8)]),
        ("second", [(0.0, 0.9), (10.0, 0.4), (20.0, 0.1)]),
    ]
    return line_chart(series, "demo chart", "threshold", "macro F1")


def test_output_is_well_formed_xml_with_svg_root():
    root = ET.fromstring(small_chart())
    assert root.tag == "{http://www.w3.org/2000/svg}svg"
    assert root.get("width") == str(WIDTH)
    assert root.get("height") == str(HEIGHT)


def test_titles_labels_and_series_names_appear():
    text = small_chart()
    for expected in ("demo chart", "threshold", "macro F1", "first", "second"):
        assert expected in text


def test_each_series_draws_a_polyline_and_markers():
    root = ET.fromstring(small_chart())
    ns = "{http://www.w3.org/2000/svg}"
    polylines = root.findall(f"{ns}polyline")
    circles = root.findall(f"{ns}circle")
    assert len(polylines) == 2
    assert len(circles) == 6
    assert polylines[0].get("stroke") == PALETTE[0]
    assert polylines[1].get("stroke") == PALETTE[1]


def test_single_point_series_has_marker_but_no_polyline():
    text = line_chart([("only", [(1.0, 0.5)])], "t", "x", "y")
    root = ET.fromstring(text)
    ns = "{http://www.w3.org/2000/svg}"
    assert root.findall(f"{ns}polyline") == []
    assert len(root.findall(f"{ns}circle")) == 1


def test_output_is_byte_identical_for_identical_input():
    assert small_chart() == small_chart()


def test_distinct_data_changes_output():
    a = line_chart([("s", [(0.0, 0.1), (1.0, 0.2)])], "t", "x", "y")
    b = line_chart([("s", [(0.0, 0.1), (1.0, 0.3)])], "t", "x", "y")
    assert a != b


def test_reserved_characters_are_escaped():
    text = line_chart(
        [("a<b>&c", [(0.0, 0.0), (1.0, 1.0)])],
        "x & y < z",
        "in<put",
        "out>put",
    )
    ET.fromstring(text)
    assert "a&lt;b&gt;&amp;c" in text
    assert "x &amp; y &lt; z" in text


def test_empty_series_rejected():
    with pytest.raises(ValueError):
        line_chart([], "t", "x", "y")
    with pytest.raises(ValueError):
        line_chart([("s", [])], "t", "x", "y")


def test_auto_range_handles_constant_values():
    text = line_chart([("s", [(0.0, 0.5), (1.0, 0.5)])], "t", "x", "y", y_range=None)
    ET.fromstring(text)


def test_coordinates_use_two_decimal_places():
    root = ET.fromstring(small_chart())
    ns = "{http://www.w3.org/2000/svg}"
    for circle in root.findall(f"{ns}circle"):
        for attr in ("cx", "cy"):
            value = circle.get(attr)
            assert value is not None
            whole, dot, frac = value.partition(".")
            assert dot == "." and len(frac) == 2
