import xml.etree.ElementTree as ET

import pytest

from sapeval.charts import grouped_bar_chart


def test_valid_xml_and_deterministic():
    svg = grouped_bar_chart(
        ["a", "b", "c"],
        {"one": [1.0, 2.0, 0.5], "two": [0.2, 0.0, 1.5]},
        title="demo <chart>",
        y_label="score",
    )
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    again = grouped_bar_chart(
        ["a", "b", "c"],
        {"one": [1.0, 2.0, 0.5], "two": [0.2, 0.0, 1.5]},
        title="demo <chart>",
        y_label="score",
    )
    assert svg == again


def test_bar_count():
    svg = grouped_bar_chart(["x", "y"], {"s": [3.0, 1.0]})
    root = ET.fromstring(svg)
    ns = "{http://www.w3.org/2000/svg}"
    bars = [
        r for r in root.iter(f"{ns}rect") if r.find(f"{ns}title") is not None
    ]
    assert len(bars) == 2


def test_log_scale_handles_zero():
    svg = grouped_bar_chart(["x", "y"], {"s": [0.0, 1000.0]}, log_scale=True)
    ET.fromstring(svg)


def test_length_mismatch():
    with pytest.raises(ValueError):
        grouped_bar_chart(["x"], {"s": [1.0, 2.0]})


def test_empty_series():
    with pytest.raises(ValueError):
        grouped_bar_chart([], {"s": []})
