import re
import xml.etree.ElementTree as ET

import pytest

from vclod.psychofit import PsychometricFit, ResponseTable
from vclod.report import render_svg, write_report

NS = "{http://www.w3.org/2000/svg}"
LEVELS = [50.0, 62.5, 70.0, 77.5, 85.0, 90.0, 95.0]


def sample():
    fits = [PsychometricFit(72.0, 9.0, -40.0, True, 7, "slow", "P01"),
            PsychometricFit(78.0, 11.0, -41.0, True, 7, "slow", "P02"),
            PsychometricFit(80.0, 8.0, -39.0, True, 7, "fast", "P01"),
            PsychometricFit(84.0, 10.0, -42.0, True, 7, "fast", "P02"),
            PsychometricFit(60.0, 30.0, -60.0, False, 7, "fast", "P03", "sigma at upper bound")]
    tables = [ResponseTable(LEVELS, [20] * 7, [10, 11, 13, 15, 17, 19, 20], c, p)
              for c in ("slow", "fast") for p in ("P01", "P02")]
    return fits, tables


def test_svg_parses_and_has_one_panel_per_condition():
    fits, tables = sample()
    root = ET.fromstring(render_svg(fits, tables, seed=5))
    panels = [g for g in root.iter(NS + "g") if g.get("id", "").startswith("panel-")]
    assert [g.get("id") for g in panels] == ["panel-slow", "panel-fast"]


def test_svg_content():
    fits, tables = sample()
    root = ET.fromstring(render_svg(fits, tables))
    # pooled data points: one per level per condition
    assert len(list(root.iter(NS + "circle"))) == 2 * len(LEVELS)
    # individual converged fits + one group curve per condition
    assert len(list(root.iter(NS + "polyline"))) == 4 + 2
    # threshold markers and labels
    assert len(list(root.iter(NS + "path"))) == 2
    labels = [t.text for t in root.iter(NS + "text") if t.text and "threshold" in t.text]
    assert labels == ["75% threshold 75.0", "75% threshold 82.0"]


def test_svg_embeds_seed_and_is_deterministic():
    fits, tables = sample()
    a = render_svg(fits, tables, seed=17)
    assert "seed=17" in a
    assert a == render_svg(fits, tables, seed=17)


def test_threshold_marker_moves_with_p():
    fits, tables = sample()
    svg = render_svg(fits, tables, p=0.9)
    assert re.search(r"90% threshold", svg)


def test_empty_input_rejected():
    with pytest.raises(ValueError):
        render_svg([], [])


def test_write_report(tmp_path):
    fits, tables = sample()
    p = write_report(tmp_path / "pf.svg", fits, tables)
    assert p.read_text().startswith("<svg")
