import xml.etree.ElementTree as ET

import numpy as np
import pytest

from packhunt.metrics import make_row, write_metrics_csv
from packhunt.plots import emit_plots, moving_average


def write_run_csv(path, totals_by_agent, num_red=4):
    """totals_by_agent: (episodes, num_agents) rewards."""
    rows = [
        make_row(i, rewards, num_red, wall_ms=0.5)
        for i, rewards in enumerate(totals_by_agent)
    ]
    return write_metrics_csv(path, rows)


def polylines(svg_path):
    tree = ET.parse(svg_path)
    ns = {"svg": "http://www.w3.org/2000/svg"}
    return tree.getroot().findall(".//svg:polyline", ns)


def polyline_y_values(node):
    return [float(p.split(",")[1]) for p in node.attrib["points"].split()]


class TestMovingAverage:
    def test_window_one_is_identity(self):
        data = np.array([3.0, -1.0, 4.0, 1.5])
        assert np.array_equal(moving_average(data, 1), data)

    def test_constant_input_stays_constant(self):
        data = np.full(50, 2.5)
        assert np.array_equal(moving_average(data, 7), data)

    def test_centered_window_values(self):
        data = np.array([0.0, 1.0, 2.0, 3.0, 4.0])
        out = moving_average(data, 3)
        assert out[2] == 2.0  # full window
        assert out[0] == 0.5  # shrunk leading edge
        assert out[-1] == 3.5  # shrunk trailing edge

    def test_window_longer_than_series(self):
        data = np.array([1.0, 2.0, 3.0])
        out = moving_average(data, 100)
        assert np.allclose(out, 2.0)

    def test_invalid_window(self):
        with pytest.raises(ValueError):
            moving_average([1.0], 0)


class TestEmitPlots:
    def test_files_are_well_formed_xml(self, tmp_path):
        rng = np.random.default_rng(0)
        csv = write_run_csv(tmp_path / "m.csv", rng.normal(size=(40, 6)))
        written = emit_plots([csv], 5, tmp_path / "plots")
        assert [p.name for p in written] == [
            "total_reward.svg",
            "team_rewards.svg",
            "red_agent_rewards.svg",
        ]
        for path in written:
            root = ET.parse(path).getroot()
            assert root.tag.endswith("svg")

    def test_one_curve_per_series(self, tmp_path):
        rng = np.random.default_rng(1)
        csv_a = write_run_csv(tmp_path / "a.csv", rng.normal(size=(30, 6)))
        csv_b = write_run_csv(tmp_path / "b.csv", rng.normal(size=(30, 6)))
        total, teams, agents = emit_plots([csv_a, csv_b], 5, tmp_path / "plots")
        assert len(polylines(total)) == 2  # one per run
        assert len(polylines(teams)) == 4  # red and green per run
        assert len(polylines(agents)) == 8  # 4 red agents x 2 runs

    def test_constant_rewards_make_a_flat_line(self, tmp_path):
        totals = np.tile(np.array([1.0, 1.0, 1.0, 1.0, -2.0, -2.0]), (25, 1))
        csv = write_run_csv(tmp_path / "flat.csv", totals)
        total, _, _ = emit_plots([csv], 10, tmp_path / "plots")
        for line in polylines(total):
            ys = polyline_y_values(line)
            assert len(set(ys)) == 1

    def test_window_one_plots_raw_values(self, tmp_path):
        rng = np.random.default_rng(2)
        data = rng.normal(size=(20, 6))
        csv = write_run_csv(tmp_path / "raw.csv", data)
        smoothed_dir = tmp_path / "w5"
        raw_dir = tmp_path / "w1"
        (smoothed,), (raw,) = (
            emit_plots([csv], 5, smoothed_dir)[:1],
            emit_plots([csv], 1, raw_dir)[:1],
        )
        assert polyline_y_values(polylines(raw)[0]) != polyline_y_values(
            polylines(smoothed)[0]
        )

    def test_custom_labels_appear_in_legend(self, tmp_path):
        rng = np.random.default_rng(3)
        csv = write_run_csv(tmp_path / "m.csv", rng.normal(size=(15, 6)))
        total, _, _ = emit_plots(
            [csv], 3, tmp_path / "plots", labels=["my favourite run"]
        )
        assert "my favourite run" in total.read_text()

    def test_num_red_inference_failure_is_loud(self, tmp_path):
        # all-zero rewards make every prefix sum match; inference must not guess
        csv = write_run_csv(tmp_path / "z.csv", np.zeros((10, 6)))
        with pytest.raises(ValueError):
            emit_plots([csv], 3, tmp_path / "plots")
        written = emit_plots([csv], 3, tmp_path / "plots", num_red=4)
        assert len(written) == 3

    def test_empty_csv_rejected(self, tmp_path):
        path = write_metrics_csv(tmp_path / "e.csv", [], num_agents=6)
        with pytest.raises(ValueError):
            emit_plots([path], 3, tmp_path / "plots")

    def test_malformed_csv_error_names_file(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("episode,agent_0,red_team,green_team,total,wall_ms\n0,a,b,c,d,e\n")
        with pytest.raises(Exception) as err:
            emit_plots([bad], 3, tmp_path / "plots")
        assert "bad.csv" in str(err.value)
