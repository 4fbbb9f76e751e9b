import json

import numpy as np
import pytest

from mdpmetrics import FiniteMdp, ToySpec, toy_mdp, validate_mdp
from mdpmetrics.cli import (
    FORMAT_VERSION,
    MdpDocumentError,
    load_mdp_document,
    main,
    save_mdp_document,
)

from _support import random_mdp, toy_threshold_values


def absorbing_pair():
    rewards = np.array([[0.0], [1.0]])
    transitions = np.array([[[1.0, 0.0]], [[0.0, 1.0]]])
    return FiniteMdp(rewards=rewards, transitions=transitions, actions=("stay",))


def write_model(tmp_path, mdp, name="model.json", labels=None):
    path = tmp_path / name
    save_mdp_document(path, mdp, state_labels=labels)
    return str(path)


class TestDocumentRoundTrip:
    def test_bit_exact_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        mdp = random_mdp(rng, 5, 3)
        path = write_model(tmp_path, mdp, labels=["s%d" % k for k in range(5)])
        loaded, labels = load_mdp_document(path)
        np.testing.assert_array_equal(loaded.rewards, mdp.rewards)
        np.testing.assert_array_equal(loaded.transitions, mdp.transitions)
        assert loaded.actions == mdp.actions
        assert labels == ["s0", "s1", "s2", "s3", "s4"]

    def test_format_version_is_written(self, tmp_path):
        path = write_model(tmp_path, absorbing_pair())
        doc = json.loads(open(path).read())
        assert doc["format_version"] == FORMAT_VERSION

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.pop("rewards"),
            lambda d: d.pop("format_version"),
            lambda d: d.update(format_version=99),
            lambda d: d.update(n_states=3),
            lambda d: d.update(actions=[]),
            lambda d: d.update(rewards=[[0.0], [0.0], [0.0]]),
            lambda d: d.update(transitions="nope"),
            lambda d: d.update(state_labels=["only-one"]),
        ],
    )
    def test_structural_problems_raise_document_errors(self, tmp_path, mutate):
        path = write_model(tmp_path, absorbing_pair())
        doc = json.loads(open(path).read())
        mutate(doc)
        with open(path, "w") as fh:
            json.dump(doc, fh)
        with pytest.raises(MdpDocumentError):
            load_mdp_document(path)

    def test_garbage_is_a_document_error(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{ not json")
        with pytest.raises(MdpDocumentError):
            load_mdp_document(str(path))


class TestValidateCommand:
    def test_valid_file_exits_zero(self, tmp_path, capsys):
        path = write_model(tmp_path, absorbing_pair())
        assert main(["validate", path]) == 0
        assert capsys.readouterr().out == "ok\n"

    def test_bad_row_sum_exits_one_and_names_the_row(self, tmp_path, capsys):
        mdp = absorbing_pair()
        broken = FiniteMdp(
            rewards=mdp.rewards,
            transitions=np.array([[[0.5, 0.4]], [[0.0, 1.0]]]),
            actions=mdp.actions,
        )
        path = write_model(tmp_path, broken)
        assert main(["validate", path]) == 1
        out = capsys.readouterr().out
        assert "state 0 action 0" in out and "row sum" in out

    def test_malformed_document_exits_two(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[1, 2]")
        assert main(["validate", str(path)]) == 2

    def test_missing_file_exits_two(self, tmp_path):
        assert main(["validate", str(tmp_path / "absent.json")]) == 2


class TestSolveCommand:
    def test_absorbing_pair_values(self, tmp_path, capsys):
        path = write_model(tmp_path, absorbing_pair())
        # epsilon well below the print resolution so the rounding is stable
        assert main(["solve", path, "-g", "0.5", "-e", "1e-12"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines == ["0 0.000000000 stay", "1 2.000000000 stay"]

    def test_state_labels_are_used(self, tmp_path, capsys):
        path = write_model(tmp_path, absorbing_pair(), labels=["lo", "hi"])
        main(["solve", path, "-g", "0.5"])
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("lo ") and lines[1].startswith("hi ")

    def test_grid_values_near_quarter_and_three_quarters(self, tmp_path, capsys):
        # the two grid cells nearest 0.25 and 0.75 at n = 100; exact values
        # from the threshold oracle (about 1.502/1.512 and 1.49/1.51)
        path = write_model(tmp_path, toy_mdp(ToySpec(100)))
        assert main(["solve", path, "-g", "0.5"]) == 0
        lines = capsys.readouterr().out.splitlines()
        got = np.array([float(line.split()[1]) for line in lines])
        exact = toy_threshold_values(100, 0.5)
        assert np.abs(got - exact).max() <= 1e-6
        assert got[25] == pytest.approx(1.502340425531554, abs=1e-6)
        assert got[74] == pytest.approx(1.49, abs=1e-6)
        assert got[75] == pytest.approx(1.51, abs=1e-6)

    def test_invalid_model_exits_one(self, tmp_path):
        broken = FiniteMdp(
            rewards=np.zeros((1, 1)), transitions=np.array([[[0.7]]])
        )
        path = write_model(tmp_path, broken)
        assert main(["solve", path, "-g", "0.5"]) == 1

    def test_out_of_range_discount_exits_one(self, tmp_path):
        path = write_model(tmp_path, absorbing_pair())
        assert main(["solve", path, "-g", "1.5"]) == 1


class TestMetricCommand:
    def test_absorbing_pair_distance(self, tmp_path, capsys):
        path = write_model(tmp_path, absorbing_pair())
        assert main(["metric", path, "-c", "0.5", "-e", "1e-6"]) == 0
        lines = capsys.readouterr().out.splitlines()
        table = [list(map(float, line.split())) for line in lines[:2]]
        assert abs(table[0][1] - 2.0) <= 1e-6
        assert table[0][0] == 0.0
        assert lines[2].startswith("certified_error <= ")

    def test_single_state_table(self, tmp_path, capsys):
        mdp = FiniteMdp(rewards=np.array([[0.4]]), transitions=np.array([[[1.0]]]))
        path = write_model(tmp_path, mdp)
        assert main(["metric", path, "-c", "0.9"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "0.000000000"

    def test_grid_distances_match_closed_form(self, tmp_path, capsys):
        path = write_model(tmp_path, toy_mdp(ToySpec(10)))
        assert main(["metric", path, "-c", "0.5", "-e", "1e-6"]) == 0
        lines = capsys.readouterr().out.splitlines()
        table = np.array([list(map(float, line.split())) for line in lines[:10]])
        k = np.arange(10)
        closed = np.abs(k[:, None] - k[None, :]) / 5.0
        assert np.abs(table - closed).max() <= 2e-6

    def test_output_is_byte_deterministic(self, tmp_path, capsys):
        path = write_model(tmp_path, random_mdp(np.random.default_rng(1), 4, 2))
        main(["metric", path, "-c", "0.5"])
        first = capsys.readouterr().out
        main(["metric", path, "-c", "0.5"])
        assert capsys.readouterr().out == first


class TestAggregateCommand:
    def test_grid_report_and_quotient_file(self, tmp_path, capsys):
        path = write_model(tmp_path, toy_mdp(ToySpec(100)))
        out_path = str(tmp_path / "quotient.json")
        code = main(
            ["aggregate", path, "-g", "0.5", "-c", "0.5", "-e", "0.1", "-o", out_path]
        )
        assert code == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "block,size,diameter,value_spread_bound"
        body = [line for line in lines[1:] if not line.startswith("#")]
        footer = [line for line in lines[1:] if line.startswith("#")]
        assert len(body) == 34
        for line in body:
            block, size, diameter, bound = line.split(",")
            assert float(diameter) <= 0.1
            assert float(diameter) == float(bound)
        assert any("max_diameter" in line for line in footer)
        assert any("empirical_value_error" in line for line in footer)
        assert any("certified_metric_error" in line for line in footer)
        quotient, _ = load_mdp_document(out_path)
        assert quotient.n_states == 34
        assert validate_mdp(quotient) == []

    def test_huge_epsilon_gives_one_block(self, tmp_path, capsys):
        path = write_model(tmp_path, toy_mdp(ToySpec(10)))
        # metric maximum is 1.8 at c = 0.5; anything above twice that merges all
        assert main(["aggregate", path, "-g", "0.5", "-c", "0.5", "-e", "4.0"]) == 0
        lines = capsys.readouterr().out.splitlines()
        body = [line for line in lines[1:] if not line.startswith("#")]
        assert len(body) == 1
        assert body[0].split(",")[1] == "10"

    def test_tiny_epsilon_keeps_identity(self, tmp_path, capsys):
        path = write_model(tmp_path, toy_mdp(ToySpec(10)))
        # minimum nonzero distance is 0.2; stay below it
        assert main(["aggregate", path, "-g", "0.5", "-c", "0.5", "-e", "0.05"]) == 0
        lines = capsys.readouterr().out.splitlines()
        body = [line for line in lines[1:] if not line.startswith("#")]
        assert len(body) == 10
        assert all(line.split(",")[1] == "1" for line in body)

    def test_gamma_above_c_exits_one(self, tmp_path):
        path = write_model(tmp_path, toy_mdp(ToySpec(4)))
        assert main(["aggregate", path, "-g", "0.9", "-c", "0.5", "-e", "0.1"]) == 1


class TestToyCommand:
    def test_csv_shape_and_certified_bound(self, capsys):
        assert main(["toy", "4", "10", "-g", "0.5", "-c", "0.5"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "n,max_metric_dev,max_value_dev,certified_bound"
        rows = [line.split(",") for line in lines[1:]]
        assert [r[0] for r in rows] == ["4", "10"]
        assert rows[0][3] == "0.500000000"
        assert rows[1][3] == "0.200000000"

    def test_four_cell_row_reports_the_known_bias(self, capsys):
        main(["toy", "4"])
        row = capsys.readouterr().out.splitlines()[1].split(",")
        assert float(row[1]) <= 1e-6
        assert float(row[2]) == pytest.approx(0.0073593128807148, abs=2e-9)

    def test_single_cell_row(self, capsys):
        main(["toy", "1"])
        row = capsys.readouterr().out.splitlines()[1].split(",")
        assert float(row[1]) == 0.0
        assert float(row[2]) == pytest.approx(0.2573593128807148, abs=2e-9)

    def test_writes_model_file(self, tmp_path, capsys):
        out_path = str(tmp_path / "toy.json")
        assert main(["toy", "4", "-o", out_path]) == 0
        capsys.readouterr()
        mdp, _ = load_mdp_document(out_path)
        expected = toy_mdp(ToySpec(4))
        np.testing.assert_array_equal(mdp.rewards, expected.rewards)
        np.testing.assert_array_equal(mdp.transitions, expected.transitions)


class TestPerturbCommand:
    def test_identical_files_pass_with_zero_sides(self, tmp_path, capsys):
        path = write_model(tmp_path, absorbing_pair())
        assert main(["perturb", path, path, "-c", "0.5"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines == ["lhs 0.000000000", "rhs 0.000000000", "PASS"]

    def test_reward_shift_bound_is_two_delta_over_gap(self, tmp_path, capsys):
        mdp = absorbing_pair()
        shifted = FiniteMdp(
            rewards=mdp.rewards + np.array([[0.25], [0.0]]),
            transitions=mdp.transitions,
            actions=mdp.actions,
        )
        a = write_model(tmp_path, mdp, "a.json")
        b = write_model(tmp_path, shifted, "b.json")
        assert main(["perturb", a, b, "-c", "0.5"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[1] == "rhs 1.000000000"
        assert lines[2] == "PASS"

    def test_shape_mismatch_exits_one(self, tmp_path):
        a = write_model(tmp_path, absorbing_pair(), "a.json")
        b = write_model(tmp_path, toy_mdp(ToySpec(4)), "b.json")
        assert main(["perturb", a, b, "-c", "0.5"]) == 1


def test_missing_subcommand_is_a_usage_error():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2


def test_version_flag():
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0


def test_console_entry_point_is_wired():
    from importlib.metadata import entry_points

    eps = entry_points(group="console_scripts")
    ours = [ep for ep in eps if ep.name == "mdpmetrics"]
    assert ours and ours[0].value == "mdpmetrics.cli:entry"
