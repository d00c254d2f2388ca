import csv
import json

import pytest

import harness
from errors import ExperimentInvariantError, ParseError, UsageError
from harness import (CSV_HEADER, ExperimentConfig, ExperimentRow, gap_report,
                     main, run_experiment, trial_seed, write_experiment)
from instance import Instance, parse, serialize
from scenarios import LONE_PACKET, LONE_PACKET_SCHEDULE
from schemes import SCHEME_TYPES

SMALL = dict(k=3, n_values=(6, 8), trials=5, seed=7)


@pytest.fixture
def lone_packet_file(tmp_path):
    path = tmp_path / "lone_packet.json"
    path.write_text(serialize(LONE_PACKET), encoding="utf-8")
    return path


def write_doc(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


# ─── EXPERIMENTS ─────────────────────────────────────────────────────

class TestExperiment:
    def test_trial_seed(self):
        assert trial_seed(2010, 10, 0) == trial_seed(2010, 10, 0)
        assert trial_seed(2010, 10, 0) != trial_seed(2010, 10, 1)
        assert trial_seed(2010, 10, 0) != trial_seed(2010, 20, 0)

    def test_curves_are_ordered(self):
        config = ExperimentConfig(schemes=harness.CURVES, mc_samples=20, **SMALL)
        for row in run_experiment(config):
            assert row.means["lower"] <= row.means["ie"] <= row.means["upper_leader"] <= row.n
            assert row.means["lower"] <= row.means["random_exact"] <= row.n
            assert row.means["trivial"] == row.n

    def test_deterministic(self):
        config = ExperimentConfig(**SMALL)
        first = [r.cells() for r in run_experiment(config)]
        second = [r.cells() for r in run_experiment(config)]
        assert first == second

    def test_full_density_needs_nothing(self):
        config = ExperimentConfig(k=3, n_values=(6,), trials=3, density=1.0)
        (row,) = run_experiment(config)
        assert row.cells() == [
            "6", "3", "3", "0.0000",
            "0.0000", "0.0000",
            "0.0000", "0.0000",
            "0.0000", "0.0000",
            "6",
            "0.0000", "0.0000",
        ]

    def test_single_trial_has_zero_spread(self):
        (row,) = run_experiment(ExperimentConfig(k=3, n_values=(5,), trials=1))
        assert all(sd == 0.0 for sd in row.sds.values())

    def test_raw_instances(self):
        config = ExperimentConfig(normalize=False, **SMALL)
        assert all(r.u_mean == 0.0 for r in run_experiment(config))

    def test_excluded_curves_leave_blank_cells(self):
        config = ExperimentConfig(schemes=("lower", "ie"), **SMALL)
        cells = run_experiment(config)[0].cells()
        assert cells[8:] == ["", "", "", "", ""]

    def test_curve_order_violation(self):
        with pytest.raises(ExperimentInvariantError) as exc:
            harness._check_curve_order({"u": 0, "lower": 4, "ie": 3}, LONE_PACKET, 4, 0)
        assert parse(exc.value.instance_document) == LONE_PACKET

    def test_write_experiment(self, tmp_path):
        config = ExperimentConfig(**SMALL)
        rows = run_experiment(config)
        path = tmp_path / "curves.csv"
        write_experiment(rows, config, path)
        with open(path, newline="", encoding="utf-8") as f:
            table = list(csv.reader(f))
        assert table[0] == CSV_HEADER
        assert [r[0] for r in table[1:]] == ["6", "8"]
        meta = read_json(tmp_path / "curves.csv.meta.json")
        assert meta["field_q"] == 3
        assert meta["config"]["seed"] == 7
        assert meta["n_steps"] == [2]

    def test_gap_report(self):
        rows = [
            ExperimentRow(10, 3, 1, 0.0, {"lower": 5.0, "ie": 5.5, "upper_leader": 7.0}, {}),
            ExperimentRow(20, 3, 1, 0.0, {"lower": 10.0, "ie": 10.5, "upper_leader": 13.0}, {}),
        ]
        report = gap_report(rows)
        assert report["ie_gap_mean"] == pytest.approx(0.5)
        assert report["leader_gap_mean"] == pytest.approx(2.5)
        assert report["ie_closer_than_leader"] is True

    @pytest.mark.slow
    def test_workers_match_serial(self):
        serial = run_experiment(ExperimentConfig(**SMALL))
        parallel = run_experiment(ExperimentConfig(workers=2, **SMALL))
        assert [r.cells() for r in serial] == [r.cells() for r in parallel]

    @pytest.mark.slow
    def test_default_sweep(self):
        rows = run_experiment(ExperimentConfig())
        assert [r.n for r in rows] == [10, 20, 30, 40, 50]
        report = gap_report(rows)
        assert report["ie_gap_mean"] >= 0


class TestConfig:
    def test_defaults(self):
        config = ExperimentConfig().validate()
        assert config.field.q == 3
        assert config.n_values == (10, 20, 30, 40, 50)

    def test_from_file(self, tmp_path):
        path = write_doc(tmp_path / "c.json", {"k": 4, "n_values": [5, 10], "trials": 2})
        config = ExperimentConfig.from_file(path)
        assert config.n_values == (5, 10)
        assert config.field.q == 5

    def test_unknown_key(self):
        with pytest.raises(ParseError):
            ExperimentConfig.from_dict({"k": 3, "rounds": 4})

    @pytest.mark.parametrize("doc, key", [
        ({"k": "3"}, "k"),
        ({"n_values": 10}, "n_values"),
        ({"n_values": [10, 2.5]}, "n_values"),
        ({"trials": "5"}, "trials"),
        ({"density": True}, "density"),
        ({"normalize": 1}, "normalize"),
        ({"field_q": 3.0}, "field_q"),
        ({"schemes": "ie"}, "schemes"),
    ])
    def test_mistyped_values(self, tmp_path, doc, key):
        path = write_doc(tmp_path / "c.json", doc)
        with pytest.raises(ParseError, match=f"at {key}"):
            ExperimentConfig.from_file(path)

    def test_null_field_q_allowed(self):
        assert ExperimentConfig.from_dict({"field_q": None}).field.q == 3

    @pytest.mark.parametrize("overrides", [
        {"field_q": 2},
        {"field_q": 4},
        {"trials": 0},
        {"density": 0.0},
        {"n_values": ()},
        {"schemes": ("lower", "median")},
        {"workers": 0},
    ])
    def test_invalid(self, overrides):
        with pytest.raises(UsageError):
            ExperimentConfig(**overrides).validate()


# ─── COMMAND LINE ────────────────────────────────────────────────────

class TestCommands:
    def test_gen_scenario(self, tmp_path):
        out = tmp_path / "inst.json"
        assert main(["gen", "--scenario", "lone_packet", "--out", str(out)]) == 0
        assert parse(out.read_text(encoding="utf-8")) == LONE_PACKET

    def test_gen_random_is_seeded(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(["gen", "--n", "12", "--k", "3", "--seed", "4", "--out", str(a)]) == 0
        assert main(["gen", "--n", "12", "--k", "3", "--seed", "4", "--out", str(b)]) == 0
        assert a.read_text() == b.read_text()
        assert parse(a.read_text()).k == 3

    def test_gen_needs_size(self):
        assert main(["gen", "--n", "5"]) == 1

    def test_bounds(self, lone_packet_file, tmp_path):
        out = tmp_path / "b.json"
        assert main(["bounds", str(lone_packet_file), "--out", str(out)]) == 0
        assert read_json(out) == {
            "lower": 3, "upper_leader": 4, "ie_guarantee": 4, "trivial": 4, "best_leader": 1,
        }

    def test_bounds_to_stdout(self, lone_packet_file, capsys):
        assert main(["bounds", str(lone_packet_file)]) == 0
        assert json.loads(capsys.readouterr().out)["lower"] == 3

    def test_ie(self, lone_packet_file, tmp_path):
        out = tmp_path / "ie.json"
        assert main(["ie", str(lone_packet_file), "--transcript", "--out", str(out)]) == 0
        doc = read_json(out)
        assert doc["total"] == 3
        assert doc["field_q"] == 5
        assert doc["merges"] == [[3, 2, 3]]

    def test_ie_field_too_small(self, lone_packet_file):
        assert main(["ie", str(lone_packet_file), "--q", "3"]) == 1

    def test_leader(self, lone_packet_file, tmp_path):
        out = tmp_path / "leader.json"
        assert main(["leader", str(lone_packet_file), "--leader", "2", "--out", str(out)]) == 0
        assert read_json(out)["total"] == 4

    def test_leader_out_of_range(self, lone_packet_file):
        assert main(["leader", str(lone_packet_file), "--leader", "9"]) == 1

    @pytest.mark.parametrize("tag", sorted(SCHEME_TYPES))
    def test_every_scheme_has_a_subcommand(self, tag):
        command = SCHEME_TYPES[tag]["command"]
        args = harness.build_parser().parse_args([command, "inst.json"])
        assert args.command == command
        if not SCHEME_TYPES[tag]["ordering"]:
            assert args.func is harness.cmd_schedule
            assert args.scheme == tag

    def test_uncoded(self, lone_packet_file, tmp_path):
        out = tmp_path / "u.json"
        assert main(["uncoded", str(lone_packet_file), "--out", str(out)]) == 0
        assert read_json(out)["total"] == 4

    def test_random_order_perm(self, lone_packet_file, tmp_path):
        out = tmp_path / "r.json"
        assert main(["random-order", str(lone_packet_file), "--perm", "1,2,3,4", "--out", str(out)]) == 0
        doc = read_json(out)
        assert doc["total"] == 4
        assert doc["per_step"] == [1, 2, 1, 0]
        assert doc["ordering"] == [1, 2, 3, 4]

    @pytest.mark.parametrize("perm", ["1,2,2,4", "1,2,3", "a,b,c,d", "0,1,2,3"])
    def test_random_order_bad_perm(self, lone_packet_file, perm):
        assert main(["random-order", str(lone_packet_file), "--perm", perm]) == 1

    def test_random_order_average(self, lone_packet_file, tmp_path):
        out = tmp_path / "avg.json"
        assert main(["random-order", str(lone_packet_file), "--out", str(out)]) == 0
        doc = read_json(out)
        assert doc["average"] == pytest.approx(doc["numerator"] / doc["denominator"])

    def test_random_order_samples(self, lone_packet_file, tmp_path):
        out = tmp_path / "mc.json"
        assert main(["random-order", str(lone_packet_file), "--samples", "40", "--seed", "2", "--out", str(out)]) == 0
        assert read_json(out)["samples"] == 40

    def test_perm_and_samples_conflict(self, lone_packet_file):
        assert main(["random-order", str(lone_packet_file), "--perm", "1,2,3,4", "--samples", "4"]) == 1

    def test_oracle_and_cache(self, lone_packet_file, tmp_path, isolated_cache):
        out = tmp_path / "o.json"
        assert main(["oracle", str(lone_packet_file), "--q", "2", "--out", str(out)]) == 0
        assert read_json(out)["tau_star"] == 3
        assert (isolated_cache / "oracle_cache.json").exists()
        # A budget of one node would fail, so this answer comes from the cache
        again = tmp_path / "o2.json"
        assert main(["oracle", str(lone_packet_file), "--q", "2", "--budget", "1", "--out", str(again)]) == 0
        assert read_json(again) == read_json(out)

    def test_oracle_outside_envelope_reports_bracket(self, lone_packet_file, tmp_path):
        out = tmp_path / "o.json"
        # default field for k=4 is GF(5), above the envelope's q <= 3
        assert main(["oracle", str(lone_packet_file), "--no-cache", "--out", str(out)]) == 3
        doc = read_json(out)
        assert doc["tau_star"] is None
        assert doc["field_q"] == 5
        assert doc["bracket"] == [3, 4]

    def test_oracle_budget_lifts_envelope(self, tmp_path):
        path = tmp_path / "wide.json"
        path.write_text(serialize(Instance.from_lists(6, [range(6), range(5)])), encoding="utf-8")
        out = tmp_path / "o.json"
        assert main(["oracle", str(path), "--q", "3", "--no-cache", "--out", str(out)]) == 3
        assert main(["oracle", str(path), "--q", "3", "--budget", "100000", "--no-cache", "--out", str(out)]) == 0
        assert read_json(out)["tau_star"] == 1

    def test_oracle_budget(self, lone_packet_file, tmp_path):
        out = tmp_path / "o.json"
        assert main(["oracle", str(lone_packet_file), "--q", "2", "--budget", "1", "--no-cache", "--out", str(out)]) == 3
        doc = read_json(out)
        assert doc["tau_star"] is None
        assert doc["bracket"] == [3, 4]

    def test_verify(self, lone_packet_file, tmp_path):
        schedule = write_doc(tmp_path / "s.json", LONE_PACKET_SCHEDULE.to_document())
        out = tmp_path / "v.json"
        assert main(["verify", str(lone_packet_file), str(schedule), "--out", str(out)]) == 0
        assert read_json(out)["ok"] is True

    def test_verify_illegal(self, lone_packet_file, tmp_path):
        schedule = write_doc(tmp_path / "s.json", {
            "field_q": 2, "transmissions": [{"sender": 1, "vector": [0, 1, 0, 0]}],
        })
        out = tmp_path / "v.json"
        assert main(["verify", str(lone_packet_file), str(schedule), "--out", str(out)]) == 2
        assert read_json(out)["illegal_rounds"] == [1]

    def test_verify_malformed_schedule(self, lone_packet_file, tmp_path):
        schedule = tmp_path / "s.json"
        schedule.write_text("{oops", encoding="utf-8")
        assert main(["verify", str(lone_packet_file), str(schedule)]) == 1

    def test_verify_oversized_entry(self, lone_packet_file, tmp_path):
        schedule = write_doc(tmp_path / "s.json", {
            "field_q": 2, "transmissions": [{"sender": 2, "vector": [0, 2**70, 0, 0]}],
        })
        assert main(["verify", str(lone_packet_file), str(schedule)]) == 1

    def test_simulate(self, lone_packet_file, tmp_path):
        schedule = write_doc(tmp_path / "s.json", LONE_PACKET_SCHEDULE.to_document())
        out = tmp_path / "sim.json"
        assert main(["simulate", str(lone_packet_file), str(schedule), "--seed", "3", "--out", str(out)]) == 0
        assert read_json(out)["all_decoded"] is True

    def test_simulate_unsatisfied(self, lone_packet_file, tmp_path):
        schedule = write_doc(tmp_path / "s.json", {"field_q": 2, "transmissions": []})
        assert main(["simulate", str(lone_packet_file), str(schedule)]) == 2

    def test_experiment(self, tmp_path):
        out = tmp_path / "curves.csv"
        args = ["experiment", "--k", "3", "--n", "5,7", "--trials", "3", "--seed", "1",
                "--curves", "lower,ie,upper_leader,trivial,random_mc", "--samples", "10",
                "--out", str(out)]
        assert main(args) == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == ",".join(CSV_HEADER)
        assert len(lines) == 3
        assert (tmp_path / "curves.csv.meta.json").exists()

    def test_experiment_bad_n(self):
        assert main(["experiment", "--n", "10,x"]) == 1

    @pytest.mark.parametrize("doc", [{"k": "3"}, {"n_values": 10}, {"trials": "5"}])
    def test_experiment_mistyped_config(self, tmp_path, capsys, doc):
        cfg = write_doc(tmp_path / "cfg.json", doc)
        assert main(["experiment", "--config", str(cfg)]) == 1
        assert "cfg.json" in capsys.readouterr().err

    def test_missing_instance(self, tmp_path):
        assert main(["bounds", str(tmp_path / "nope.json")]) == 1

    def test_malformed_instance(self, tmp_path):
        bad = write_doc(tmp_path / "bad.json", {"n": 2, "clients": [[1], [1]]})
        assert main(["bounds", str(bad)]) == 1

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 1
