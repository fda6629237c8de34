"""CLI: subcommand behavior, exit codes, and byte-stable outputs."""

from __future__ import annotations

import pytest

from congame.cli import main
from congame.data import FeedbackLevel, load as load_dataset
from congame.formats import save_game, save_rho
from congame.game import noisy_variant
from congame.instances import build


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def game2_files(tmp_path):
    inst = build("game2")
    game_path = tmp_path / "game.txt"
    rho_path = tmp_path / "rho.txt"
    save_game(inst.game, str(game_path))
    save_rho(inst.rho, str(rho_path))
    return inst, str(game_path), str(rho_path)


class TestValidate:
    def test_echoes_canonical_text_and_hash(self, capsys, game2_files):
        _, game_path, rho_path = game2_files
        code, out, err = run(capsys, "validate", "--game", game_path, "--rho", rho_path)
        assert code == 0
        assert out.startswith("rho_entries 20\ncongame-game v1\n")
        assert "game_hash " in out
        assert err == ""

    def test_bad_file_exits_one(self, capsys, tmp_path):
        bad = tmp_path / "bad.txt"
        bad.write_text("not a game\n")
        code, _, err = run(capsys, "validate", "--game", str(bad))
        assert code == 1
        assert "error:" in err

    def test_missing_file_exits_one(self, capsys, tmp_path):
        code, _, err = run(capsys, "validate", "--game", str(tmp_path / "absent.txt"))
        assert code == 1
        assert "error:" in err


class TestUsage:
    def test_missing_required_argument(self, capsys):
        code, _, err = run(capsys, "validate")
        assert code == 1
        assert "usage error:" in err

    def test_unknown_command(self, capsys):
        code, _, err = run(capsys, "frobnicate")
        assert code == 1
        assert "usage error:" in err


class TestCollect:
    def test_collect_writes_a_loadable_dataset(self, capsys, game2_files, tmp_path):
        inst, game_path, rho_path = game2_files
        out_path = tmp_path / "data.txt"
        code, out, _ = run(
            capsys,
            "collect",
            "--game", game_path,
            "--rho", rho_path,
            "--level", "facility",
            "-n", "30",
            "--seed", "5",
            "--out", str(out_path),
        )
        assert code == 0
        assert "records 30" in out
        dataset = load_dataset(str(out_path), game=inst.game)
        assert len(dataset) == 30
        assert not dataset.hash_mismatch

    def test_reruns_are_byte_identical(self, capsys, game2_files, tmp_path):
        _, game_path, rho_path = game2_files
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        for target in (a, b):
            code, _, _ = run(
                capsys,
                "collect",
                "--game", game_path,
                "--rho", rho_path,
                "--level", "agent",
                "-n", "25",
                "--seed", "9",
                "--out", str(target),
            )
            assert code == 0
        assert a.read_bytes() == b.read_bytes()


class TestFitAndSolve:
    def make_dataset(self, capsys, game_path, rho_path, tmp_path, level="facility", n="40"):
        data_path = tmp_path / f"data-{level}.txt"
        code, _, _ = run(
            capsys,
            "collect",
            "--game", game_path,
            "--rho", rho_path,
            "--level", level,
            "-n", n,
            "--seed", "3",
            "--out", str(data_path),
        )
        assert code == 0
        return str(data_path)

    def test_fit_writes_a_model_summary(self, capsys, game2_files, tmp_path):
        _, game_path, rho_path = game2_files
        data_path = self.make_dataset(capsys, game_path, rho_path, tmp_path)
        model_path = tmp_path / "model.txt"
        code, out, _ = run(capsys, "fit", "--data", data_path, "--out", str(model_path))
        assert code == 0
        assert "records 40" in out
        assert model_path.read_text().startswith("congame-model v1\nkind facility\n")

    def test_solve_with_oracle_reports_the_true_gap(self, capsys, tmp_path):
        # one-unit exploration of game2 keeps the certificate's profile at a
        # genuine equilibrium once enough records arrive
        from congame.coverage import one_unit_deviation_policy
        from congame.instances import lexicographic_first_ne

        inst = build("game2")
        rho = one_unit_deviation_policy(inst.game, lexicographic_first_ne(inst.game))
        game_path, rho_path = tmp_path / "g.txt", tmp_path / "r.txt"
        save_game(inst.game, str(game_path))
        save_rho(rho, str(rho_path))
        data_path = self.make_dataset(capsys, str(game_path), str(rho_path), tmp_path, n="4000")
        cert_path = tmp_path / "cert.txt"
        code, out, err = run(
            capsys,
            "solve",
            "--data", data_path,
            "--game", str(game_path),
            "--oracle",
            "--out", str(cert_path),
        )
        assert code == 0
        assert err == ""
        assert out.startswith("congame-certificate v1\n")
        assert "true_gap 0.0" in out
        assert cert_path.read_text() == out

    def test_solve_without_game_exits_one(self, capsys, game2_files, tmp_path):
        _, game_path, rho_path = game2_files
        data_path = self.make_dataset(capsys, game_path, rho_path, tmp_path)
        code, _, err = run(capsys, "solve", "--data", data_path)
        assert code == 1
        assert "needs --game" in err

    def test_solve_warns_on_hash_mismatch(self, capsys, game2_files, tmp_path):
        _, game_path, rho_path = game2_files
        data_path = self.make_dataset(capsys, game_path, rho_path, tmp_path)
        other_path = tmp_path / "other.txt"
        save_game(build("game1").game, str(other_path))
        code, _, err = run(
            capsys, "solve", "--data", data_path, "--game", str(other_path)
        )
        assert code == 0
        assert "warning: dataset was not collected from this game file" in err

    def test_tiny_cap_exits_three(self, capsys, game2_files, tmp_path):
        _, game_path, rho_path = game2_files
        data_path = self.make_dataset(capsys, game_path, rho_path, tmp_path)
        code, _, err = run(
            capsys,
            "solve",
            "--data", data_path,
            "--game", game_path,
            "--cap", "3",
        )
        assert code == 3
        assert "resource limit:" in err


class TestCoverage:
    def test_one_unit_kind_reports_the_missing_cell(self, capsys, game2_files):
        _, game_path, rho_path = game2_files
        code, out, _ = run(
            capsys,
            "coverage",
            "--game", game_path,
            "--kind", "one-unit",
            "--rho", rho_path,
        )
        assert code == 0
        assert "feasible=false" in out
        assert "uncovered=cell(0,5)" in out

    def test_facility_kind_with_a_covering_policy(self, capsys, tmp_path):
        from congame.coverage import one_unit_deviation_policy
        from congame.instances import lexicographic_first_ne

        inst = build("game2")
        rho = one_unit_deviation_policy(inst.game, lexicographic_first_ne(inst.game))
        game_path, rho_path = tmp_path / "g.txt", tmp_path / "r.txt"
        save_game(inst.game, str(game_path))
        save_rho(rho, str(rho_path))
        code, out, _ = run(
            capsys,
            "coverage",
            "--game", str(game_path),
            "--kind", "facility",
            "--rho", str(rho_path),
        )
        assert code == 0
        assert "feasible=true" in out
        assert "coefficient=6" in out

    def test_covariance_kind_reads_a_dataset(self, capsys, tmp_path):
        from congame.coverage import one_unit_deviation_policy
        from congame.instances import lexicographic_first_ne

        inst = build("remark44")
        game_path, rho_path = tmp_path / "g.txt", tmp_path / "r.txt"
        save_game(inst.game, str(game_path))
        save_rho(inst.rho, str(rho_path))
        data_path = tmp_path / "d.txt"
        code, _, _ = run(
            capsys,
            "collect",
            "--game", str(game_path),
            "--rho", str(rho_path),
            "--level", "agent",
            "-n", "300",
            "--seed", "0",
            "--out", str(data_path),
        )
        assert code == 0
        code, out, _ = run(
            capsys,
            "coverage",
            "--game", str(game_path),
            "--kind", "covariance",
            "--data", str(data_path),
        )
        assert code == 0
        assert "kind=weak-covariance" in out
        assert "feasible=true" in out

    def test_ne_file_overrides_auto(self, capsys, game2_files, tmp_path):
        _, game_path, rho_path = game2_files
        ne_path = tmp_path / "ne.txt"
        ne_path.write_text("{}|{0}|{0}|{0}|{0}\n")
        code, out, _ = run(
            capsys,
            "coverage",
            "--game", game_path,
            "--kind", "unilateral",
            "--rho", rho_path,
            "--ne", str(ne_path),
        )
        assert code == 0
        assert "kind=unilateral" in out

    def test_missing_rho_for_ratio_kind_exits_one(self, capsys, game2_files):
        _, game_path, _ = game2_files
        code, _, err = run(
            capsys, "coverage", "--game", game_path, "--kind", "facility"
        )
        assert code == 1
        assert "needs --rho" in err


class TestReproduce:
    @pytest.mark.parametrize("level", ["facility", "agent", "game"])
    def test_separation_reproduction_passes(self, capsys, level):
        code, out, _ = run(capsys, "reproduce", "--separation", level)
        assert code == 0
        assert "statistics_identical pass" in out
        assert "ne_disjoint pass" in out
        assert "separation pass" in out
        assert "bound_respected pass" in out

    def test_remark_reproduction_writes_a_table(self, capsys, tmp_path):
        csv_path = tmp_path / "rows.csv"
        code, out, _ = run(
            capsys,
            "reproduce",
            "--remark", "44",
            "--trials", "3",
            "--out-csv", str(csv_path),
        )
        assert code == 0
        assert "verdict pass" in out
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "seed,n,coefficient,threshold,pass"
        assert len(lines) == 4
        assert all(line.endswith(",1") for line in lines[1:])


class TestSweep:
    def write_spec(self, tmp_path):
        spec_path = tmp_path / "spec.txt"
        spec_path.write_text(
            "congame-sweep v1\n"
            "instance game2\n"
            "rho one-unit\n"
            "level facility\n"
            "n_grid 50 100\n"
            "trials 2\n"
            "delta 0.1\n"
            "seed 7\n"
        )
        return str(spec_path)

    def test_sweep_emits_csv_plot_and_medians(self, capsys, tmp_path):
        spec_path = self.write_spec(tmp_path)
        csv_path, svg_path = tmp_path / "rows.csv", tmp_path / "plot.svg"
        code, out, _ = run(
            capsys,
            "sweep",
            "--spec", spec_path,
            "--out-csv", str(csv_path),
            "--out-plot", str(svg_path),
        )
        assert code == 0
        assert out.count("median_gap") == 2
        assert csv_path.read_text().startswith("n,trial,true_gap")
        assert 'id="median-gap"' in svg_path.read_text()

    def test_sweep_outputs_are_byte_identical_across_runs(self, capsys, tmp_path):
        spec_path = self.write_spec(tmp_path)
        outputs = []
        for tag in ("x", "y"):
            csv_path = tmp_path / f"{tag}.csv"
            svg_path = tmp_path / f"{tag}.svg"
            code, out, _ = run(
                capsys,
                "sweep",
                "--spec", spec_path,
                "--out-csv", str(csv_path),
                "--out-plot", str(svg_path),
            )
            assert code == 0
            outputs.append((csv_path.read_bytes(), svg_path.read_bytes(), out))
        assert outputs[0] == outputs[1]

    def test_uncovered_sweep_exits_two_with_a_refusal(self, capsys, tmp_path):
        spec_path = tmp_path / "spec.txt"
        spec_path.write_text(
            "congame-sweep v1\n"
            "instance game2\n"
            "rho instance\n"
            "level facility\n"
            "n_grid 50\n"
            "trials 1\n"
            "delta 0.1\n"
            "seed 7\n"
        )
        code, out, _ = run(
            capsys,
            "sweep",
            "--spec", str(spec_path),
            "--out-csv", str(tmp_path / "r.csv"),
            "--out-plot", str(tmp_path / "p.svg"),
        )
        assert code == 2
        assert out.startswith("refusal=infeasible_coverage\n")
