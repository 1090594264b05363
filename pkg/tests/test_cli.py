import json
import math

import pytest

import expertseq as es
from expertseq.cli import main


def write(path, text):
    path.write_text(text, encoding="utf-8")


@pytest.fixture
def data_file(tmp_path):
    p = tmp_path / "data.txt"
    write(p, "0\n0\n1\n0\n")
    return p


BASE = ["--alphabet", "0,1", "--experts", "builtin:const:0.8,0.2;const:0.5,0.5"]


class TestEvaluate:
    def test_bayes_total_matches_hand_mixture(self, tmp_path, data_file):
        out = tmp_path / "out.csv"
        rc = main(["evaluate", str(data_file), "--model", "bayes", *BASE, "--out", str(out)])
        assert rc == 0
        rows = out.read_text().strip().splitlines()
        header = rows[0].split(",")
        assert header[0] == "step"
        total = float(rows[-1].split(",")[-1])
        # hand computation: 1/2 * (0.8*0.8*0.2*0.8) + 1/2 * 0.5^4
        want = -math.log2(0.5 * (0.8 * 0.8 * 0.2 * 0.8) + 0.5 * 0.5 ** 4)
        assert total == pytest.approx(want, rel=1e-10)
        assert len(rows) == 5  # header + 4 steps

    def test_fixed_share_zero_equals_bayes_byte_identical(self, tmp_path, data_file):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["evaluate", str(data_file), "--model", "bayes", *BASE,
                     "--out", str(out1)]) == 0
        assert main(["evaluate", str(data_file), "--model", "fixed-share", "--alpha", "0",
                     *BASE, "--out", str(out2)]) == 0
        body1 = out1.read_text().splitlines()[1:]
        body2 = out2.read_text().splitlines()[1:]
        assert body1 == body2

    def test_deterministic_output(self, tmp_path, data_file):
        out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["evaluate", str(data_file), "--model", "switch", *BASE]
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_json_format_carries_totals(self, tmp_path, data_file):
        out = tmp_path / "out.json"
        assert main(["evaluate", str(data_file), "--model", "bayes", *BASE,
                     "--format", "json", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["n"] == 4
        assert doc["steps"][0]["next_outcome"]["0"] == pytest.approx(0.65, abs=1e-9)

    def test_advice_file_full_mode(self, tmp_path, data_file):
        advice = tmp_path / "advice.csv"
        write(advice, "a,b\n" + "0.8,0.2,0.5,0.5\n" * 4)
        out = tmp_path / "out.csv"
        rc = main(["evaluate", str(data_file), "--model", "bayes", "--alphabet", "0,1",
                   "--experts", f"file:{advice}", "--out", str(out)])
        assert rc == 0
        want = -math.log2(0.5 * (0.8 * 0.8 * 0.2 * 0.8) + 0.5 * 0.5 ** 4)
        total = float(out.read_text().strip().splitlines()[-1].split(",")[-1])
        assert total == pytest.approx(want, rel=1e-10)

    def test_advice_row_count_mismatch_names_row(self, tmp_path, data_file, capsys):
        advice = tmp_path / "advice.csv"
        write(advice, "a,b\n" + "0.8,0.2,0.5,0.5\n" * 3)
        rc = main(["evaluate", str(data_file), "--model", "bayes", "--alphabet", "0,1",
                   "--experts", f"file:{advice}"])
        assert rc == 2
        assert "3" in capsys.readouterr().err

    def test_realized_mode_drops_outcome_columns(self, tmp_path, data_file):
        advice = tmp_path / "advice.csv"
        write(advice, "a,b\n" + "0.8,0.5\n0.8,0.5\n0.2,0.5\n0.8,0.5\n")
        out = tmp_path / "out.csv"
        rc = main(["evaluate", str(data_file), "--model", "bayes", "--alphabet", "0,1",
                   "--experts", f"file:{advice}", "--advice-mode", "realized",
                   "--out", str(out)])
        assert rc == 0
        header = out.read_text().splitlines()[0]
        assert "p_out:" not in header and "p_exp:a" in header
        want = -math.log2(0.5 * (0.8 * 0.8 * 0.2 * 0.8) + 0.5 * 0.5 ** 4)
        total = float(out.read_text().strip().splitlines()[-1].split(",")[-1])
        assert total == pytest.approx(want, rel=1e-10)

    def test_zero_marginal_exit_code(self, tmp_path):
        data = tmp_path / "d.txt"
        write(data, "1\n")
        rc = main(["evaluate", str(data), "--model", "bayes", "--alphabet", "0,1",
                   "--experts", "builtin:const:1,0"])
        assert rc == 3

    def test_bad_symbol_exit_code(self, tmp_path, capsys):
        data = tmp_path / "d.txt"
        write(data, "0\n2\n")
        rc = main(["evaluate", str(data), "--model", "bayes", *BASE])
        assert rc == 2
        assert ":2:" in capsys.readouterr().err

    def test_trim_runs(self, tmp_path, data_file):
        out = tmp_path / "out.csv"
        rc = main(["evaluate", str(data_file), "--model", "run-length", *BASE,
                   "--trim", "0.999", "--out", str(out)])
        assert rc == 0


class TestPosterior:
    def test_single_step_bayes_row(self, tmp_path):
        data = tmp_path / "d.txt"
        write(data, "0\n")
        out = tmp_path / "p.csv"
        assert main(["posterior", str(data), "--model", "bayes", *BASE,
                     "--out", str(out)]) == 0
        rows = out.read_text().strip().splitlines()
        vals = [float(v) for v in rows[1].split(",")]
        assert vals[0] == pytest.approx(0.8 / 1.3, rel=1e-9)
        assert vals[1] == pytest.approx(0.5 / 1.3, rel=1e-9)

    def test_rows_sum_to_one(self, tmp_path, data_file):
        out = tmp_path / "p.csv"
        assert main(["posterior", str(data_file), "--model", "switch", *BASE,
                     "--out", str(out)]) == 0
        for row in out.read_text().strip().splitlines()[1:]:
            assert sum(float(v) for v in row.split(",")) == pytest.approx(1.0, abs=1e-6)

    def test_two_regime_concentration(self, tmp_path):
        data = tmp_path / "d.txt"
        write(data, "0\n" * 8 + "1\n" * 8)
        out = tmp_path / "p.csv"
        assert main(["posterior", str(data), "--model", "switch", "--alphabet", "0,1",
                     "--experts", "builtin:const:0.8,0.2;const:0.2,0.8",
                     "--out", str(out)]) == 0
        rows = out.read_text().strip().splitlines()[1:]
        for row in rows[-6:]:
            assert float(row.split(",")[1]) > 0.9

    def test_trim_unsupported(self, tmp_path, data_file):
        rc = main(["posterior", str(data_file), "--model", "bayes", *BASE, "--trim", "0.9"])
        assert rc == 4


class TestMap:
    def test_switch_sequence_file(self, tmp_path):
        data = tmp_path / "d.txt"
        write(data, "0\n" * 4 + "1\n" * 4)
        out = tmp_path / "m.txt"
        assert main(["map", str(data), "--model", "switch", "--alphabet", "0,1",
                     "--experts", "builtin:const:0.99,0.01;const:0.01,0.99",
                     "--out", str(out)]) == 0
        names = out.read_text().split()
        assert names == ["const0"] * 4 + ["const1"] * 4

    def test_empty_data_empty_output(self, tmp_path):
        data = tmp_path / "d.txt"
        write(data, "")
        out = tmp_path / "m.txt"
        assert main(["map", str(data), "--model", "switch", *BASE, "--out", str(out)]) == 0
        assert out.read_text() == ""

    def test_non_switch_model_unsupported(self, tmp_path, data_file):
        rc = main(["map", str(data_file), "--model", "fixed-share", "--alpha", "0.1", *BASE])
        assert rc == 4


class TestBounds:
    def test_bayes_bound_row_satisfied(self, tmp_path, data_file):
        out = tmp_path / "b.csv"
        assert main(["bounds", str(data_file), "--model", "bayes", *BASE,
                     "--out", str(out)]) == 0
        rows = out.read_text().strip().splitlines()
        assert rows[0].startswith("model,comparator")
        cells = rows[1].split(",")
        assert cells[0] == "bayes"
        assert "yes" in cells

    def test_switch_rows_json(self, tmp_path, data_file):
        out = tmp_path / "b.json"
        assert main(["bounds", str(data_file), "--model", "switch", *BASE,
                     "--format", "json", "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert len(doc) == 4
        assert all(r["satisfied"] for r in doc)

    def test_unimix_row_notes_fitted_constant(self, tmp_path, data_file):
        out = tmp_path / "b.csv"
        assert main(["bounds", str(data_file), "--model", "universal-elementwise", *BASE,
                     "--out", str(out)]) == 0
        assert "fitted" in out.read_text()

    def test_unsupported_model(self, tmp_path, data_file):
        rc = main(["bounds", str(data_file), "--model", "overconfident", "--alpha", "0.2", *BASE])
        assert rc == 4


class TestParsing:
    def test_unknown_model_rejected(self, data_file):
        rc = main(["evaluate", str(data_file), "--model", "nope", *BASE])
        assert rc == 2

    def test_kt_and_laplace_builtins(self, tmp_path, data_file):
        out = tmp_path / "o.csv"
        rc = main(["evaluate", str(data_file), "--model", "bayes", "--alphabet", "0,1",
                   "--experts", "builtin:kt;laplace", "--out", str(out)])
        assert rc == 0

    def test_markov_builtin(self, tmp_path, data_file):
        out = tmp_path / "o.csv"
        rc = main(["evaluate", str(data_file), "--model", "bayes", "--alphabet", "0,1",
                   "--experts", "builtin:markov:0.5,0.5|0.9,0.1|0.2,0.8;kt",
                   "--out", str(out)])
        assert rc == 0

    def test_pi_t_flag_variants(self, tmp_path, data_file):
        for spec in ("inv-poly", "geometric:0.3", "uniform:1,3", "elias"):
            rc = main(["evaluate", str(data_file), "--model", "run-length",
                       "--pi-t", spec, *BASE, "--out", str(tmp_path / "o.csv")])
            assert rc == 0, spec

    def test_overconfident_appends_safe_expert(self, tmp_path, data_file):
        out = tmp_path / "o.csv"
        rc = main(["evaluate", str(data_file), "--model", "overconfident",
                   "--alpha", "0.2", *BASE, "--out", str(out)])
        assert rc == 0
        assert "p_exp:safe-uniform" in out.read_text().splitlines()[0]
