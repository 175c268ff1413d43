"""
Unit Tests for the ncid Command Line
Demonstrates: exit codes, deterministic JSON reports, text rendering
Skills: pytest, capsys, tmp_path
"""

import pytest
import sys
import os
import json
from fractions import Fraction

import sympy

# Add src to path
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '../src')))

from config import RunConfig
from cli import (
    EXIT_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    build_parser,
    build_report,
    element_from_text,
    main,
    render_json,
    render_text,
    to_jsonable,
)


def run_json(capsys, argv):
    code = main(argv + ["--no-timestamp"])
    out = capsys.readouterr().out
    return code, (json.loads(out) if out else None)


class TestRendering:
    """Test cases for report rendering."""

    def test_to_jsonable(self):
        """Test Fractions, tuple keys and sympy values."""
        x = sympy.Symbol("x")
        data = to_jsonable({(1, 2): Fraction(-3, 4), "poly": 1 - x, "items": (Fraction(2),)})
        assert data == {"1,2": "-3/4", "poly": "1 - x", "items": ["2"]}

    def test_report_envelope(self):
        """Test schema fields and the optional timestamp."""
        report = build_report(RunConfig(seed=4), {"a": 1}, {"b": True}, True)
        assert report["schema_version"] == 1
        assert report["seed"] == 4
        assert "timestamp" in report
        quiet = build_report(RunConfig(suppress_timestamp=True), {}, {}, False)
        assert "timestamp" not in quiet

    def test_json_is_sorted(self):
        """Test key order is stable."""
        text = render_json({"b": 1, "a": 2})
        assert text.index('"a"') < text.index('"b"')

    def test_text_markers(self):
        """Test PASS, FAIL and FINDING markers."""
        text = render_text({"passed": True, "closed_form_match": False, "findings": [{"seed": 3}]})
        assert "passed: True PASS" in text
        assert "closed_form_match: False FAIL" in text
        assert "findings: FINDING" in text


class TestElementText:
    """Test cases for element input."""

    def test_alphabet_order(self):
        """Test default names come first in X, Y order."""
        element, names = element_from_text("Y + X^-1")
        assert names == ["X", "Y"]
        assert len(element) == 2

    def test_block_rejected(self):
        """Test block matrices are not group ring elements."""
        with pytest.raises(ValueError):
            element_from_text("[[X]]")


class TestExitCodes:
    """Test cases for usage errors."""

    def test_no_subcommand(self, capsys):
        """Test a bare invocation is a usage error."""
        assert main([]) == EXIT_USAGE

    def test_charpoly_without_input(self, capsys):
        """Test charpoly needs --expr or --family."""
        assert main(["charpoly"]) == EXIT_USAGE

    @pytest.mark.parametrize("text", ["X + * Y", "(1 + X)^-1"])
    def test_bad_expression(self, capsys, text):
        """Test parse errors and non-Laurent input."""
        assert main(["charpoly", "--expr", text]) == EXIT_USAGE

    def test_bad_log_level(self, capsys):
        """Test configuration errors exit with 2."""
        assert main(["charpoly", "--family", "plus-inverses", "--log-level", "LOUD"]) == EXIT_USAGE

    def test_parser_rejects_unknown_action(self):
        """Test dyn actions are validated by the parser."""
        with pytest.raises(SystemExit):
            build_parser().parse_args(["dyn", "fly"])


class TestCharpoly:
    """Test cases for the charpoly subcommand."""

    def test_family_report(self, capsys):
        """Test X + X^-1 at order 8."""
        code, report = run_json(capsys, ["charpoly", "--family", "plus-inverses", "--n", "1", "--order", "8"])
        assert code == EXIT_OK
        assert report["passed"] is True
        assert "timestamp" not in report
        spectral = report["checks"]["spectral"]
        assert spectral["closed_form_match"] is True
        assert spectral["necklace_match"] is True
        assert [str(c) for c in spectral["P_coefficients"]] == ["1", "0", "-1", "0", "-1", "0", "-2", "0", "-5"]
        assert set(spectral["input"].split(" + ")) == {"X", "X^-1"}
        assert spectral["N"] == 8
        assert "coefficients" not in spectral

    def test_deterministic(self, capsys):
        """Test two runs produce identical reports."""
        argv = ["charpoly", "--expr", "X + Y + (X*Y)^-1", "--order", "6"]
        _, first = run_json(capsys, argv)
        _, second = run_json(capsys, argv)
        assert first == second

    def test_guess(self, capsys):
        """Test the annihilator guess on the compressed series."""
        code, report = run_json(capsys, ["charpoly", "--family", "plus-inverses", "--n", "1", "--order", "12",
                                         "--guess", "--deg-t", "1", "--deg-s", "2", "--margin", "1"])
        assert code == EXIT_OK
        annihilator = report["checks"]["annihilator"]
        assert annihilator["found"] is True
        assert annihilator["step"] == 2
        assert annihilator["degS"] == 2

    def test_guess_skipped_when_short(self, capsys):
        """Test too few coefficients skip the guess instead of failing."""
        code, report = run_json(capsys, ["charpoly", "--family", "plus-inverses", "--n", "1", "--order", "4",
                                         "--guess"])
        assert code == EXIT_OK
        assert "skipped" in report["checks"]["annihilator"]

    def test_text_output_file(self, tmp_path):
        """Test --format text written to --output."""
        target = tmp_path / "report.txt"
        code = main(["charpoly", "--family", "plus-inverses", "--n", "1", "--order", "6",
                     "--format", "text", "--output", str(target)])
        assert code == EXIT_OK
        text = target.read_text()
        assert "passed: True PASS" in text
        assert "schema_version: 1" in text


class TestFlowsCommand:
    """Test cases for the flows subcommand."""

    def test_intertwine_only(self, capsys):
        """Test the intertwining sweep alone."""
        code, report = run_json(capsys, ["flows", "--intertwine", "--max-degree", "4"])
        assert code == EXIT_OK
        assert report["checks"]["intertwine"]["indices"] == 10
        assert report["checks"]["intertwine"]["failures"] == []

    def test_catalan(self, capsys):
        """Test the Catalan closed form at order 6."""
        code, report = run_json(capsys, ["flows", "--catalan", "--order", "6", "--max-degree", "4"])
        assert code == EXIT_OK
        assert report["checks"]["R_equals_1_minus_YX_minus_C"] is True

    def test_catalan_recognizes_rewritten_delta(self, capsys):
        """Test log(-x*y + 1) is treated as the closed-form delta."""
        code, report = run_json(capsys, ["flows", "--delta", "log(-x*y + 1)", "--order", "6", "--max-degree", "4"])
        assert code == EXIT_OK
        assert report["checks"]["R_equals_1_minus_YX_minus_C"] is True

    def test_catalan_rejects_other_delta(self, capsys):
        """Test --catalan with another delta is a usage error."""
        assert main(["flows", "--catalan", "--delta", "log(1-x-y)", "--order", "6", "--no-timestamp"]) == EXIT_USAGE
        assert capsys.readouterr().out == ""

    def test_other_delta_skips_closed_form(self, capsys):
        """Test a non-Catalan delta runs without the closed-form comparison."""
        code, report = run_json(capsys, ["flows", "--delta", "log(1-x-y)", "--order", "6", "--max-degree", "4"])
        assert code == EXIT_OK
        assert "R_equals_1_minus_YX_minus_C" not in report["checks"]
        assert report["checks"]["flows"]["abelian_ok"] is True


class TestDynCommand:
    """Test cases for the dyn subcommand."""

    def test_lax(self, capsys):
        """Test the Lax residual at d = 1."""
        code, report = run_json(capsys, ["dyn", "lax", "--d", "1", "--trials", "2"])
        assert code == EXIT_OK
        verdicts = report["checks"]["lax"]
        assert len(verdicts) == 1
        assert verdicts[0]["verdict"] == "zero-evidence"

    def test_conj3_reports_trials(self, capsys):
        """Test the harness reports trial counts and degeneracy."""
        code, report = run_json(capsys, ["dyn", "conj3", "--d", "1", "--trials", "5", "--seed", "3"])
        assert code in (EXIT_OK, EXIT_FAILED)
        entry = report["checks"]["conj3"][0]
        assert entry["trials"] == 5
        assert entry["sanity_ok"] is True
        assert float(entry["degeneracy_rate"]) < 0.5

    def test_recover_s1(self, capsys):
        """Test S1 iterates recover with 0/1 coefficients."""
        code, report = run_json(capsys, ["dyn", "recover", "--map", "S1", "--steps", "2"])
        assert code == EXIT_OK
        rows = report["checks"]["recover"]
        assert len(rows) == 4
        assert all(row["verified"] for row in rows)
        assert all(row["coefficient_set"]["ok"] for row in rows)

    def test_recover_uses_configured_primes(self, capsys, monkeypatch):
        """Test --primes reaches Laurent recovery and overrides NCID_PRIMES."""
        monkeypatch.setenv("NCID_PRIMES", "2147483647,2147483629")
        code, report = run_json(capsys, ["dyn", "recover", "--map", "S1", "--steps", "1",
                                         "--primes", "1000003,998244353"])
        assert code == EXIT_OK
        assert report["config"]["primes"] == [1000003, 998244353]
        rows = report["checks"]["recover"]
        assert rows
        for row in rows:
            assert row["verified"]
            assert row["report"]["primes"] == [1000003, 998244353]

    def test_recover_config_file_primes(self, capsys, tmp_path, monkeypatch):
        """Test a primes line in the config file reaches Laurent recovery."""
        monkeypatch.delenv("NCID_PRIMES", raising=False)
        path = tmp_path / "ncid.conf"
        path.write_text("primes = 1000003,998244353\n")
        code, report = run_json(capsys, ["dyn", "recover", "--map", "S1", "--steps", "1",
                                         "--config", str(path)])
        assert code == EXIT_OK
        assert all(row["report"]["primes"] == [1000003, 998244353] for row in report["checks"]["recover"])

    def test_growth(self, capsys):
        """Test the growth probe always reports."""
        code, report = run_json(capsys, ["dyn", "growth", "--map", "U3", "--steps", "3"])
        assert code == EXIT_OK
        assert len(report["checks"]["support_sizes"]) == 4


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--tb=short"])
