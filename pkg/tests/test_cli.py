"""
Console commands: exit codes and the files they leave behind.
"""

import pytest

from cli import certify as certify_cmd
from cli import rates as rates_cmd
from cli import reproduce as reproduce_cmd
from cli import simulate as simulate_cmd
from hessdamp.harness import CertificationResult

REST = """
name: rest
objective: {id: quartic}
system: {kind: ISEHD}
initial: {x0: [1, 5], v0: [0, 0]}
horizon: 5
integrator:
  output: {kind: uniform, n: 50}
energies: [W]
"""


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "rest.yaml"
    path.write_text(REST)
    return path


class TestSimulate:
    """uv run simulate"""

    def test_writes_artifacts(self, scenario_file, tmp_path, capsys):
        """A clean run exits 0 and reports where it wrote."""
        out = tmp_path / "out"
        assert simulate_cmd.main(["--config", str(scenario_file), "--out", str(out)]) == 0
        assert (out / "trajectory.csv").is_file()
        assert "[OK] Artifacts written" in capsys.readouterr().out

    def test_bad_config(self, tmp_path):
        """Configuration errors exit 2."""
        path = tmp_path / "bad.yaml"
        path.write_text(REST.replace("kind: ISEHD", "kind: NESTEROV"))
        assert simulate_cmd.main(["--config", str(path)]) == 2

    def test_missing_file(self, tmp_path):
        """A missing scenario file exits 2."""
        assert simulate_cmd.main(["--config", str(tmp_path / "absent.yaml")]) == 2


class TestCertify:
    """uv run certify"""

    def test_passes(self, scenario_file, capsys):
        """Certified energies exit 0."""
        assert certify_cmd.main(["--config", str(scenario_file)]) == 0
        assert "CERTIFICATION PASSED" in capsys.readouterr().out

    def test_violation_exits_one(self, scenario_file, monkeypatch, capsys):
        """A violated energy under met hypotheses exits 1."""
        violated = CertificationResult("W", "violated", 3, "converged", t1=6.2)
        monkeypatch.setattr(certify_cmd, "certify", lambda cfg: (violated,))
        assert certify_cmd.main(["--config", str(scenario_file)]) == 1
        assert "CERTIFICATION FAILED" in capsys.readouterr().out

    def test_out_of_scope_is_not_a_failure(self, scenario_file, monkeypatch, capsys):
        """hypothesis-not-met warns but exits 0."""
        skipped = CertificationResult("fast", "hypothesis-not-met", 7, "diverging", detail="moment hypotheses diverging")
        monkeypatch.setattr(certify_cmd, "certify", lambda cfg: (skipped,))
        assert certify_cmd.main(["--config", str(scenario_file)]) == 0
        assert "[WARN] fast" in capsys.readouterr().out

    def test_no_energies(self, tmp_path):
        """A scenario without energies has nothing to certify."""
        path = tmp_path / "plain.yaml"
        path.write_text(REST.replace("energies: [W]\n", ""))
        assert certify_cmd.main(["--config", str(path)]) == 0


class TestRates:
    """uv run rates"""

    @pytest.fixture
    def trajectory_csv(self, tmp_path):
        t = [1.0 + 0.5 * i for i in range(40)]
        lines = ["t,f_gap"] + [f"{s!r},{s**-2.0!r}" for s in t]
        path = tmp_path / "trajectory.csv"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_report_file(self, trajectory_csv, tmp_path):
        """The fitted slope of t^-2 lands in a one-row CSV."""
        out = tmp_path / "rate.csv"
        assert rates_cmd.main(["--input", str(trajectory_csv), "--window", "2:20", "--out", str(out)]) == 0
        header, row = out.read_text().splitlines()
        assert header == "t_lo,t_hi,slope,intercept,residual_rms,classification"
        fields = dict(zip(header.split(","), row.split(",")))
        assert float(fields["slope"]) == pytest.approx(-2.0, abs=1e-2)
        assert fields["classification"] == "fast"

    def test_unknown_column(self, trajectory_csv):
        """Asking for a missing column exits 2."""
        assert rates_cmd.main(["--input", str(trajectory_csv), "--col", "dist"]) == 2

    def test_bad_window(self, trajectory_csv):
        """A malformed window exits 2."""
        assert rates_cmd.main(["--input", str(trajectory_csv), "--window", "ten"]) == 2


class TestReproduce:
    """uv run reproduce-sec6"""

    def test_prints_rows(self, monkeypatch, tmp_path, capsys):
        """Rows from the grid runner are summarised and the command exits 0."""
        rows = [["ISEHD_quartic_d3.1", "ISEHD", "quartic", 3.1, -2.4, "fast", 1e-6, 1e-3, 0.0]]
        monkeypatch.setattr(reproduce_cmd, "reproduce_section6", lambda out, workers: rows)
        assert reproduce_cmd.main(["--out", str(tmp_path), "--workers", "1"]) == 0
        assert "ISEHD_quartic_d3.1" in capsys.readouterr().out
