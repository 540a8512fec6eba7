import hashlib
import math

import numpy as np
import pytest

from nestlat.cli import main
from nestlat.harness import (
    ConfigError,
    ExperimentConfig,
    SweepReport,
    emit_plotdata,
    gp_kl,
    parse_config,
    parse_plotdata,
    run,
    wz_kl,
)

SMALL_GP = "mode = gp\ninstance = gp-z3-flip01\nn = 4, 5\nrate_multipliers = 0.5\ntrials = 30\nseed = 3\n"


def test_parse_basic_and_defaults():
    cfg = parse_config("# comment\nmode = gp\ninstance = gp-z3-flip01  # trailing\n")
    assert cfg.n_values == (6, 9, 12) and cfg.eps == 0.3 and cfg.trials == 2000
    cfg = parse_config(SMALL_GP, {"trials": 7, "seed": None})
    assert cfg.trials == 7 and cfg.seed == 3 and cfg.n_values == (4, 5)
    cfg = parse_config("mode = verify\nlemma_instances = 3:1:1:1, 3:2:1:1\nrank_instances = 3:2:2\n")
    assert cfg.lemma_instances == ((3, 1, 1, 1), (3, 2, 1, 1)) and cfg.rank_instances == ((3, 2, 2),)


@pytest.mark.parametrize("text, line, key", [
    ("mode = gp\nmode = wz\n", 2, "mode"),
    ("mode = gp\nbogus = 1\n", 2, "bogus"),
    ("mode = gp\ninstance = gp-z3-flip01\ntrials = many\n", 3, "trials"),
    ("mode = verify\nno equals sign\n", 2, None),
    ("mode = verify\nrank_instances = 3:2\n", 2, "rank_instances"),
])
def test_parse_errors_carry_location(text, line, key):
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    assert ei.value.line == line and ei.value.key == key
    assert f"line {line}" in str(ei.value)


@pytest.mark.parametrize("text, key", [
    ("instance = gp-z3-flip01\n", "mode"),
    ("mode = teleport\n", "mode"),
    ("mode = gp\ninstance = nowhere\n", "instance"),
    ("mode = wz\ninstance = gp-z3-flip01\n", "instance"),
    ("mode = gp\ninstance = gp-z3-flip01\ntrials = 0\n", "trials"),
    ("mode = gp\ninstance = gp-z3-flip01\neps = -0.1\n", "eps"),
    ("mode = gp\ninstance = gp-z3-flip01\nrate_multipliers = 2.5\n", "rate_multipliers"),
    ("mode = gp\ninstance = gp-z3-flip01\nn = 0\n", "n"),
])
def test_semantic_errors(text, key):
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    assert ei.value.key == key


def test_kl_policies():
    lp = math.log2(3)
    k, l = gp_kl(12, 0.5, 0.0, 1.0, 3)
    assert l == 0 and k == round(0.5 * 12 / lp)
    k, l = gp_kl(10, 1.0, 0.2, 1.0, 3)
    assert l * lp / 10 > 0.2 and (l - 1) * lp / 10 <= 0.2
    k, l = wz_kl(12, 1.1, 1.0, 0.7, 3)
    assert l * lp / 12 < 1.0 and (k + l) * lp / 12 > 0.7


def test_plotdata_round_trip():
    rep = SweepReport("gp", ("n", "rate", "flag"), [dict(n=6, rate=0.125, flag=True), dict(n=9, rate=1 / 3, flag=False)])
    text = emit_plotdata(rep)
    assert text.startswith("# n rate flag\n")
    header, data = parse_plotdata(text)
    assert header == ["n", "rate", "flag"]
    assert data.tolist() == [[6.0, 0.125, 1.0], [9.0, 1 / 3, 0.0]]
    empty = emit_plotdata(SweepReport("gp", ("a", "b"), []))
    assert empty == "# a b\n" and parse_plotdata(empty)[1].shape == (0, 2)


def digest(files):
    return hashlib.sha256("".join(k + v for k, v in sorted(files.items())).encode()).hexdigest()


def test_sweep_outputs_are_deterministic_and_self_consistent():
    a = run(parse_config(SMALL_GP))
    b = run(parse_config(SMALL_GP))
    assert digest(a.files) == digest(b.files)
    assert set(a.files) == {"gp_trials.csv", "gp_summary.csv", "gp_plot.dat", "gp_thresholds.txt"}
    trials = a.files["gp_trials.csv"].splitlines()
    assert len(trials) == 1 + 60
    # trial indices run across the whole sweep
    assert [int(r.split(",")[0]) for r in trials[1:]] == list(range(60))
    for row in a.report.rows:
        assert 0 <= row["decode_error_rate"] <= 1 and row["trials"] == 30
    c = run(parse_config(SMALL_GP, {"seed": 4}))
    assert c.files["gp_trials.csv"] != a.files["gp_trials.csv"]


def test_workers_do_not_change_results():
    one = run(parse_config(SMALL_GP))
    two = run(parse_config(SMALL_GP, {"workers": 2}))
    assert one.files == two.files


def test_wz_sweep_and_inline_instance():
    text = """mode = wz
instance = inline
p = 3
gamma = 1
x_letters = -1 0 1
s_letters = -1 0 1
p_xs = 0.3 0.0166666666666667 0.0166666666666666 0.0166666666666667 0.3 0.0166666666666666 0.0166666666666667 0.0166666666666667 0.2999999999999999
w_u_given_x = 0.8 0.1 0.1 0.1 0.8 0.1 0.1 0.1 0.8
f = mmse
n = 5
k = 1
l = 2
eps = 0.3
trials = 20
"""
    res = run(parse_config(text))
    assert res.report.rows[0]["k"] == 1 and len(res.files["wz_trials.csv"].splitlines()) == 21
    with pytest.raises(ConfigError):
        run(parse_config(text.replace("f = mmse", "f = median")))


def test_cli_modes_and_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "v.cfg"
    cfg.write_text("lemma_instances = 3:1:1:1\nrank_instances = 3:2:1\n")
    assert main(["verify", "--config", str(cfg)]) == 0
    assert "exact-match" in capsys.readouterr().out
    bad = tmp_path / "bad.cfg"
    bad.write_text("trials = lots\n")
    assert main(["gp", "--config", str(bad)]) == 2
    assert "field 'trials'" in capsys.readouterr().err
    assert main(["gp", "--config", str(tmp_path / "missing.cfg")]) == 2
    out = tmp_path / "out"
    g = tmp_path / "g.cfg"
    g.write_text("n = 4\nrate_multipliers = 0.5\n")
    assert main(["gp", "--config", str(g), "--trials", "5", "--seed", "1", "--out", str(out)]) == 0
    assert (out / "gp_summary.csv").read_text().startswith("n,rate_multiplier,k,l,trials")
    assert main(["exponent", "--trials", "1000", "--out", str(tmp_path / "e")]) == 0
    assert (tmp_path / "e" / "exponent.csv").exists()


def test_cli_verify_failure_exit_code(monkeypatch, capsys):
    from nestlat import harness
    from nestlat.verify import LemmaReport, Verdict

    monkeypatch.setattr(harness, "verify_rank_distribution",
                        lambda *a, **k: LemmaReport("rank", {}, 1, 0, Verdict.FAIL))
    assert main(["verify"]) == 1


def test_config_dataclass_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(mode="gp", instance="gp-z3-flip01", workers=0)
    cfg = ExperimentConfig(mode="quantize", instance="gauss-rho08")
    assert cfg.eps is None and cfg.quant_axes == "both"
