import re
import stat
import subprocess
import sys

import pytest

from chebkex.cli import EXIT_CONFIG, EXIT_IO, build_parser, main

SEED = ["--seed", "7", "--insecure-testing"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _subparsers(parser):
    for action in parser._actions:
        if action.__class__.__name__ == "_SubParsersAction":
            return action.choices
    return {}


def _walk(parser, path=()):
    yield path, parser
    for name, sub in _subparsers(parser).items():
        yield from _walk(sub, path + (name,))


def test_help_lists_every_subcommand_and_flag():
    for path, parser in _walk(build_parser()):
        text = parser.format_help()
        for name in _subparsers(parser):
            assert name in text, (path, name)
        for action in parser._actions:
            for opt in action.option_strings:
                assert opt in text, (path, opt)


def test_module_entry_point_help():
    out = subprocess.run([sys.executable, "-m", "chebkex", "--help"], capture_output=True, text=True, check=True)
    for group in ("suite", "kex", "attack", "analyze"):
        assert group in out.stdout


def test_suite_show(capsys, suites):
    code, out, _ = run(capsys, "suite", "show", "64-4")
    assert code == 0
    digits = int(re.search(r"DIGITS=(\d+)", out).group(1))
    log_dmax = float(re.search(r"log10_d_max (\S+)", out).group(1))
    assert digits >= int(log_dmax) + 1 + 60
    assert "combinations 2^128.00" in out


def test_suite_list(capsys):
    code, out, _ = run(capsys, "suite", "list")
    assert code == 0
    assert [line.split()[0] for line in out.splitlines()] == ["4-2", "32-8", "64-4", "128-2"]


def test_suite_dir(capsys, monkeypatch, tmp_path):
    (tmp_path / "mine.suite").write_text("SUITE v1 N=2 M=5 W=3,3 P=7,11 SEC=128 DIGITS=70\n")
    monkeypatch.setenv("QRKE_SUITE_DIR", str(tmp_path))
    code, out, _ = run(capsys, "suite", "show", "mine")
    assert code == 0 and "P=7,11" in out
    assert run(capsys, "suite", "show", "nope")[0] == EXIT_CONFIG


def test_seed_requires_flag(capsys, tmp_path):
    code, _, err = run(capsys, "kex", "offline", "offer", "--out", str(tmp_path / "o"), "--state",
                       str(tmp_path / "s"), "--seed", "1")
    assert code == EXIT_CONFIG
    assert "insecure-testing" in err


def test_offline_round_trip(capsys, tmp_path):
    o, s, r, c, k = (str(tmp_path / n) for n in "osrck")
    assert run(capsys, "kex", "offline", "offer", "--out", o, "--state", s, *SEED)[0] == 0
    code, out_r, _ = run(capsys, "kex", "offline", "respond", "--in", o, "--out", r, "--seed", "8", "--insecure-testing")
    assert code == 0
    code, out_f, _ = run(capsys, "kex", "offline", "finalize", "--in", r, "--state", s, "--out", c, "--emit-key", k)
    assert code == 0
    fp_r = re.search(r"fingerprint (\w+)", out_r).group(1)
    fp_f = re.search(r"fingerprint (\w+)", out_f).group(1)
    assert fp_r == fp_f
    assert stat.S_IMODE((tmp_path / "k").stat().st_mode) == 0o600
    key_hex = (tmp_path / "k").read_text().strip()
    assert key_hex not in out_r + out_f


def test_attack_brute(capsys, tmp_path):
    path = tmp_path / "b.csv"
    code, _, err = run(capsys, "attack", "brute", "--suite", "4-2", *SEED, "--out", str(path))
    assert code == 0
    rows = path.read_text().splitlines()
    assert rows[0] == "M,candidate,agreement_digits,verified,work"
    assert sum(row.split(",")[3] == "1" for row in rows[1:]) == 1
    assert "recovered" in err


def test_attack_sieve_toy(capsys):
    code, out, err = run(capsys, "attack", "sieve", "--toy-exponent", "15", "--modulus-digits", "6", *SEED)
    assert code == 0
    assert "recovered 1/1" in err
    assert any(line.split(",")[1:2] == ["15"] and line.split(",")[3] == "1" for line in out.splitlines())


def test_attack_double_demo(capsys):
    code, out, _ = run(capsys, "attack", "double-demo", "--pair", "3,5", "--pair", "31,37", *SEED)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("r,s,degree")
    assert lines[2].startswith("31,37,1147")


def test_analyze_cost(capsys):
    code, out, _ = run(capsys, "analyze", "cost")
    assert code == 0
    rows = [line.split(",") for line in out.splitlines()[1:]]
    assert [r[0] for r in rows] == ["64-4", "128-2"]
    assert int(rows[1][3]) > int(rows[0][3])


def test_analyze_digits_and_magnitude(capsys):
    code, out, _ = run(capsys, "analyze", "digits", "--samples", "500", "--positions", "5", *SEED)
    assert code == 0 and len(out.splitlines()) == 6
    code, out, err = run(capsys, "analyze", "magnitude", "--suite", "4-2", "--trials", "1000", *SEED)
    assert code == 0 and "expected" in err


def test_exit_codes(capsys):
    assert run(capsys, "kex", "connect", "127.0.0.1:1", "--timeout", "1")[0] == EXIT_IO
    assert run(capsys, "kex", "connect", "nonsense")[0] == EXIT_CONFIG
    assert run(capsys, "attack", "brute", "--suite", "64-4")[0] == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2


def test_precision_exit_code(capsys, tmp_path):
    small = ["--digits", "40", "--allow-undersized"]
    o, s, r = (str(tmp_path / n) for n in "osr")
    assert run(capsys, "kex", "offline", "offer", "--out", o, "--state", s, *small, *SEED)[0] == 0
    # 40 digits cannot supply the 60-digit key window
    assert run(capsys, "kex", "offline", "respond", "--in", o, "--out", r, *small)[0] == 4


def test_no_secrets_in_output(capsys, tmp_path, caplog):
    import json
    import math

    caplog.set_level("DEBUG")
    o, s, r, k = (str(tmp_path / n) for n in "osrk")
    common = ["--suite", "32-8"]
    assert run(capsys, "-vv", "kex", "offline", "offer", "--out", o, "--state", s, *common, *SEED)[0] == 0
    state = json.loads(open(s).read())["secret"]
    exponent = math.prod(p**v for p, v in zip(state["primes"], state["reps"]))
    assert exponent > 10**30
    outputs = [capsys.readouterr()]
    code, out_r, err_r = run(capsys, "-vv", "kex", "offline", "respond", "--in", o, "--out", r, *common)
    assert code == 0
    code, out_f, err_f = run(capsys, "-vv", "kex", "offline", "finalize", "--in", r, "--state", s, *common,
                             "--emit-key", k)
    assert code == 0
    key = open(k).read().strip()
    text = out_r + err_r + out_f + err_f + caplog.text + open(o).read() + open(r).read()
    assert str(exponent) not in text
    assert str(exponent)[:20] not in text
    assert key not in text
