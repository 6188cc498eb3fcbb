import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lamecf.calogero import CSV_HEADER
from lamecf.cli import (
    EXIT_ERROR,
    EXIT_FLAGGED,
    EXIT_OK,
    EXIT_USAGE,
    UsageError,
    _jsonify,
    decode_complex,
    emit_report,
    main,
    read_config,
    resolve,
)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def doc(out):
    return json.loads(out, object_hook=decode_complex)


# ------------------------------------------------------------------ emission


def test_empty_results():
    assert json.loads(emit_report([])) == {"results": []}
    assert emit_report([], "csv") == ""


@given(
    st.lists(
        st.dictionaries(
            st.text(max_size=5),
            st.one_of(
                st.floats(allow_nan=False, allow_infinity=False),
                st.complex_numbers(allow_nan=False, allow_infinity=False),
                st.integers(-(2**40), 2**40),
                st.text(max_size=8),
                st.booleans(),
                st.none(),
            ),
            max_size=4,
        ),
        max_size=4,
    )
)
def test_json_round_trip_is_lossless(records):
    back = json.loads(emit_report(records), object_hook=decode_complex)["results"]
    assert back == records


def test_float_formatting_17_digits():
    assert _jsonify(0.1) == "0.10000000000000001"
    assert _jsonify(2.0) == "2.0"
    assert _jsonify(float("nan")) == "null"
    assert _jsonify(1 - 2j) == '{"re": 1.0, "im": -2.0}'
    with pytest.raises(TypeError):
        _jsonify(object())


def test_results_follow_inputs():
    text = emit_report([{"a": 1}], document={"command": "x", "inputs": {}, "flagged": False})
    assert list(json.loads(text)) == ["command", "inputs", "results", "flagged"]


def test_unknown_format():
    with pytest.raises(UsageError):
        emit_report([], "xml")


# -------------------------------------------------------------------- config


def test_read_config(tmp_path):
    p = tmp_path / "c.conf"
    p.write_text("# comment\nalpha0 = 1.0\nq-grid = 0.01,0.02  # trailing\n\n")
    assert read_config(str(p)) == {"alpha0": "1.0", "q_grid": "0.01,0.02"}
    p.write_text("just words\n")
    with pytest.raises(UsageError):
        read_config(str(p))
    with pytest.raises(UsageError):
        read_config(str(tmp_path / "missing"))


def test_precedence_flag_file_env_default(tmp_path, monkeypatch):
    p = tmp_path / "c.conf"
    p.write_text("rtol = 1e-5\nthreshold = 1e-4\n")
    monkeypatch.setenv("LAMECF_RTOL", "1e-3")
    monkeypatch.setenv("LAMECF_ATOL", "1e-2")
    monkeypatch.setenv("LAMECF_ALPHA0", "1.5")
    cfg = resolve(["accessory", "--q", "0.1", "--config", str(p), "--threshold", "1e-9"])
    assert cfg.tolerance("threshold") == 1e-9  # flag beats file
    assert cfg.tolerance("rtol") == 1e-5  # file beats env
    assert cfg.tolerance("atol") == 1e-2  # env beats default
    assert cfg.real("alpha0") == 0.0  # env applies to tolerances only
    assert cfg.tolerance("ftol") == 1e-11  # default


def test_unknown_config_key(tmp_path, capsys):
    p = tmp_path / "c.conf"
    p.write_text("bogus = 1\n")
    code, _, err = run(capsys, "theta", "--q", "0.1", "--config", str(p))
    assert code == EXIT_USAGE and "bogus" in err


# ---------------------------------------------------------------- exit codes


def test_theta_ok(capsys):
    code, out, _ = run(capsys, "theta", "--q", "0.1", "--z", "0.3")
    d = doc(out)
    assert code == EXIT_OK and d["command"] == "theta" and not d["flagged"]
    assert isinstance(d["results"][0]["theta1"], complex)
    assert "wall_time_s" in d["meta"]


@pytest.mark.parametrize(
    "argv",
    [
        ["nope"],
        ["theta"],
        ["theta", "--q", "0.1", "--tau", "1j"],
        ["theta", "--q", "abc"],
        ["floquet"],
        ["wp", "--q", "0.1", "--format", "csv"],
        ["accessory", "--q", "0.1", "--alpha0", "3"],
        ["accessory", "--q", "0.1", "--threshold", "-1"],
        ["theta", "--q", "0.1", "--jobs", "0"],
    ],
)
def test_usage_errors(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_USAGE and out == "" and "usage error" in err


def test_numerical_error_exit(capsys):
    code, out, err = run(capsys, "gammae", "asymptote", "--xi", "1")
    assert code == EXIT_ERROR and "PoleError" in err


def test_flagged_exit(capsys):
    code, out, _ = run(capsys, "accessory", "--q", "0.1", "--alpha0", "1", "--p0", "0.5")
    assert code == EXIT_FLAGGED and doc(out)["flagged"]


def test_negative_complex_value_with_equals(capsys):
    code, out, _ = run(capsys, "wp", "--q", "0.1", "--z=-0.2+0.1j")
    assert code == EXIT_OK and doc(out)["results"][0]["z"] == complex(-0.2, 0.1)


def test_floquet_T0(capsys):
    code, out, _ = run(capsys, "floquet", "solve-lambda", "--w", "0.3", "--q", "0")
    assert code == EXIT_OK and abs(doc(out)["results"][0]["Lambda"] + 0.39) < 1e-14


def test_output_file(tmp_path, capsys):
    target = tmp_path / "r.json"
    code, out, _ = run(capsys, "roots", "--q", "0.1", "-o", str(target))
    assert code == EXIT_OK and out == ""
    assert doc(target.read_text())["results"][0]["labeling"] == "standard"


def test_unwritable_output(tmp_path, capsys):
    code, _, err = run(capsys, "roots", "--q", "0.1", "-o", str(tmp_path / "no" / "r.json"))
    assert code == EXIT_ERROR and "cannot write" in err


# ------------------------------------------------------------------------ csv


def test_cm_integrate_csv_header(capsys):
    code, out, _ = run(
        capsys, "cm", "integrate", "--a", "0.2", "--b", "0.1", "--m", "0", "--tau0", "0.35+6j", "--tau1", "0.35+5j",
        "--format", "csv",
    )
    lines = out.splitlines()
    assert code == EXIT_OK and lines[0] == CSV_HEADER == "re_tau,im_tau,re_u,im_u,re_v,im_v,re_H,im_H"
    first = [float(x) for x in lines[1].split(",")]
    assert first[:2] == [0.35, 6.0]


# ---------------------------------------------------------------- determinism


def _strip_meta(text):
    d = json.loads(text)
    d.pop("meta")
    return d


def test_suite_is_deterministic_across_jobs(capsys):
    code1, out1, _ = run(capsys, "certify", "suite", "--seed", "3")
    code2, out2, _ = run(capsys, "certify", "suite", "--seed", "3", "--jobs", "2")
    assert code1 == code2 == EXIT_OK
    assert _strip_meta(out1) == _strip_meta(out2)
    assert all(r["pass"] for r in json.loads(out1)["results"])


def test_gmc_moment_check_reproducible(capsys):
    argv = ["gmc", "moment-check", "--order", "1", "--gamma", "0.5", "--samples", "500", "--modes", "50", "--seed", "9"]
    a = _strip_meta(run(capsys, *argv)[1])
    b = _strip_meta(run(capsys, *argv, "--jobs", "2")[1])
    assert a == b
