import json

import numpy as np
import pytest

from kamreduce import io
from kamreduce.cli import main
from kamreduce.exceptions import ArtifactError, ConfigError
from kamreduce.fourier import FourierMatrix

FAST_VERIFY = """
[verify]
T = 5.0
samples = 50
lyapunov_T = 20.0
lyapunov_samples = 40
"""


def write_config(tmp_path, body, name="run.toml"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


def run_cli(capsys, *argv):
    code = main(list(argv) + ["--quiet"])
    err = capsys.readouterr().err
    return code, [line for line in err.splitlines() if line.strip()]


@pytest.fixture
def desk_cfg(tmp_path):
    return write_config(tmp_path, 'preset = "desk"\n[reduction]\nmax_steps = 3\n' + FAST_VERIFY)


def test_all_writes_artifacts(tmp_path, capsys, desk_cfg):
    out = tmp_path / "out"
    code, err = run_cli(capsys, "all", "--config", desk_cfg, "--out", str(out))
    assert code == 0 and err == []
    for name in ("reduction_result.json", "step_log.jsonl", "transforms.bin", "retained_set.csv",
                 "witnesses.jsonl", "measure_report.json", "verify.json"):
        assert (out / name).exists(), name
    result = json.loads((out / "reduction_result.json").read_text())
    assert len(result["xi"]) == 16
    assert max(abs(x) for x in result["xi"]) <= 10 * 1e-3
    assert json.loads((out / "verify.json").read_text())["pass"] is True
    report = json.loads((out / "measure_report.json").read_text())
    assert report["retained_measure"] > 0.9
    lines = (out / "step_log.jsonl").read_text().splitlines()
    assert [json.loads(l)["m"] for l in lines] == list(range(len(lines)))
    assert (out / "retained_set.csv").read_text().startswith("step,a,b\n")


def test_runs_are_bit_identical(tmp_path, capsys, desk_cfg):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert run_cli(capsys, "reduce", "--config", desk_cfg, "--out", str(out))[0] == 0
    for name in ("reduction_result.json", "step_log.jsonl", "transforms.bin", "witnesses.jsonl"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_pinned_resonant_tau_exits_3(tmp_path, capsys, desk_cfg):
    code, err = run_cli(capsys, "reduce", "--config", desk_cfg, "--tau", "1.5",
                        "--out", str(tmp_path / "o"))
    assert code == 3
    assert len(err) == 1 and "k=" in err[0]


def test_bound_violation_exits_4(tmp_path, capsys):
    cfg = write_config(tmp_path, 'preset = "desk"\n[reduction]\nC1 = 1e-6\n')
    code, err = run_cli(capsys, "reduce", "--config", cfg, "--out", str(tmp_path / "o"))
    assert code == 4 and len(err) == 1


def test_empty_retained_set_exits_5(tmp_path, capsys):
    cfg = write_config(tmp_path, 'preset = "desk"\n[reduction]\nmeasure_floor = 0.999\n')
    code, err = run_cli(capsys, "reduce", "--config", cfg, "--out", str(tmp_path / "o"))
    assert code == 5 and len(err) == 1


def test_failed_verification_exits_6(tmp_path, capsys):
    body = 'preset = "desk"\n[reduction]\nmax_steps = 2\n' + FAST_VERIFY + "lyapunov_bound = 1e-12\n"
    cfg = write_config(tmp_path, body)
    out = str(tmp_path / "o")
    assert run_cli(capsys, "reduce", "--config", cfg, "--out", out)[0] == 0
    code, err = run_cli(capsys, "verify", "--config", cfg, "--out", out)
    assert code == 6 and len(err) == 1 and "lyapunov" in err[0]


@pytest.mark.parametrize("body", [
    "this is = = not toml",
    'preset = "moon"',
    "n = 1\nN = 80\ngamma = 0.05\nepsilon = 1e-3\n",
    'preset = "desk"\n[reduction]\nbogus = 1\n',
    'preset = "desk"\n[reduction]\ntau = 3.0\n',
    'preset = "desk"\n[reduction]\nJ = 0\n',
])
def test_bad_configs_exit_2(tmp_path, capsys, body):
    cfg = write_config(tmp_path, body)
    code, err = run_cli(capsys, "reduce", "--config", cfg, "--out", str(tmp_path / "o"))
    assert code == 2 and len(err) == 1


def test_missing_config_and_bad_arguments_exit_2(tmp_path, capsys):
    assert run_cli(capsys, "reduce", "--config", str(tmp_path / "nope.toml"))[0] == 2
    code, err = run_cli(capsys, "reduce")
    assert code == 2 and len(err) == 1
    assert run_cli(capsys, "frobnicate", "--config", "x")[0] == 2


def test_verify_rejects_corrupt_transforms(tmp_path, capsys, desk_cfg):
    out = tmp_path / "o"
    assert run_cli(capsys, "reduce", "--config", desk_cfg, "--out", str(out))[0] == 0
    data = bytearray((out / "transforms.bin").read_bytes())
    data[:4] = b"XXXX"
    (out / "transforms.bin").write_bytes(bytes(data))
    code, err = run_cli(capsys, "verify", "--config", desk_cfg, "--out", str(out))
    assert code == 2 and "magic" in err[0]


def test_zero_coupling_gives_zero_shift(tmp_path, capsys):
    cfg = write_config(tmp_path, 'preset = "desk"\nepsilon = 0.0\n' + FAST_VERIFY)
    out = tmp_path / "o"
    code, _ = run_cli(capsys, "all", "--config", cfg, "--out", str(out))
    assert code == 0
    result = json.loads((out / "reduction_result.json").read_text())
    assert all(x == 0.0 for x in result["xi"])


def test_transform_roundtrip(tmp_path, rng):
    maps = []
    for K in (0, 2):
        shape = (2 * K + 1, 2 * K + 1, 3, 3)
        coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        maps.append(FourierMatrix(coeffs, 0.3))
    path = tmp_path / "t.bin"
    io.write_transforms(path, maps, 2, 3)
    back, n, J = io.read_transforms(path)
    assert (n, J) == (2, 3)
    for a, b in zip(maps, back):
        for k in a.modes():
            np.testing.assert_array_equal(a.coefficient(tuple(k)), b.coefficient(tuple(k)))
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ArtifactError):
        io.read_transforms(path)


def test_fourier_mode_config_and_potential_file(tmp_path):
    write_config(tmp_path, "n = 1\nN = 20\nM = 0.5\nomega0 = [1.0]\ngamma = 0.05\n"
                 "epsilon = 1e-3\nfourier_modes = [[1, [1], 0.3, 0.1], [0, [0], 0.1, 0.0]]\n",
                 "pot.toml")
    cfg = io.load_config(write_config(tmp_path, 'potential = "pot.toml"\nseed = 4\n'
                                      '[reduction]\nJ = 4\nsteps = 2\ntau = "scan"\n'))
    assert cfg.spec.n == 1 and cfg.spec.M == 0.5
    assert cfg.settings.J == 4 and cfg.settings.max_steps == 2
    assert cfg.tau == "scan" and cfg.seed == 4
    with pytest.raises(ConfigError):
        io.potential_from_dict({"n": 1, "N": 20, "gamma": 0.05, "epsilon": -1.0,
                                "fourier_modes": []})


def test_dumps_is_canonical():
    text = io.dumps({"b": np.float64(1.5), "a": [np.int64(2), np.bool_(True)], "c": float("inf")})
    assert text == '{\n  "a": [\n    2,\n    true\n  ],\n  "b": 1.5,\n  "c": "inf"\n}\n'
