import json
import math

import pytest

from qbatt import ValidationError
from qbatt.cli import (
    CSV_HEADER,
    EXIT_OK,
    EXIT_VALIDATION,
    compare_protocols,
    compare_rows,
    main,
    parse_grid,
)


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_parse_grid_inclusive_endpoints():
    grid = parse_grid("0:1:0.25")
    assert grid == pytest.approx([0.0, 0.25, 0.5, 0.75, 1.0])
    assert parse_grid("0:3.3:1.1")[-1] == pytest.approx(3.3)
    assert parse_grid("0.5,1.5") == [0.5, 1.5]
    assert parse_grid("0.7") == [0.7]
    with pytest.raises(ValidationError):
        parse_grid("0:1:0.1:9")
    with pytest.raises(ValidationError):
        parse_grid("1:0:0.1")


def test_sweep_csv_header_and_determinism(capsys):
    argv = (
        "sweep", "--d", "3", "--temps", "0.5,1.0", "--delta-eps", "0:1:0.5",
        "--protocol", "precision,fluctuation", "--no-timing",
    )
    code1, out1 = run_cli(capsys, *argv)
    code2, out2 = run_cli(capsys, *argv)
    assert code1 == code2 == EXIT_OK
    assert out1 == out2
    lines = out1.strip().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 2 * 2 * 3
    # deterministic ordering: protocol, T, delta_eps ascending
    keys = [tuple(l.split(",")[:5]) for l in lines[1:]]
    assert keys == sorted(keys)
    for line in lines[1:]:
        rec = line.split(",")
        assert abs(float(rec[9]) - float(rec[4])) <= 1e-10  # mean_work == delta_eps
        assert rec[-1] == ""  # timing blanked


def test_sweep_parallel_matches_serial(capsys):
    argv = [
        "sweep", "--d", "4", "--temp", "1.0", "--delta-eps", "0:1.5:0.5",
        "--protocol", "precision", "--no-timing",
    ]
    _, serial = run_cli(capsys, *argv)
    _, parallel = run_cli(capsys, *argv, "--jobs", "2")
    assert serial == parallel


def test_sweep_skips_out_of_range_points(capsys, caplog):
    code, out = run_cli(
        capsys,
        "sweep", "--d", "2", "--n-qubits", "1", "--temp", "1.0",
        "--delta-eps", "0:2:0.25", "--protocol", "precision", "--no-timing",
    )
    assert code == EXIT_OK
    rows = out.strip().splitlines()[1:]
    # charge range at T=1 for one qubit is ~0.46, so only 0 and 0.25 survive
    assert len(rows) == 2
    assert any("skipping out-of-range" in r.message for r in caplog.records)


def test_sweep_unknown_protocol_exit_code(capsys):
    code, _ = run_cli(
        capsys, "sweep", "--d", "3", "--temp", "1.0",
        "--delta-eps", "0.5", "--protocol", "nonsense",
    )
    assert code == EXIT_VALIDATION


def test_sweep_local_protocol_requires_qubits(capsys):
    code, _ = run_cli(
        capsys, "sweep", "--d", "3", "--temp", "1.0",
        "--delta-eps", "0.5", "--protocol", "slcp",
    )
    assert code == EXIT_VALIDATION


def test_sweep_json_format(capsys):
    code, out = run_cli(
        capsys, "sweep", "--d", "3", "--temp", "1.0", "--delta-eps", "0.5",
        "--protocol", "fluctuation", "--format", "json", "--no-timing",
    )
    assert code == EXIT_OK
    rows = json.loads(out)
    assert len(rows) == 1
    assert rows[0]["protocol"] == "fluctuation"
    assert rows[0]["fluct_sq_eq32"] is not None
    assert rows[0]["extras"]["m_tilde"] >= 0


def test_omega_scales_dimensional_columns(capsys):
    base = ("sweep", "--d", "3", "--temp", "1.0", "--delta-eps", "0.5",
            "--protocol", "precision", "--no-timing")
    _, out1 = run_cli(capsys, *base)
    _, out2 = run_cli(capsys, *base, "--omega", "2.0")
    r1 = out1.strip().splitlines()[1].split(",")
    r2 = out2.strip().splitlines()[1].split(",")
    assert float(r2[6]) == pytest.approx(4.0 * float(r1[6]), rel=1e-12)  # variance
    assert float(r2[4]) == pytest.approx(float(r1[4]))  # delta_eps stays in omega units


def test_compare_self_is_zero():
    s = compare_protocols(3, 1, 1.0, [0.0, 0.3, 0.6], protocols=("precision", "precision"))
    assert s.d_max_v == 0.0
    assert s.area_v == 0.0
    assert s.ratio_d_max == 0.0


def test_compare_rows_grid_mismatch():
    from qbatt import build_spectrum
    from qbatt.precision import charge_min_variance

    spec = build_spectrum(3, 1)
    a = [charge_min_variance(spec, 1.0, de) for de in (0.0, 0.3)]
    b = [charge_min_variance(spec, 1.0, de) for de in (0.0, 0.3, 0.6)]
    with pytest.raises(ValidationError):
        compare_rows(a, b, 1.0)


def test_compare_cli_roundtrip_via_csv(tmp_path, capsys):
    csv_path = tmp_path / "rows.csv"
    code, _ = run_cli(
        capsys, "sweep", "--d", "3", "--temp", "1.0", "--delta-eps", "0:1:0.25",
        "--protocol", "precision,fluctuation", "--out", str(csv_path),
    )
    assert code == EXIT_OK
    code, out = run_cli(capsys, "compare", "--d", "3", "--temp", "1.0",
                        "--delta-eps", "0:1:0.25", "--from-csv", str(csv_path))
    assert code == EXIT_OK
    summary = json.loads(out)[0]
    direct = compare_protocols(3, 1, 1.0, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert summary["ratio_d_max"] == pytest.approx(direct.ratio_d_max, abs=1e-12)
    assert summary["ratio_area"] == pytest.approx(direct.ratio_area, abs=1e-12)


def test_local_subcommand_with_random_rows(capsys):
    code, out = run_cli(
        capsys, "local", "--n-qubits", "3", "--temp", "1.0", "--delta-eps", "0.5,1.0",
        "--protocol", "slcp,local-rand", "--count", "3", "--seed", "7",
        "--restarts", "8", "--no-timing",
    )
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0] == CSV_HEADER
    tags = [l.split(",")[0] for l in lines[1:]]
    assert tags.count("slcp") == 2
    assert tags.count("local-rand") == 6


def test_oracle_subcommand_small_budget(capsys):
    code, out = run_cli(
        capsys, "oracle", "--d", "3", "--temp", "1.0", "--delta-eps", "0.4",
        "--protocol", "oracle-v", "--restarts", "3", "--oracle-iters", "300",
        "--seed", "11", "--no-timing",
    )
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert len(lines) == 2
    assert lines[1].startswith("oracle-v,3,1,")


def test_oracle_subcommand_rejects_other_protocols(capsys):
    code, _ = run_cli(
        capsys, "oracle", "--d", "3", "--temp", "1.0",
        "--delta-eps", "0.4", "--protocol", "precision",
    )
    assert code == EXIT_VALIDATION


def test_info_json(capsys):
    code, out = run_cli(capsys, "info", "--d", "2", "--n-qubits", "4",
                        "--temp", "0", "--format", "json")
    assert code == EXIT_OK
    payload = json.loads(out)
    assert payload["degeneracies"] == [1, 4, 6, 4, 1]
    assert payload["temperatures"][0]["delta_eps_max"] == pytest.approx(4.0)
    assert payload["temperatures"][0]["eps0"] == 0.0


def test_info_text(capsys):
    code, out = run_cli(capsys, "info", "--d", "5", "--temp", "1.0")
    assert code == EXIT_OK
    assert "d=5" in out
    eps0 = 1.0 / math.expm1(1.0) - 5.0 / math.expm1(5.0)
    assert f"{4 - 2*eps0:.9f}" in out


def test_missing_temperature_is_validation_error(capsys):
    code, _ = run_cli(capsys, "sweep", "--d", "3", "--delta-eps", "0.5")
    assert code == EXIT_VALIDATION
