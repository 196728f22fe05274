import json

from curveflow import cli, experiment


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("flow = apmcf\nN = 20\n")
    args = cli.build_parser().parse_args(["--config", str(cfg), "--N", "16", "--t-end", "0.01"])
    config = experiment.load_config(args.config, cli.overrides_from(args))
    assert (config.flow, config.N, config.t_end) == ("apmcf", 16, 0.01)
    assert config.redistribute is True


def test_main_success(tmp_path):
    out = tmp_path / "ok"
    status = cli.main(["--flow", "mcf", "--N", "12", "--t-end", "0.01", "--out", str(out), "--no-redistribute"])
    assert status == 0
    assert "redistribute = False" in (out / "config.txt").read_text()


def test_main_config_error(tmp_path):
    assert cli.main(["--N", "2", "--out", str(tmp_path)]) == experiment.EXIT_CONFIG
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert cli.main(["--config", str(bad)]) == experiment.EXIT_CONFIG


def test_main_blowup(tmp_path):
    out = tmp_path / "rk4"
    status = cli.main(["--flow", "mcf", "--scheme", "rk4", "--dt", "0.01", "--t-end", "0.01", "--out", str(out)])
    assert status == experiment.EXIT_BLOWUP
    assert json.loads((out / "error.json").read_text())["status"] == "blow-up"


def test_sweep_runs_in_parallel_dirs(tmp_path):
    sweep = tmp_path / "sweep.txt"
    sweep.write_text("flow=mcf N=12\nflow=apmcf N=12\n")
    status = cli.main(["--sweep", str(sweep), "--t-end", "0.01", "--out", str(tmp_path / "s"), "--workers", "2"])
    assert status == 0
    for k in range(2):
        assert (tmp_path / "s" / f"run_{k:03d}" / "timeseries.csv").exists()


def test_sweep_rejects_shared_output(tmp_path):
    sweep = tmp_path / "sweep.txt"
    sweep.write_text("out=x\nout=x\n")
    assert cli.main(["--sweep", str(sweep)]) == experiment.EXIT_CONFIG
