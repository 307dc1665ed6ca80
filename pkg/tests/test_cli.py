import importlib.resources as resources
import json
import math

import numpy as np
import pytest

import sparsetomo.cli as cli
import sparsetomo.config as cfgmod
from sparsetomo.config import (
    ConfigError,
    Settings,
    build_experiment,
    build_phantom,
    build_solver,
    compare_configs,
    gamma_params,
    load_config,
    parse_real,
)
from sparsetomo.experiments import n_grid
from sparsetomo.io import read_decay_csv
from sparsetomo.phantoms import load_image
from sparsetomo.solvers import SolverError

SMOKE = resources.files("sparsetomo.configs") / "decay_smoke.cfg"


def write_cfg(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


TINY_EXPERIMENT = """\
[experiment]
regime = decreasing_noise
p = 3/2
transform = wavelet
side = 16
levels = 2
n_min = 6
n_max = 12
n_points = 3
k = 2
c_alpha = 1e-3
master_seed = 7
n_ref = 24

[phantom]
kind = blocks
seed = 1

[solver]
tol_rel_obj = 1e-6
max_outer = 300
"""


# ------------------------------------------------------------ config parsing


def test_load_config_rejects_unknown_sections_and_keys(tmp_path):
    with pytest.raises(ConfigError, match="unknown config section"):
        load_config(write_cfg(tmp_path, "[wormhole]\nx = 1\n"))
    with pytest.raises(ConfigError, match="experiment.frobnicate"):
        load_config(write_cfg(tmp_path, "[experiment]\nfrobnicate = 1\n"))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.cfg")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(write_cfg(tmp_path, "regime = fixed_noise\n"))  # key before section


def test_parse_real_accepts_fractions():
    assert parse_real("4/3") == pytest.approx(4.0 / 3.0)
    assert parse_real(" 1.5 ") == 1.5
    with pytest.raises(ValueError):
        parse_real("4/0")
    with pytest.raises(ValueError):
        parse_real("abc")


def test_missing_required_key_names_the_field(tmp_path):
    sections = load_config(write_cfg(tmp_path, "[experiment]\nregime = fixed_noise\n"))
    st = Settings(sections, desk_scale=True)
    with pytest.raises(ConfigError, match="experiment.p"):
        build_experiment(st)


def test_desk_scale_defaults_fill_geometry(tmp_path):
    sections = load_config(write_cfg(
        tmp_path, "[experiment]\nregime = fixed_noise\np = 3/2\ntransform = wavelet\n"))
    cfg = build_experiment(Settings(sections, desk_scale=True))
    assert (cfg.side, cfg.N_min, cfg.N_max, cfg.K, cfg.n_ref) == (64, 16, 64, 10, 180)
    assert len(n_grid(cfg)) == 6
    full = build_experiment(Settings(sections, desk_scale=False))
    assert (full.side, full.N_min, full.N_max, full.K, full.n_ref) == (128, 36, 162, 30, 500)


def test_config_keys_override_desk_defaults(tmp_path):
    sections = load_config(write_cfg(tmp_path, TINY_EXPERIMENT))
    cfg = build_experiment(Settings(sections, desk_scale=True))
    assert (cfg.side, cfg.N_min, cfg.N_max, cfg.K) == (16, 6, 12, 2)
    assert cfg.c_alpha == 1e-3 and cfg.master_seed == 7
    assert cfg.solver.tol_rel_obj == 1e-6 and cfg.solver.max_outer == 300


def test_bad_values_are_config_errors(tmp_path):
    bad_p = TINY_EXPERIMENT.replace("p = 3/2", "p = 2.7")
    st = Settings(load_config(write_cfg(tmp_path, bad_p)))
    with pytest.raises(ConfigError, match="p must lie"):
        build_experiment(st)
    bad_solver = TINY_EXPERIMENT.replace("tol_rel_obj = 1e-6", "tol_rel_obj = nope")
    st = Settings(load_config(write_cfg(tmp_path, bad_solver, "b.cfg")))
    with pytest.raises(ConfigError, match="solver.tol_rel_obj"):
        build_solver(st)


def test_gamma_and_compare_parsing(tmp_path):
    text = TINY_EXPERIMENT + """
[gamma]
p_list = 3/2, 1.25, 1.1
shared_seed = 21

[compare]
strategies = wavelet:3/2, identity:2
c_alphas = 1e-3, pilot
"""
    st = Settings(load_config(write_cfg(tmp_path, text)))
    p_list, seed = gamma_params(st)
    assert p_list == (1.5, 1.25, 1.1) and seed == 21
    cfgs = compare_configs(st)
    assert [(c.transform.kind, c.p) for c in cfgs] == [("wavelet", 1.5), ("identity", 2.0)]
    assert [c.c_alpha for c in cfgs] == [1e-3, None]
    assert all(c.master_seed == 7 for c in cfgs)

    with pytest.raises(ConfigError, match="expected transform:p"):
        compare_configs(Settings(load_config(write_cfg(
            tmp_path, TINY_EXPERIMENT + "[compare]\nstrategies = wavelet\n", "c2.cfg"))))
    with pytest.raises(ConfigError, match="c_alphas lists"):
        compare_configs(Settings(load_config(write_cfg(
            tmp_path,
            TINY_EXPERIMENT + "[compare]\nstrategies = wavelet:1\nc_alphas = 1,2\n",
            "c3.cfg"))))


def test_phantom_from_file_roundtrip(tmp_path):
    from sparsetomo.io import write_raw_f64
    from sparsetomo.phantoms import generate_phantom

    img = generate_phantom("blocks", 16, seed=1)
    raw = tmp_path / "img.raw_f64"
    write_raw_f64(raw, img)
    text = f"[experiment]\nside = 16\n[phantom]\npath = {raw}\nformat = raw_f64\n"
    st = Settings(load_config(write_cfg(tmp_path, text)))
    loaded = build_phantom(st)
    assert np.array_equal(loaded.values, img.values)

    wrong = f"[experiment]\nside = 32\n[phantom]\npath = {raw}\nformat = raw_f64\n"
    st = Settings(load_config(write_cfg(tmp_path, wrong, "w.cfg")))
    with pytest.raises(ConfigError, match="side"):
        build_phantom(st)


def test_bundled_configs_all_parse_and_build():
    root = resources.files("sparsetomo.configs")
    names = sorted(p.name for p in root.iterdir() if p.name.endswith(".cfg"))
    assert len(names) >= 8
    for name in names:
        sections = load_config(root / name)
        st = Settings(sections, desk_scale=True)
        if "phantom" in sections:
            assert st.geo("side") >= 16
        if name.startswith("decay"):
            cfg = build_experiment(st)
            assert cfg.N_min <= cfg.N_max
        elif name.startswith("gamma"):
            build_experiment(st)
            gamma_params(st)
        elif name.startswith("compare"):
            assert len(compare_configs(st)) == 6
        elif name.startswith("sc_build"):
            cfgmod.sc_build_params(st)
        elif name.startswith("sc_verify"):
            cfgmod.sc_verify_params(st)
            build_experiment(st, default_regime="fixed_noise")


# ------------------------------------------------------------ CLI runs


def run_cli(*argv):
    return cli.main(list(argv))


def test_decay_smoke_writes_everything(tmp_path):
    out = tmp_path / "run"
    with resources.as_file(SMOKE) as cfg_path:
        assert run_cli("decay", "--config", str(cfg_path), "--out", str(out),
                       "--jobs", "1") == 0
    for name in ("decay.csv", "decay.svg", "decay_summary.csv", "decay_manifest.json"):
        assert (out / name).is_file(), name
    records = read_decay_csv(out / "decay.csv")
    assert len(records) == 6 and all(r.status == "ok" for r in records)
    manifest = json.loads((out / "decay_manifest.json").read_text())
    listed = {name.rsplit("/", 1)[-1] for name in manifest["outputs"]}
    actual = {p.name for p in out.iterdir()}
    assert listed == actual  # every output file is listed
    assert manifest["details"]["c_alpha_source"] == "config"
    assert manifest["master_seed"] == 7


def test_decay_reruns_byte_identical(tmp_path):
    outs = []
    with resources.as_file(SMOKE) as cfg_path:
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert run_cli("decay", "--config", str(cfg_path), "--out", str(out),
                           "--jobs", "1") == 0
            outs.append(out)
    for name in ("decay.csv", "decay_summary.csv", "decay.svg"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def test_seed_flag_changes_the_draws(tmp_path):
    with resources.as_file(SMOKE) as cfg_path:
        assert run_cli("decay", "--config", str(cfg_path), "--out",
                       str(tmp_path / "s0"), "--jobs", "1") == 0
        assert run_cli("decay", "--config", str(cfg_path), "--out",
                       str(tmp_path / "s1"), "--jobs", "1", "--seed", "123") == 0
    a = read_decay_csv(tmp_path / "s0" / "decay.csv")
    b = read_decay_csv(tmp_path / "s1" / "decay.csv")
    assert [r.seed for r in a] != [r.seed for r in b]
    manifest = json.loads((tmp_path / "s1" / "decay_manifest.json").read_text())
    assert manifest["master_seed"] == 123


def test_missing_key_exits_2(tmp_path, capsys):
    broken = TINY_EXPERIMENT.replace("p = 3/2\n", "")
    cfg_path = write_cfg(tmp_path, broken)
    assert run_cli("decay", "--config", str(cfg_path), "--out", str(tmp_path)) == 2


def test_solver_failure_exits_3(tmp_path, monkeypatch):
    import sparsetomo.experiments as ex

    def boom(problem, cfg, x0=None):
        raise SolverError("synthetic failure")

    monkeypatch.setattr(ex, "vmila_minimize", boom)
    cfg_path = write_cfg(tmp_path, TINY_EXPERIMENT)
    assert run_cli("decay", "--config", str(cfg_path), "--out", str(tmp_path)) == 3


def test_phantom_command_writes_loadable_images(tmp_path):
    cfg_path = write_cfg(tmp_path, "[experiment]\nside = 16\n[phantom]\nkind = blocks\nseed = 1\n")
    out = tmp_path / "ph"
    assert run_cli("phantom", "--config", str(cfg_path), "--out", str(out)) == 0
    raw = load_image(out / "phantom.raw_f64", "raw_f64")
    pgm = load_image(out / "phantom.pgm", "pgm")
    assert raw.side == pgm.side == 16
    assert np.max(np.abs(raw.values - pgm.values)) < 2e-4  # 16-bit quantization


def test_sc_build_and_verify_commands(tmp_path):
    text = """\
[experiment]
p = 3/2
transform = wavelet
side = 16
levels = 2
n_min = 6
n_max = 16
n_points = 3
k = 2
master_seed = 0
n_ref = 24

[phantom]
kind = blocks
seed = 1

[sc_build]
p = 3/2
alpha_sc = 1e-6

[sc_verify]
beta = 1e-3
k = 2

[solver]
tol_rel_obj = 1e-10
max_outer = 2000
"""
    cfg_path = write_cfg(tmp_path, text)
    out = tmp_path / "sc"
    assert run_cli("sc-build", "--config", str(cfg_path), "--out", str(out)) == 0
    report = json.loads((out / "sc_build_manifest.json").read_text())
    assert report["details"]["residual_rel"] < 0.08
    built = load_image(out / "sc_phantom.raw_f64", "raw_f64")
    assert built.side == 16 and built.values.min() >= 0

    assert run_cli("sc-verify", "--config", str(cfg_path), "--out", str(out)) == 0
    assert (out / "approx_sc.csv").is_file() and (out / "approx_sc.svg").is_file()
    ver = json.loads((out / "sc_verify_manifest.json").read_text())
    assert ver["details"]["target_exponent"] == -1.5


def test_gamma_and_compare_commands(tmp_path):
    text = TINY_EXPERIMENT.replace("regime = decreasing_noise", "regime = fixed_noise") + """
[gamma]
p_list = 3/2, 1.1
shared_seed = 21

[compare]
strategies = wavelet:3/2, identity:2
c_alphas = 1e-3, 1e-3
"""
    cfg_path = write_cfg(tmp_path, text)
    out_g = tmp_path / "g"
    assert run_cli("gamma", "--config", str(cfg_path), "--out", str(out_g)) == 0
    rows = (out_g / "gamma.csv").read_text().strip().splitlines()
    assert rows[0] == "p,rel_distance_to_p1"
    dists = [float(line.split(",")[1]) for line in rows[1:]]
    assert len(dists) == 2 and dists[1] < dists[0]

    out_c = tmp_path / "c"
    assert run_cli("compare", "--config", str(cfg_path), "--out", str(out_c)) == 0
    table = (out_c / "compare.csv").read_text().strip().splitlines()
    assert table[0] == "strategy,N,mean_rel_err_sq"
    manifest = json.loads((out_c / "compare_manifest.json").read_text())
    assert manifest["details"]["best_at_n_max"] in ("wavelet-p1.5", "identity-p2")
    assert len(read_decay_csv(out_c / "compare_records.csv")) == 2 * 6


def test_jobs_flag_validation(tmp_path):
    cfg_path = write_cfg(tmp_path, TINY_EXPERIMENT)
    assert run_cli("decay", "--config", str(cfg_path), "--out", str(tmp_path),
                   "--jobs", "0") == 2
    assert run_cli("decay", "--config", str(cfg_path), "--out", str(tmp_path),
                   "--seed", "-4") == 2
