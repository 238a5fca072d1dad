import pytest

from ksoscp.config import (RunConfig, apply_overrides, load_config, parse_config_text,
                           parse_float_list, parse_int_list, resolve_config)
from ksoscp.exceptions import ConfigError

# one representative alternative value per config key
ALTERNATIVES = {
    "case_id": 3, "n": 77, "m": 55, "d": 2, "seed": 9, "output": "elsewhere",
    "hyper.a": 1.5, "hyper.b": 0.1, "hyper.lambda1": 2.0, "hyper.lambda2": 0.5,
    "solver.learning_rate": 0.02, "solver.momentum": 0.8, "solver.max_iter": 123,
    "solver.tol": 1e-3, "solver.check_every": 25, "solver.strict": True,
    "tuning.enabled": False, "tuning.theta_f": "0.4", "tuning.folds": 4,
    "tuning.budget": 12, "tuning.theta_lo": "0.1", "tuning.theta_hi": "2",
    "tuning.tol": 1e-3, "tuning.max_iter": 500, "tuning.n_boot": 150,
    "metrics.alpha": 0.2, "metrics.n_X": 10, "metrics.n_Y": 20, "metrics.mi_k": 5,
    "metrics.sqi_bins": 25, "metrics.n_test": 300,
    "bench.seeds": "0-3", "bench.cases": "1,2", "bench.methods": "ksos", "bench.jobs": 2,
}
THIRD = {k: (not v if isinstance(v, bool) else
             v + 1 if isinstance(v, int) else
             v * 3 if isinstance(v, float) else v + "x")
         for k, v in ALTERNATIVES.items()}


def _get(cfg, key):
    for part in key.split("."):
        cfg = getattr(cfg, part)
    return cfg


def test_defaults():
    cfg = RunConfig()
    assert (cfg.hyper.a, cfg.hyper.b, cfg.hyper.lambda1, cfg.hyper.lambda2) == (0, 10, 1, 1)
    assert (cfg.solver.learning_rate, cfg.solver.momentum, cfg.solver.max_iter,
            cfg.solver.tol) == (0.01, 0.9, 10_000, 1e-4)
    assert (cfg.metrics.alpha, cfg.metrics.n_X, cfg.metrics.n_Y, cfg.metrics.mi_k,
            cfg.metrics.sqi_bins) == (0.1, 100, 1000, 3, 50)


def test_alternatives_cover_every_key():
    assert sorted(ALTERNATIVES) == RunConfig().keys()


@pytest.mark.parametrize("key", sorted(ALTERNATIVES))
def test_precedence_per_field(tmp_path, key):
    default = _get(RunConfig(), key)
    path = tmp_path / "run.cfg"
    path.write_text(f"# comment\n{key} = {ALTERNATIVES[key]}\n")
    # default only
    assert _get(resolve_config(None, {}), key) == default
    # file beats default
    assert _get(resolve_config(path, {}), key) == ALTERNATIVES[key]
    # flag beats file
    assert _get(resolve_config(path, {key: str(THIRD[key])}), key) == THIRD[key]
    # a missing flag (None) leaves the file value
    assert _get(resolve_config(path, {key: None}), key) == ALTERNATIVES[key]


def test_parse_text():
    got = parse_config_text("a = 1\n\n  # only comment\nb.c=x y # trailing\n")
    assert got == {"a": "1", "b.c": "x y"}


@pytest.mark.parametrize("text", ["no equals sign", " = 3"])
def test_parse_text_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


@pytest.mark.parametrize("over", [{"nope": 1}, {"hyper.nope": 1}, {"nope.a": 1},
                                  {"hyper": 1}, {"n": "ten"}, {"solver.strict": "maybe"}])
def test_bad_overrides(over):
    with pytest.raises(ConfigError):
        apply_overrides(RunConfig(), over)


def test_overrides_do_not_mutate():
    base = RunConfig()
    apply_overrides(base, {"hyper.b": 1.0})
    assert base.hyper.b == 10.0


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/run.cfg")


def test_dict_round_trip():
    cfg = apply_overrides(RunConfig(), {k: v for k, v in ALTERNATIVES.items()})
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_list_parsers():
    assert parse_int_list("0-3,7") == [0, 1, 2, 3, 7]
    assert parse_int_list("5") == [5]
    assert parse_float_list("0.1, 2") == [0.1, 2.0]
