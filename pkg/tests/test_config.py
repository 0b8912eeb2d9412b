import pytest

from polarsim.config import config_hash, parse_config
from polarsim.errors import AssumptionViolated, AutoBurnInUnavailable, ConfigError

MINIMAL = """
# six model parameters plus a horizon
N = 1000
D = 0.05
R = 1
k_on = 0.1
k_off = 1
k_fb = 2
t_end = 0.5
"""


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.params.n_total == 1000
    assert cfg.t_end == 0.5
    assert cfg.burn_in == 0.0
    assert cfg.snapshot_interval is None
    assert cfg.epsilon is None
    assert cfg.replicas == 1
    assert cfg.master_seed == 0
    assert cfg.max_pairs == 10_000
    assert cfg.hemisphere_mode == "auto"
    assert cfg.resolved_dt_max == pytest.approx(1e-3 * 1.0 / 0.05)


def test_dt_max_default_zero_diffusion():
    cfg = parse_config(MINIMAL.replace("D = 0.05", "D = 0"))
    assert cfg.resolved_dt_max == pytest.approx(1e-3)


def test_full_config():
    text = MINIMAL + (
        "burn_in = 10\nsnapshot_interval = 0.01\ndt_max = 0.005\n"
        "epsilon = 0.2\nreplicas = 4\nseed = 99\nmax_pairs = 500\n"
        "hemisphere_mode = exact\n"
    )
    cfg = parse_config(text)
    assert cfg.burn_in == 10.0
    assert cfg.snapshot_interval == 0.01
    assert cfg.dt_max == 0.005
    assert cfg.epsilon == 0.2
    assert cfg.replicas == 4
    assert cfg.master_seed == 99
    assert cfg.max_pairs == 500
    assert cfg.hemisphere_mode == "exact"


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("N = 10\nD = 0\nwibble = 3\n")


def test_duplicate_key_rejected():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config(MINIMAL + "N = 2000\n")


def test_unparsable_value_reports_line():
    with pytest.raises(ConfigError, match="N must be an integer"):
        parse_config("N = lots\nD = 0.05\n")
    with pytest.raises(ConfigError, match="k_on must be a number"):
        parse_config("N = 10\nk_on = fast\n")


def test_missing_parameters():
    with pytest.raises(ConfigError, match="missing required"):
        parse_config("N = 1000\nD = 0.05\n")


def test_assumption_violation_carries_line():
    text = "N = 1000\nD = 0.05\nR = 1\nk_on = 0.1\nk_off = 1\nk_fb = 1\n"
    with pytest.raises(AssumptionViolated, match="line 6"):
        parse_config(text)


def test_geometry_violation_carries_line():
    text = "N = 1000\nD = 0.05\nR = 0\nk_on = 0.1\nk_off = 1\nk_fb = 2\n"
    with pytest.raises(Exception, match="line 3"):
        parse_config(text)


def test_burn_in_auto_resolved():
    cfg = parse_config(MINIMAL + "burn_in = auto\n")
    # 10 relaxation times; relax_rate = k_on*(1-h)/(2h) = 0.05
    assert cfg.burn_in == pytest.approx(10.0 / 0.05)


def test_burn_in_auto_requires_immigration():
    text = MINIMAL.replace("k_on = 0.1", "k_on = 0") + "burn_in = auto\n"
    with pytest.raises(AutoBurnInUnavailable):
        parse_config(text)


@pytest.mark.parametrize("line,match", [
    ("epsilon = 0", "epsilon"),
    ("epsilon = 1", "epsilon"),
    ("snapshot_interval = 0", "snapshot_interval"),
    ("dt_max = -1", "dt_max"),
    ("replicas = 0", "replicas"),
    ("max_pairs = 0", "max_pairs"),
    ("seed = -1", "seed"),
    ("hemisphere_mode = wild", "hemisphere_mode"),
    ("burn_in = -1", "burn_in"),
])
def test_range_validation(line, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(MINIMAL + line + "\n")


def test_negative_t_end_rejected():
    with pytest.raises(ConfigError, match="t_end"):
        parse_config(MINIMAL.replace("t_end = 0.5", "t_end = -2"))


def test_comments_and_blank_lines():
    cfg = parse_config("N=5 # five\n\n  # comment only\nD=0\nR=1\nk_on=0\nk_off=1\nk_fb=2\n")
    assert cfg.params.n_total == 5


def test_overrides():
    cfg = parse_config(MINIMAL)
    cfg2 = cfg.with_overrides(seed=123, replicas=7)
    assert cfg2.master_seed == 123 and cfg2.replicas == 7
    assert cfg.master_seed == 0  # original untouched
    with pytest.raises(ConfigError):
        cfg.with_overrides(replicas=0)
    with pytest.raises(ConfigError):
        cfg.with_overrides(seed=2**64)


def test_config_hash_stability():
    a = config_hash(parse_config(MINIMAL))
    b = config_hash(parse_config(MINIMAL + "# tweak nothing\n"))
    c = config_hash(parse_config(MINIMAL.replace("0.05", "0.06")))
    assert a == b
    assert a != c
    assert len(a) == 64
