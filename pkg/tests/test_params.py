import math

import pytest

from poreshape import ConfigError, PhysicalParams, load_config, nondimensionalize
from poreshape.constants import BAR, bar_to_pa, pa_to_bar
from poreshape.params import RunConfig, debye_length


def test_defaults_match_material_table():
    p = PhysicalParams()
    assert p.gamma == 6.5e-2
    assert p.k_S == 5.09e9
    assert p.G_S == 9.22e7
    assert p.sigma_c == 0.16022
    assert p.p_S0 == -6.5e7
    assert p.c0 == 477.90
    assert p.T == 353.0


def test_moduli_admissibility():
    p = PhysicalParams(k_S=5.09e9, G_S=9.22e7)
    assert p.k_S - 2 * p.G_S / 3 > 0
    with pytest.raises(ConfigError, match=r"k_S - \(2/3\)\*G_S"):
        PhysicalParams(k_S=1.0e9, G_S=2.0e9)


def test_sigma_c_must_be_positive():
    with pytest.raises(ConfigError, match="sigma_c"):
        PhysicalParams(sigma_c=0.0)


def test_potential_scale():
    # R*T/F at T = 353 K with R = 8.314, F = 96485
    scales, _ = nondimensionalize(PhysicalParams())
    expected = 8.314 * 353.0 / 96485.0
    assert scales.phi_star == pytest.approx(expected, rel=1e-12)
    assert scales.phi_star == pytest.approx(0.0304176, rel=1e-5)


def test_identity_scaling_is_identity():
    scales, nd = nondimensionalize(PhysicalParams())
    for val in (1.0, 3.7e-9, -2.4e8):
        assert scales.redim_length(scales.nondim_length(val)) == pytest.approx(val, rel=1e-14)
        assert scales.redim_pressure(scales.nondim_pressure(val)) == pytest.approx(val, rel=1e-14)
        assert scales.redim_potential(scales.nondim_potential(val)) == pytest.approx(val, rel=1e-14)


def test_bar_round_trip():
    p_bar = 7349.03
    assert bar_to_pa(p_bar) == pytest.approx(7.34903e8, rel=1e-12)
    assert pa_to_bar(bar_to_pa(p_bar)) == pytest.approx(p_bar, rel=1e-14)


def test_reference_state_consistency():
    # R*T*c0 reproduces the tabulated reference liquid pressure scale
    p = PhysicalParams()
    assert p.RT * p.c0 == pytest.approx(1.4026e6, rel=1e-4)


def test_dimensionless_groups_table_values():
    scales, nd = nondimensionalize(PhysicalParams())
    # frozen from direct arithmetic with the table constants, L* = 1 nm
    assert nd.u0 == pytest.approx(2.14009, rel=1e-5)
    assert nd.g == pytest.approx(7.43622, rel=1e-5)
    assert nd.eps_hat * nd.u0 == pytest.approx(1.0, rel=1e-12)
    assert nd.sigma_hat * nd.u0 == pytest.approx(nd.g, rel=1e-12)
    assert debye_length(PhysicalParams()) == pytest.approx(1e-9 / math.sqrt(nd.u0), rel=1e-12)


def test_unit_rescaling_invariance():
    # expressing pressures in bar instead of N/m^2 leaves the dimensionless
    # moduli unchanged when the scale is converted consistently
    p = PhysicalParams()
    p_scale_pa = p.RT * p.c0
    ratio_pa = p.k_S / p_scale_pa
    ratio_bar = (p.k_S / BAR) / (p_scale_pa / BAR)
    assert ratio_bar == pytest.approx(ratio_pa, rel=1e-12)


def test_identity_scales_trivial():
    scales, nd = nondimensionalize(PhysicalParams(), L_star=1.0)
    assert scales.L_star == 1.0
    assert scales.nondim_length(2.5) == 2.5


def test_load_config_defaults(tmp_path):
    cfg_file = tmp_path / "run.ini"
    cfg_file.write_text("""
[geometry]
d = 2e-9
[solver]
algorithm = fixed_point
""")
    config, params = load_config(str(cfg_file))
    assert params.gamma == 6.5e-2          # table defaults fill the gaps
    assert config.d == 2e-9
    assert config.l == 10e-9


def test_load_config_moduli_rejection(tmp_path):
    cfg_file = tmp_path / "bad.ini"
    cfg_file.write_text("""
[physics]
k_S = 1e9
G_S = 2e9
""")
    with pytest.raises(ConfigError, match=r"k_S - \(2/3\)\*G_S >= 0"):
        load_config(str(cfg_file))


def test_load_config_accepted_moduli(tmp_path):
    cfg_file = tmp_path / "ok.ini"
    cfg_file.write_text("""
[physics]
k_S = 5.09e9
G_S = 9.22e7
""")
    _, params = load_config(str(cfg_file))
    assert params.k_S - 2 * params.G_S / 3 == pytest.approx(5.0285e9, rel=1e-3)


def test_load_config_parse_error(tmp_path):
    cfg_file = tmp_path / "broken.ini"
    cfg_file.write_text("not a section\nk = 1\n")
    with pytest.raises(ConfigError, match="parse error"):
        load_config(str(cfg_file))


def test_load_config_unknown_key(tmp_path):
    cfg_file = tmp_path / "weird.ini"
    cfg_file.write_text("[solver]\nwarp_speed = 9\n")
    with pytest.raises(ConfigError, match="unknown keys"):
        load_config(str(cfg_file))


def test_run_config_validation():
    with pytest.raises(ConfigError, match="channels disconnected"):
        RunConfig(s=3e-9, d=2e-9)
    with pytest.raises(ConfigError, match="err"):
        RunConfig(err=0.0)
    with pytest.raises(ConfigError, match="algorithm"):
        RunConfig(algorithm="magic")
    cfg = RunConfig()
    assert cfg.thickness_eff == pytest.approx(3 * cfg.d)
    assert cfg.max_step_eff == pytest.approx(cfg.d / 8)
