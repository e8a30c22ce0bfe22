import numpy as np
import pytest

from iabsim.channel import (
    ChannelParams,
    IAB_TX,
    MBS_TX,
    dbm_to_watt,
    draw_small_scale,
    gain_tensor,
    link_distances,
    noise_power_dbm,
    pathloss_db,
)
from iabsim.topology import Layout, NetworkConfig, deploy


PARAMS = ChannelParams()


def test_pathloss_table_values():
    assert pathloss_db(MBS_TX, 100.0, PARAMS) == pytest.approx(114.0)  # 34 + 40*2
    assert pathloss_db(IAB_TX, 10.0, PARAMS) == pytest.approx(67.0)    # 37 + 30*1
    assert pathloss_db(MBS_TX, 1.0, PARAMS) == pytest.approx(34.0)


def test_pathloss_rejects_nonpositive():
    with pytest.raises(ValueError):
        pathloss_db(MBS_TX, 0.0, PARAMS)
    with pytest.raises(ValueError):
        pathloss_db(IAB_TX, -3.0, PARAMS)
    with pytest.raises(ValueError):
        pathloss_db("other", 5.0, PARAMS)


def test_noise_power_values():
    # -174 + 10*log10(2e7) + 10
    assert noise_power_dbm(PARAMS) == pytest.approx(-90.9897, abs=1e-3)
    assert noise_power_dbm(ChannelParams(bandwidth_hz=1.0, noise_figure_db=0.0)) == pytest.approx(-174.0)
    assert noise_power_dbm(ChannelParams(bandwidth_hz=1e6)) == pytest.approx(-104.0)


def test_noise_per_subchannel_flag():
    p = ChannelParams(noise_per_subchannel=True)
    full = noise_power_dbm(ChannelParams(), 10)
    split = noise_power_dbm(p, 10)
    assert split == pytest.approx(full - 10.0)  # W/10 is 10 dB less


def test_small_scale_statistics():
    rng = np.random.default_rng(0)
    h = draw_small_scale(rng, 4, 10)  # 5 * 9 * 10 = 450 per draw
    draws = [h]
    while sum(d.size for d in draws) < 100_000:
        draws.append(draw_small_scale(rng, 4, 10))
    sample = np.concatenate([d.ravel() for d in draws])
    assert np.all(sample > 0)
    assert 0.99 <= sample.mean() <= 1.01


def test_small_scale_deterministic():
    a = draw_small_scale(np.random.default_rng(9), 2, 3)
    b = draw_small_scale(np.random.default_rng(9), 2, 3)
    assert np.array_equal(a, b)


def test_small_scale_cross_subchannel_independence():
    rng = np.random.default_rng(17)
    n = 100_000
    h = rng.exponential(1.0, size=(n, 2))  # same sampler as draw_small_scale
    r = np.corrcoef(h[:, 0], h[:, 1])[0, 1]
    assert abs(r) < 0.02


def _unit_fading(n_iab, n_chan):
    return np.ones((1 + n_iab, 1 + 2 * n_iab, n_chan))


def test_gain_tensor_known_value():
    # u0 exactly 100 m from the MBS, fading pinned at 1
    layout = Layout(
        mbs_pos=np.zeros(2),
        iab_pos=np.array([[250.0, 0.0]]),
        ue_pos=np.array([[100.0, 0.0], [250.0, 150.0]]),
    )
    ch = gain_tensor(layout, PARAMS, _unit_fading(1, 2))
    assert ch.gains[0, 0, :] == pytest.approx(10 ** (-11.4))


def test_gain_tensor_linearity_and_monotonicity():
    cfg = NetworkConfig(n_iab=2, n_chan=3)
    layout = deploy(cfg, np.random.default_rng(2))
    base = gain_tensor(layout, PARAMS, _unit_fading(2, 3))
    doubled = gain_tensor(layout, PARAMS, 2.0 * _unit_fading(2, 3))
    assert np.allclose(doubled.gains, 2.0 * base.gains)

    # larger distance, same transmitter kind -> smaller gain
    far = Layout(
        mbs_pos=layout.mbs_pos,
        iab_pos=layout.iab_pos,
        ue_pos=layout.ue_pos * 10.0,
    )
    far_ch = gain_tensor(far, PARAMS, _unit_fading(2, 3))
    assert np.all(far_ch.gains[0, 0, :] < base.gains[0, 0, :])


def test_gain_tensor_positive_finite():
    cfg = NetworkConfig(n_iab=3, n_chan=4)
    rng = np.random.default_rng(8)
    layout = deploy(cfg, rng)
    ch = gain_tensor(layout, PARAMS, draw_small_scale(rng, 3, 4))
    assert np.all(ch.gains > 0)
    assert np.all(np.isfinite(ch.gains))


def test_gain_tensor_shape_mismatch():
    cfg = NetworkConfig(n_iab=2, n_chan=2)
    layout = deploy(cfg, np.random.default_rng(0))
    with pytest.raises(ValueError):
        gain_tensor(layout, PARAMS, np.ones((2, 5, 2)))


def test_distance_clamp():
    layout = Layout(
        mbs_pos=np.zeros(2),
        iab_pos=np.array([[250.0, 0.0]]),
        ue_pos=np.array([[0.0, 0.0], [250.0, 0.0]]),  # UEs on top of their BS
    )
    dist = link_distances(layout, min_distance=1.0)
    assert dist.min() >= 1.0


def test_dbm_conversion():
    assert dbm_to_watt(30.0) == pytest.approx(1.0)
    assert dbm_to_watt(43.0) == pytest.approx(19.952, abs=1e-3)
