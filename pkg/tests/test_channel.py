import math

import numpy as np
import pytest

from ltedlsim import channel, radio
from ltedlsim.channel import CellLayout, MobilityState, Position


class TestLinkGain:
    def test_reference_distance(self):
        assert channel.link_gain_db(1000.0) == pytest.approx(-128.1)

    def test_one_decade_closer(self):
        assert channel.link_gain_db(100.0) == pytest.approx(-90.5)

    def test_additive_fade(self):
        assert channel.link_gain_db(1000.0, fade_db=3.0) == pytest.approx(-125.1)

    def test_distance_floor(self):
        assert channel.link_gain_db(0.0) == channel.link_gain_db(10.0)
        assert channel.link_gain_db(3.0) == channel.link_gain_db(10.0)


class TestComputeSinr:
    def test_cell_edge_snr_without_interference(self):
        sinr = channel.compute_sinr(Position(1000.0, 0.0), CellLayout.isolated(), 50)
        expected = (channel.tx_dbm_per_prb(43.0, 50) - 128.1
                    - channel.noise_dbm_per_prb(9.0))
        assert sinr == pytest.approx(expected)
        assert sinr == pytest.approx(10.36, abs=0.01)

    def test_equal_power_interferer_and_negligible_noise(self):
        # UE midway between serving and interfering site; huge transmit power
        # drives the noise term to irrelevance, leaving a 0 dB ratio.
        layout = CellLayout(Position(0.0, 0.0), (Position(1000.0, 0.0),), 150.0, 1000.0)
        sinr = channel.compute_sinr(Position(500.0, 0.0), layout, 50)
        assert sinr == pytest.approx(0.0, abs=1e-6)

    def test_vanishing_interference_recovers_snr(self):
        hexagonal = CellLayout.hexagonal(1000.0)
        pos = Position(400.0, 250.0)
        no_interference = channel.compute_sinr(pos, CellLayout.isolated(), 50)
        faded_out = channel.compute_sinr(pos, hexagonal, 50, interferer_load=1e-12)
        assert faded_out == pytest.approx(no_interference, abs=1e-6)

    def test_monotone_in_interferer_power(self):
        layout = CellLayout.hexagonal(1000.0)
        pos = Position(700.0, -100.0)
        sinrs = [channel.compute_sinr(pos, layout, 50, interferer_load=load)
                 for load in (0.05, 0.2, 0.5, 1.0)]
        assert all(a > b for a, b in zip(sinrs, sinrs[1:]))

    def test_shadow_on_serving_link_shifts_sinr(self):
        base = channel.compute_sinr(Position(500.0, 0.0), CellLayout.isolated(), 50)
        shifted = channel.compute_sinr(Position(500.0, 0.0), CellLayout.isolated(), 50,
                                       shadow_db=(6.0,))
        assert shifted == pytest.approx(base + 6.0)


class TestSinrField:
    def test_matches_scalar_path(self):
        rng = np.random.default_rng(3)
        layout = CellLayout.hexagonal(1000.0)
        site_xy = np.array([[s.x, s.y] for s in layout.sites])
        n, m = 12, len(layout.sites)
        positions = rng.uniform(-700, 700, (n, 2))
        shadow = rng.normal(0.0, 8.0, (n, m))
        fade = channel.rayleigh_fade_db(rng, (n, m))
        field = channel.sinr_field(
            positions, site_xy, channel.tx_dbm_per_prb(43.0, 50),
            channel.noise_dbm_per_prb(9.0), shadow, fade, interferer_load=0.4)
        for i in range(n):
            scalar = channel.compute_sinr(
                Position(*positions[i]), layout, 50,
                shadow_db=tuple(shadow[i]), fade_db=tuple(fade[i]),
                interferer_load=0.4)
            assert field[i] == pytest.approx(scalar, rel=1e-12)


class TestHexLayout:
    def test_six_interferers_on_first_ring(self):
        layout = CellLayout.hexagonal(1000.0)
        assert len(layout.interferer_sites) == 6
        isd = math.sqrt(3.0) * 1000.0
        for site in layout.interferer_sites:
            assert site.radius == pytest.approx(isd)
        angles = sorted(math.atan2(s.y, s.x) % (2 * math.pi)
                        for s in layout.interferer_sites)
        expected = [k * math.pi / 3.0 for k in range(6)]
        assert angles == pytest.approx(expected, abs=1e-9)


class TestMobility:
    def test_straight_step_displacement(self):
        state = MobilityState(Position(0.0, 0.0), 0.3, 120.0 / 3.6, next_turn_in_s=1e9)
        rng = np.random.default_rng(0)
        new = channel.step_position(state, 1e-3, rng)
        moved = math.hypot(new.position.x - state.position.x,
                           new.position.y - state.position.y)
        assert moved == pytest.approx(120.0 / 3.6 * 1e-3)
        assert new.heading == state.heading

    def test_zero_speed_stays_put(self):
        state = MobilityState(Position(12.0, -9.0), 1.0, 0.0, next_turn_in_s=1e9)
        new = channel.step_position(state, 0.5, np.random.default_rng(0))
        assert (new.position.x, new.position.y) == (12.0, -9.0)

    def test_boundary_reflection_keeps_ue_inside(self):
        state = MobilityState(Position(999.99, 0.0), 0.0, 33.333, next_turn_in_s=1e9)
        new = channel.step_position(state, 1e-3, np.random.default_rng(1))
        assert new.position.radius <= 1000.0

    def test_long_run_containment_and_speed(self):
        rng = np.random.default_rng(11)
        speed = 120.0 / 3.6
        state = MobilityState(Position(900.0, 0.0), 2.0, speed, next_turn_in_s=0.5)
        prev = state
        for _ in range(20_000):
            state = channel.step_position(prev, 1e-3, rng, 1000.0, 5.0)
            assert state.position.radius <= 1000.0 + 1e-9
            assert state.speed_mps == speed
            prev = state

    def test_turn_epoch_redraws_heading(self):
        state = MobilityState(Position(0.0, 0.0), 0.0, 10.0, next_turn_in_s=0.0005)
        new = channel.step_position(state, 1e-3, np.random.default_rng(5))
        assert new.next_turn_in_s > 0.0

    def test_deterministic_under_fixed_seed(self):
        def trajectory():
            rng = np.random.default_rng(99)
            st = MobilityState(Position(500.0, 100.0), 1.2, 33.333, 0.3)
            points = []
            for _ in range(2_000):
                st = channel.step_position(st, 1e-3, rng)
                points.append((st.position.x, st.position.y))
            return points

        assert trajectory() == trajectory()


class TestWidebandCqi:
    def test_delegates_to_link_adaptation(self):
        for sinr in (-20.0, 10.36, 40.0):
            assert channel.wideband_cqi(sinr) == radio.sinr_to_cqi(sinr)
