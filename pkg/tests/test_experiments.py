import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from topocollapse import experiments as ex
from topocollapse.collapse import CollapsePolicy
from topocollapse.errors import ConfigurationError, VisibilityUndefined
from topocollapse.montecarlo import final_state, screen_bin_probabilities
from topocollapse.qstate import Mode, Polarization, born_probability
from topocollapse.scenedsl import SPEED_OF_LIGHT, errors_only, serialize, validate
from topocollapse.timeline import min_separation, schedule

P = CollapsePolicy
FIXTURES = Path(__file__).resolve().parents[1] / "src" / "topocollapse" / "scenes"
GRID32 = np.linspace(0, 2 * np.pi, 32, endpoint=False)
X_OUT = Mode("out", "x", Polarization.V)
Y_OUT = Mode("out", "y", Polarization.V)


class TestPresets:
    @pytest.mark.parametrize("name", ex.PRESETS)
    def test_validates_clean(self, name):
        assert errors_only(validate(ex.preset(name))) == []

    @pytest.mark.parametrize("name", ex.PRESETS)
    def test_golden_fixture(self, name):
        assert (FIXTURES / f"{name}.scene").read_text(encoding="utf-8") == serialize(ex.preset(name))

    def test_fig4_feasible(self):
        doc = ex.preset("fig4", phi=0.0, length=600.0, tau=1e-6)
        assert validate(doc) == []
        assert 600.0 > min_separation(1e-6, 3e8)

    def test_fig1_single_box(self):
        doc = ex.preset("fig1", alpha=1, beta=0)
        assert validate(doc) == []

    def test_fig5_h_only_inside_box(self):
        doc = ex.preset("fig5", L1=300.0, L2=300.0, L3=300.0)
        tl = schedule(doc)
        t = {cid: tl.arrivals[("y", cid)] for cid in ("polL", "PC1", "PC2", "polR")}
        (w1,), (w2,) = doc.pockels_schedule("PC1").windows, doc.pockels_schedule("PC2").windows
        dur = doc.packet_duration
        # PC1 is on for the whole passage of the packet and off again before PC2 switches
        assert t["polL"] + dur < w1[0] < t["PC1"] and t["PC1"] + dur < w1[1] < w2[0]
        assert w2[0] < t["PC2"] and t["PC2"] + dur < w2[1] < t["polR"]

    @pytest.mark.parametrize(
        "name,params",
        [
            ("fig4", {"length": -1.0}),
            ("fig4", {"phi": float("nan")}),
            ("fig4", {"close_fraction": 1.5}),
            ("fig5", {"L2": 1e-3}),
            ("fig1", {"alpha": 1, "beta": 1}),
            ("fig3", {"bins": 1}),
            ("fig4", {"colour": 3}),
            ("fig9", {}),
        ],
    )
    def test_out_of_range(self, name, params):
        with pytest.raises(ConfigurationError):
            ex.preset(name, **params)


class TestAnalyticMZ:
    def test_pov1_at_zero(self):
        pred = ex.analytic_mz(0.0, P.POV1)
        assert pred.detector_probs == {"x": 0.0, "y": 1.0}

    def test_strong_at_zero(self):
        assert ex.analytic_mz(0.0, P.POV2_STRONG).detector_probs["x"] == 0.5

    def test_pov1_third_pi(self):
        # |e^{i pi/3} - 1|^2 = 2 - 2 cos(pi/3) = 1
        assert ex.analytic_mz(math.pi / 3, P.POV1).detector_probs["x"] == pytest.approx(0.25, abs=1e-15)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(-100, 100), st.sampled_from(list(P)), st.sampled_from(["fig4", "fig5"]))
    def test_probabilities_sum_to_one(self, phi, policy, apparatus):
        pred = ex.analytic_mz(phi, policy, apparatus)
        assert sum(pred.detector_probs.values()) + pred.loss == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("policy", list(P))
    @pytest.mark.parametrize("apparatus", ["fig4", "fig5"])
    def test_simulator_matches(self, policy, apparatus):
        for phi in GRID32:
            rho = final_state(ex.preset(apparatus, phi=phi), policy)
            px, py = ex.mz_probabilities(phi, policy, apparatus)
            assert born_probability(rho, X_OUT) == pytest.approx(px, abs=1e-12)
            assert born_probability(rho, Y_OUT) == pytest.approx(py, abs=1e-12)

    def test_fig5_three_way(self):
        vis = {p: ex.analytic_sweep(ex.default_phi_grid(), p, "fig5")[1] for p in P}
        assert vis == {P.POV1: 1.0, P.POV2_STRONG: 1.0, P.POV2_WEAK: 0.0}


class TestScreen:
    screen = ex.preset("fig3").screen

    def test_constructive_centre(self):
        a1, _ = ex.screen_amplitudes(0.0, self.screen)
        assert ex.analytic_screen(0.0, self.screen, P.POV1) == pytest.approx(2 * abs(a1) ** 2, rel=1e-14)

    def test_pov2_is_sum_without_oscillation(self):
        r = np.linspace(0, 3 * self.screen.halfwidth, 4001)
        a1, a2 = ex.screen_amplitudes(r, self.screen)
        dens = ex.analytic_screen(r, self.screen, P.POV2_STRONG)
        assert np.allclose(dens, 0.5 * abs(a1) ** 2 + 0.5 * abs(a2) ** 2, rtol=1e-14)
        assert np.all(np.diff(dens) <= 0)

    def test_difference_is_interference_term(self):
        r = np.linspace(-self.screen.halfwidth, self.screen.halfwidth, 999)
        a1, a2 = ex.screen_amplitudes(r, self.screen)
        diff = ex.analytic_screen(r, self.screen, P.POV1, n=7) - ex.analytic_screen(r, self.screen, P.POV2_STRONG, n=7)
        assert np.allclose(diff, 7 * np.real(a1 * np.conj(a2)), atol=1e-12)

    def test_fringe_spacing(self):
        r = np.linspace(-self.screen.halfwidth, self.screen.halfwidth, 200_001)
        dens = ex.analytic_screen(r, self.screen, P.POV1)
        peaks = r[1:-1][(dens[1:-1] > dens[:-2]) & (dens[1:-1] > dens[2:])]
        spacing = np.mean(np.diff(peaks))
        expected = self.screen.wavelength * self.screen.distance / self.screen.slit_separation
        assert len(peaks) >= 3
        assert abs(spacing - expected) / expected < 0.02

    def test_single_slit_normalized(self):
        value, _ = integrate.quad(lambda r: abs(ex.screen_amplitudes(r, self.screen)[0]) ** 2, -1, 1, points=[0])
        assert value == pytest.approx(1.0, abs=1e-9)

    def test_bin_masses_against_quad(self):
        edges = self.screen.bin_edges()
        masses = ex.bin_masses(lambda r: ex.analytic_screen(r, self.screen, P.POV1), edges)
        for k in (0, 17, 31, 63):
            q, _ = integrate.quad(lambda r: ex.analytic_screen(r, self.screen, P.POV1), edges[k], edges[k + 1])
            assert masses[k] == pytest.approx(q, rel=1e-10)

    @pytest.mark.parametrize("policy", list(P))
    def test_simulated_bins_match_analytic(self, policy):
        scene = ex.preset("fig3")
        _, sim = screen_bin_probabilities(scene, final_state(scene, policy))
        masses = ex.bin_masses(lambda r: ex.analytic_screen(r, self.screen, policy), self.screen.bin_edges())
        assert np.allclose(sim, masses / masses.sum(), atol=1e-9, rtol=0)


class TestVisibility:
    def test_pov1_sweep(self):
        assert ex.analytic_sweep(ex.default_phi_grid(16), P.POV1)[1] == 1.0

    def test_strong_sweep(self):
        assert ex.analytic_sweep(ex.default_phi_grid(16), P.POV2_STRONG)[1] == 0.0

    def test_constant(self):
        assert ex.visibility({0.0: 5, 1.0: 5, 2.0: 5}) == 0.0

    def test_all_zero(self):
        with pytest.raises(VisibilityUndefined):
            ex.visibility([0, 0, 0])

    def test_needs_two(self):
        with pytest.raises(ConfigurationError):
            ex.visibility([3])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 1e6), min_size=2, max_size=40))
    def test_in_unit_interval(self, values):
        if max(values) == 0:
            return
        assert 0.0 <= ex.visibility(values) <= 1.0


def test_speed_constant():
    assert SPEED_OF_LIGHT == 299_792_458.0
