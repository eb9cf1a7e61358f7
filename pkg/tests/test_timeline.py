import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topocollapse import experiments
from topocollapse.collapse import CollapsePolicy
from topocollapse.errors import ConfigurationError, TimingError
from topocollapse.qstate import Mode, Polarization, born_probability
from topocollapse.scenedsl import SPEED_OF_LIGHT, ShutterTransition, parse
from topocollapse.timeline import EventKind, min_separation, run, schedule, validate_timing

P = CollapsePolicy
C = SPEED_OF_LIGHT
X_OUT = Mode("out", "x", Polarization.V)
Y_OUT = Mode("out", "y", Polarization.V)

CHAIN = """
scene chain
region a
region b
region c
source s region=a path=p pol=V
fiber f1 region=a length=300
fiber f2 region=b length=300
fiber f3 region=c length=300
detector D region=c
passage ab a=a b=b
passage bc a=b b=c
route p via=s,f1,f2,f3,D
constants speed=3e8
"""


def final(scene, policy):
    return run(schedule(scene), scene, policy).state


class TestSchedule:
    def test_fig5_segment_delays(self):
        L1, L2, L3 = 300.0, 450.0, 600.0
        tl = schedule(experiments.preset("fig5", L1=L1, L2=L2, L3=L3))
        t = {cid: tl.arrivals[("y", cid)] for cid in ("polL", "PC1", "PC2", "polR")}
        assert math.isclose(t["PC1"] - t["polL"], L1 / C, rel_tol=1e-15)
        assert math.isclose(t["PC2"] - t["PC1"], L2 / C, rel_tol=1e-15)
        assert math.isclose(t["polR"] - t["PC2"], L3 / C, rel_tol=1e-15)

    def test_chain_is_one_microsecond_per_segment(self):
        tl = schedule(parse(CHAIN))
        times = [tl.arrivals[("p", cid)] for cid in ("f1", "f2", "f3", "D")]
        assert times[0] == 0.0
        for earlier, later in zip(times, times[1:]):
            assert math.isclose(later - earlier, 1e-6, rel_tol=1e-15)

    def test_zero_length_segment_rejected(self):
        with pytest.raises(ConfigurationError):
            schedule(parse(CHAIN.replace("length=300\nfiber f3", "length=0\nfiber f3")))

    def test_unequal_arms_rejected(self):
        scene = experiments.preset("fig4").with_component_params("fx", length=500.0)
        with pytest.raises(ConfigurationError, match="different times"):
            schedule(scene)

    def test_unanchored_routes_rejected(self):
        text = CHAIN + "beamsplitter b1 region=a paths=q:r\nbeamsplitter b2 region=a paths=q:r\n"
        text += "route q via=b1,b2\nroute r via=b2,b1\n"
        with pytest.raises(ConfigurationError, match="cannot be timed"):
            schedule(parse(text))

    def test_events_sorted_with_tiebreak(self):
        tl = schedule(experiments.preset("fig4"))
        keys = [e.sort_key() for e in tl.events]
        assert keys == sorted(keys)
        transitions = [e.kind for e in tl.events if e.kind in (EventKind.SHUTTER_CLOSE, EventKind.SHUTTER_OPEN)]
        assert transitions == [EventKind.SHUTTER_CLOSE] * 2 + [EventKind.SHUTTER_OPEN] * 2
        assert tl.events[-1].kind is EventKind.DETECT

    def test_fiber_packet_window_spans_transit(self):
        tl = schedule(experiments.preset("fig4"))
        (ev,) = tl.traversals("fcav")
        lead, trail = ev.packet_window
        assert math.isclose(trail - lead, 600.0 / C + 1e-9, rel_tol=1e-12)

    def test_declared_times_copied(self):
        scene = experiments.preset("fig4")
        tl = schedule(scene)
        declared = sorted(s.time for s in scene.schedules)
        got = sorted(e.time for e in tl.events if e.kind in (EventKind.SHUTTER_CLOSE, EventKind.SHUTTER_OPEN))
        assert got == declared


class TestValidateTiming:
    def test_fig4_default_ok(self):
        assert validate_timing(schedule(experiments.preset("fig4"))) == []

    def test_close_at_arrival_is_contact(self):
        t_arrive = schedule(experiments.preset("fig4")).arrivals[("y", "A")]
        tl = schedule(experiments.preset("fig4", close_time=t_arrive))
        kinds = {(v.kind, v.component) for v in validate_timing(tl)}
        assert ("contact", "A") in kinds

    def test_b_never_reopens(self):
        scene = experiments.preset("fig4").without_schedules(lambda s: s.id == "openB")
        kinds = {(v.kind, v.component) for v in validate_timing(schedule(scene))}
        assert kinds == {("ordering", "B")}

    def test_pockels_edge_inside_packet(self):
        scene = experiments.preset("fig5")
        t1 = schedule(scene).arrivals[("y", "PC1")]
        text = "\n".join(
            line if not line.startswith("voltage v1") else f"voltage v1 cell=PC1 on={t1 + 0.5e-9!r} off={t1 + 1e-7!r}"
            for line in experiments.preset_text("fig5").splitlines()
        )
        kinds = {v.kind for v in validate_timing(schedule(parse(text)))}
        assert "pockels-edge" in kinds

    def test_run_refuses_violations(self):
        scene = experiments.preset("fig4").without_schedules(lambda s: s.id == "openB")
        with pytest.raises(TimingError) as info:
            run(schedule(scene), scene, P.POV1)
        assert info.value.violations[0].kind == "ordering"

    @settings(max_examples=150, deadline=None)
    @given(st.floats(0.0, 3e-6), st.floats(0.0, 2e-6), st.floats(1e-8, 2e-6))
    def test_ok_means_no_overlap(self, close, hold, tau):
        tl = schedule(experiments.preset("fig4", close_time=close, hold=hold, tau=tau))
        if validate_timing(tl):
            return
        for e in tl.events:
            if e.kind in (EventKind.SHUTTER_CLOSE, EventKind.SHUTTER_OPEN):
                lo, hi = e.time - tau / 2, e.time + tau / 2
                for tr in tl.traversals(e.target):
                    a, b = tr.packet_window
                    assert hi < a or b < lo


class TestMinSeparation:
    def test_light(self):
        assert min_separation(1e-6, 3e8) == 300.0

    def test_atoms(self):
        assert min_separation(1e-6, 10.0) == 1e-5

    def test_half_microsecond(self):
        assert min_separation(0.5e-6, 3e8) == 150.0

    @pytest.mark.parametrize("args", [(0.0, 3e8), (1e-6, -1.0), (float("nan"), 1.0), (1e-6, float("inf"))])
    def test_non_positive(self, args):
        with pytest.raises(ConfigurationError):
            min_separation(*args)


class TestRun:
    def test_fig4_pov1_dark_x(self):
        rho = final(experiments.preset("fig4"), P.POV1)
        assert born_probability(rho, X_OUT) == pytest.approx(0.0, abs=1e-12)

    def test_fig4_pov2_strong_half(self):
        rho = final(experiments.preset("fig4"), P.POV2_STRONG)
        assert born_probability(rho, X_OUT) == pytest.approx(0.5, abs=1e-12)

    def test_no_shutter_events_policy_independent(self):
        scene = experiments.preset("fig4", phi=0.9).without_schedules(lambda s: isinstance(s, ShutterTransition))
        states = [final(scene, p).matrix for p in P]
        assert all(np.array_equal(states[0], m) for m in states[1:])

    @pytest.mark.parametrize("phi", np.linspace(0, 2 * np.pi, 32, endpoint=False))
    def test_pov1_equals_unitary_composition(self, phi):
        rho = final(experiments.preset("fig4", phi=phi), P.POV1)
        e = np.exp(1j * phi)
        amps = {X_OUT: 0.5 * (e - 1), Y_OUT: 0.5 * (e + 1)}
        expected = np.array([[amps.get(a, 0) * np.conj(amps.get(b, 0)) for b in rho.basis] for a in rho.basis])
        assert np.allclose(rho.matrix, expected, atol=1e-12, rtol=0)

    def test_removing_shutter_pair_leaves_pov1_unchanged(self):
        scene = experiments.preset("fig4", phi=1.3)
        trimmed = scene.without_schedules(lambda s: s.id in ("closeA", "openA"))
        assert np.array_equal(final(scene, P.POV1).matrix, final(trimmed, P.POV1).matrix)

    def test_deterministic(self):
        scene = experiments.preset("fig5", phi=0.4)
        for policy in P:
            a, b = final(scene, policy), final(scene, policy)
            assert np.array_equal(a.matrix, b.matrix) and a.basis == b.basis

    def test_history_records_topology(self):
        result = run(schedule(experiments.preset("fig4")), experiments.preset("fig4"), P.POV1)
        assert len(result.history) == 5
        closed_graph = result.history[2][1]
        assert any(cond.kind == "closed" for _, _, cond in closed_graph.passages)

    def test_fig5_weak_collapses_only_weak_policy(self):
        scene = experiments.preset("fig5")
        assert born_probability(final(scene, P.POV1), X_OUT) == pytest.approx(0.0, abs=1e-12)
        assert born_probability(final(scene, P.POV2_STRONG), X_OUT) == pytest.approx(0.0, abs=1e-12)
        assert born_probability(final(scene, P.POV2_WEAK), X_OUT) == pytest.approx(0.5, abs=1e-12)

    def test_fig5_no_loss(self):
        for policy in P:
            assert final(experiments.preset("fig5"), policy).norm_deficit == pytest.approx(0.0, abs=1e-15)

    def test_fig5_without_first_pulse_loses_photon_in_y(self):
        # PC2 alone turns the V packet to H and the exit polarizer absorbs it
        scene = experiments.preset("fig5").without_schedules(lambda s: s.id == "v1")
        rho = final(scene, P.POV1)
        assert rho.norm_deficit == pytest.approx(0.5, abs=1e-12)
