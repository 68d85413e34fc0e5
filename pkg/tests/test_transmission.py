import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hivnet import transmission as tx
from hivnet.network import ContactNetwork, EdgeKind, Partnership
from hivnet.population import Agent, Stage
from hivnet.stochastic import RandomStream
from hivnet.transmission import (
    RiskFactorTable,
    TransmissionParams,
    infection_step,
    per_action_probability,
    per_year_edge_probability,
    per_year_infection_probability,
    risk_factor,
    role_averaged_tp,
)

from oracles import expected_edge_probability, infection_frequencies, micro_networks

EXACT = 1e-12
PARAMS = TransmissionParams()
UNIT = RiskFactorTable.constant(1.0)


def _fixed_actions(monkeypatch, counts):
    """Replace the yearly action-count draws with a fixed sequence."""
    it = iter(counts)
    monkeypatch.setattr(tx, "sample_poisson", lambda mean, stream: next(it))


class TestRoleAveraged:
    def test_aids(self):
        assert role_averaged_tp("AIDS") == 0.0

    def test_ap(self):
        assert abs(role_averaged_tp("AP") - 0.0066) < EXACT

    def test_pi1(self):
        assert abs(role_averaged_tp("PI1") - 0.132) < EXACT

    def test_pi2_uses_ap_values(self):
        assert role_averaged_tp("PI2") == role_averaged_tp("AP")

    def test_unknown(self):
        with pytest.raises(ValueError):
            role_averaged_tp("acute")


class TestRiskFactor:
    def test_1998(self):
        assert abs(risk_factor(RiskFactorTable(), 1998) - math.sqrt(1.0 * 0.7)) < EXACT
        assert risk_factor(RiskFactorTable(), 1998) == pytest.approx(0.8367, abs=5e-5)

    def test_1985(self):
        assert abs(risk_factor(RiskFactorTable(), 1985) - math.sqrt(3.5 * 2.8)) < EXACT
        assert risk_factor(RiskFactorTable(), 1985) == pytest.approx(3.1305, abs=5e-5)

    def test_1987_interpolated_row(self):
        assert RiskFactorTable().row(1987)[0] == 2.5 == (3.5 + 1.5) / 2

    @pytest.mark.parametrize("year,row", [(1984, (3.5, 2.8)), (1986, (3.5, 2.8)),
                                          (1991, (1.5, 0.42)), (1995, (0.8, 0.88)),
                                          (1996, (0.9, 0.78)), (1999, (1.0, 0.7)),
                                          (2006, (1.3, 1.3))])
    def test_rows(self, year, row):
        assert RiskFactorTable().row(year) == row

    def test_before_table(self):
        with pytest.raises(KeyError):
            RiskFactorTable().row(1983)

    def test_both_negative(self):
        assert risk_factor(RiskFactorTable(), 1990, False, False) == pytest.approx(1.5)

    def test_rejects_unsorted_rows(self):
        with pytest.raises(ValueError):
            RiskFactorTable(rows=((1990, 1, 1), (1985, 1, 1)))


class TestPerAction:
    @given(tp=st.floats(0.0, 1.0))
    def test_identity_factors(self, tp):
        assert per_action_probability(1, 1, 1, tp) == tp

    def test_fp_product(self):
        assert abs(per_action_probability(0.84, 1, 1, 0.0066) - 0.005544) < EXACT

    @given(f_p=st.floats(0, 1), f_r=st.floats(0, 4), f_t=st.floats(0, 1))
    def test_zero_tp(self, f_p, f_r, f_t):
        assert per_action_probability(f_p, f_r, f_t, 0.0) == 0.0

    def test_clamped(self, caplog):
        assert per_action_probability(1, 10, 1, 0.5) == 1.0
        assert "clamped" in caplog.text


class TestPerYearEdge:
    def _pair(self, stage, kind):
        return Agent(0, 30, stage=stage), Agent(1, 30), Partnership(0, 1, kind, 0, 2)

    def test_negative_transmitter(self, stream):
        i, s, e = self._pair(Stage.SUSCEPTIBLE, EdgeKind.CASUAL)
        assert per_year_edge_probability(i, s, e, 2000, PARAMS, UNIT, stream) == 0.0

    def test_aids_transmitter(self, stream):
        i, s, e = self._pair(Stage.AIDS, EdgeKind.STEADY)
        assert per_year_edge_probability(i, s, e, 2000, PARAMS, UNIT, stream) == 0.0

    def test_ap_casual(self, stream):
        i, s, e = self._pair(Stage.ASYMPTOMATIC, EdgeKind.CASUAL)
        assert abs(per_year_edge_probability(i, s, e, 2000, PARAMS, UNIT, stream) - 0.0066) < EXACT

    def test_ap_steady_thirty_acts(self, stream, monkeypatch):
        _fixed_actions(monkeypatch, [30])
        i, s, e = self._pair(Stage.ASYMPTOMATIC, EdgeKind.STEADY)
        p = per_year_edge_probability(i, s, e, 2000, PARAMS, UNIT, stream)
        assert abs(p - (1 - 0.9934 ** 30)) < EXACT
        # stated as 0.1798; the exact value of this expression is 0.180168
        assert p == pytest.approx(0.180168370157, abs=1e-12)

    def test_pi_casual(self, stream):
        i, s, e = self._pair(Stage.PRIMARY_INFECTION, EdgeKind.CASUAL)
        p = per_year_edge_probability(i, s, e, 2000, PARAMS, UNIT, stream)
        assert abs(p - (0.25 * 0.132 + 0.75 * 0.0066)) < EXACT
        assert abs(p - 0.03795) < EXACT

    def test_pi_steady_fixed_acts(self, stream, monkeypatch):
        _fixed_actions(monkeypatch, [8, 22])
        i, s, e = self._pair(Stage.PRIMARY_INFECTION, EdgeKind.STEADY)
        p = per_year_edge_probability(i, s, e, 2000, PARAMS, UNIT, stream)
        assert abs(p - (1 - 0.868 ** 8 * 0.9934 ** 22)) < EXACT

    def test_casual_reduced_when_susceptible_has_steady(self, stream):
        i, s, e = self._pair(Stage.ASYMPTOMATIC, EdgeKind.CASUAL)
        p = per_year_edge_probability(i, s, e, 2000, PARAMS, UNIT, stream, susceptible_has_steady=True)
        assert abs(p - 0.005544) < EXACT

    def test_treatment_factor(self, stream):
        i, s, e = self._pair(Stage.ASYMPTOMATIC, EdgeKind.CASUAL)
        i.treated, i.treatment_factor = True, 0.3
        p = per_year_edge_probability(i, s, e, 2000, PARAMS, UNIT, stream)
        assert abs(p - 0.3 * 0.0066) < EXACT

    def test_requires_susceptible(self, stream):
        i, s, e = self._pair(Stage.ASYMPTOMATIC, EdgeKind.CASUAL)
        s.stage = Stage.ASYMPTOMATIC
        with pytest.raises(ValueError):
            per_year_edge_probability(i, s, e, 2000, PARAMS, UNIT, stream)


class TestPerYearInfection:
    def test_no_partners(self):
        assert per_year_infection_probability([]) == 0.0
        assert per_year_infection_probability([0.0, 0.0]) == 0.0

    def test_two_partners(self):
        assert abs(per_year_infection_probability([0.1, 0.2]) - 0.28) < EXACT

    @given(st.lists(st.floats(0, 1), max_size=6))
    def test_absorbing(self, probs):
        assert per_year_infection_probability(probs + [1.0]) == 1.0

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=6))
    def test_bounds(self, probs):
        p = per_year_infection_probability(probs)
        assert max(probs) - 1e-12 <= p <= 1.0


class TestInfectionStep:
    def test_fully_susceptible(self, stream):
        net = ContactNetwork()
        for i in range(4):
            net.add_agent(Agent(i, 30), 3)
        net.add_edge(0, 1)
        net.add_edge(2, 3, EdgeKind.STEADY, 2)
        assert infection_step(net, PARAMS, UNIT, 2000, stream) == []

    def test_new_infections_do_not_transmit_same_step(self, stream):
        # chain I - S - S with certain transmission on the first edge
        params = TransmissionParams(tp_ap_receptive=1.0, tp_ap_insertive=1.0)
        net = ContactNetwork()
        net.add_agent(Agent(0, 30, stage=Stage.ASYMPTOMATIC), 1)
        net.add_agent(Agent(1, 30), 2)
        net.add_agent(Agent(2, 30), 1)
        net.add_edge(0, 1)
        net.add_edge(1, 2)
        net.step = 3
        assert infection_step(net, params, UNIT, 2000, stream) == [1]
        assert net.agents[1].infection_step == 3
        assert net.agents[2].stage == Stage.SUSCEPTIBLE

    def test_oracle_values(self):
        assert abs(expected_edge_probability(Stage.ASYMPTOMATIC, True) - (1 - math.exp(-30 * 0.0066))) < 1e-12


@pytest.mark.parametrize("micro", micro_networks(), ids=lambda m: m.name)
def test_micro_network_frequencies(micro):
    n = 20_000
    freq = infection_frequencies(micro, n, seed=4)
    for vid, p in micro.expected.items():
        se = math.sqrt(max(p * (1 - p), 1e-12) / n)
        assert abs(freq[vid] - p) <= 3 * se + 1e-12, (vid, freq[vid], p)


def test_params_validation():
    with pytest.raises(ValueError):
        TransmissionParams(actions_casual=2)
    with pytest.raises(ValueError):
        TransmissionParams(f_p_steady=1.5)
