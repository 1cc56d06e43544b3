import math

import numpy as np
import pytest

from steersim.errors import ConfigError
from steersim.flowgen import DEFAULT_CLASSES, FlowGenConfig, bayes_auc, gen_flows
from steersim.metrics import roc_curve


def test_default_mixture_targets_one_eighth_above_10kB():
    # Analytic mixture value, computed independently of the sampler.
    total = 0.0
    for c in DEFAULT_CLASSES:
        if c.volume_model == "lognormal":
            total += c.weight * 0.5 * math.erfc(math.log(10_000 / c.scale) / (c.shape * math.sqrt(2)))
        else:
            total += c.weight * min(1.0, (c.scale / 10_000) ** c.shape)
    assert total == pytest.approx(0.125, abs=2e-3)
    assert FlowGenConfig().exceed_probability(10_000) == pytest.approx(total)


def test_empirical_exceed_fraction():
    flows = gen_flows(FlowGenConfig(n_flows=10_000, seed=5))
    frac = np.mean([f.total_volume > 10_000 for f in flows])
    assert abs(frac - 0.125) <= 0.01


def test_generation_is_deterministic():
    cfg = FlowGenConfig(n_flows=300, seed=9)
    assert gen_flows(cfg) == gen_flows(cfg)
    assert gen_flows(cfg) != gen_flows(FlowGenConfig(n_flows=300, seed=10))


def test_ids_and_counts():
    flows = gen_flows(FlowGenConfig(n_flows=50), first_id=1000)
    assert [f.flow_id for f in flows] == list(range(1000, 1050))
    assert gen_flows(FlowGenConfig(n_flows=0)) == []


def test_first_packet_is_small_and_at_time_zero():
    for f in gen_flows(FlowGenConfig(n_flows=500, seed=2)):
        assert f.first_packet.arrival_time == 0.0
        assert f.first_packet.size <= 1500
        assert len(f.packets) <= 32 + 1


def test_planted_class_sets_ports():
    by_class = {}
    for f in gen_flows(FlowGenConfig(n_flows=2000, seed=1)):
        by_class.setdefault(f.service_class, set()).add(f.key.dst_port)
    for idx, ports in by_class.items():
        assert ports <= set(DEFAULT_CLASSES[idx].ports)


def test_bayes_auc_matches_class_oracle_on_samples():
    # Score each generated flow by its class's exceed probability and compare
    # the empirical AUC with the closed form from the mixture parameters.
    cfg = FlowGenConfig(n_flows=20_000, seed=4)
    flows = gen_flows(cfg)
    scores = [cfg.classes[f.service_class].exceed_probability(10_000) for f in flows]
    labels = [f.total_volume > 10_000 for f in flows]
    assert roc_curve(scores, labels).auc == pytest.approx(bayes_auc(cfg, 10_000), abs=0.01)


def test_signal_free_corpus_has_chance_bayes_auc():
    assert bayes_auc(FlowGenConfig(planted_signal=False), 10_000) == 0.5


@pytest.mark.parametrize(
    "kwargs, path",
    [
        ({"n_flows": -1}, "flows.n_flows"),
        ({"max_records": 0}, "flows.max_records"),
        ({"classes": ()}, "flows.classes"),
    ],
)
def test_config_validation(kwargs, path):
    with pytest.raises(ConfigError) as err:
        FlowGenConfig(**kwargs)
    assert err.value.path == path


def test_config_dict_round_trip():
    cfg = FlowGenConfig(n_flows=77, planted_signal=False, seed=3)
    assert FlowGenConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        FlowGenConfig.from_dict({"bogus": 1})
