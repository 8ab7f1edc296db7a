import io

import pytest

from tibias import ScenarioConfig, Simulation
from tibias.metrics import compute_metrics, ingest_trace

HAND_TRACE = """\
0.000000 0 send seq=0 retx=0
0.000000 0 send seq=1 retx=0
0.000000 0 send seq=2 retx=0
0.052000 0 drop seq=1 cause=wireless
0.100000 0 deliver seq=0
0.100000 0 deliver seq=2
0.300000 0 reduction cause=dupack seq=1 truth=wireless
0.300000 0 loss seq=1 label=congestion truth=wireless
0.300000 0 send seq=1 retx=1
0.400000 0 deliver seq=1
"""


def test_hand_built_trace():
    tr = ingest_trace(HAND_TRACE.splitlines())
    fc = tr.flows[0]
    assert (fc.sent, fc.delivered, fc.wireless_drops, fc.congestion_drops, fc.in_flight) == \
        (4, 3, 1, 0, 0)
    assert fc.conserved()
    m = compute_metrics(tr, "reno", duration=1.0, seg_size=1500, bottleneck_bandwidth=6000)
    # three distinct segments of 1500 B in one second over a 6000 B/s link
    assert m.goodput == 4500
    assert m.goodput_bps == 36000
    assert m.link_utilization == 0.75
    assert m.retransmission_count == 1
    assert m.superfluous_reductions == 1
    assert m.classification_accuracy == 0.0 and m.classified_events == 1


def test_unscored_when_no_loss_events():
    m = compute_metrics(ingest_trace(HAND_TRACE.splitlines()[:6]), "tibias", 1.0, 1500, 6000)
    assert m.classification_accuracy is None


def test_zero_loss_run_has_no_superfluous_reductions():
    for proto in ("tibias", "reno"):
        m = Simulation(ScenarioConfig(protocol=proto, duration=60)).run()
        assert m.superfluous_reductions == 0


@pytest.mark.parametrize("proto", ["tibias", "reno"])
def test_trace_reproduces_direct_metrics(proto):
    cfg = ScenarioConfig(protocol=proto, duration=40, loss_prob=0.01, queue_capacity=20_000,
                         seed=3)
    buf = io.StringIO()
    direct = Simulation(cfg, buf).run()
    again = compute_metrics(ingest_trace(buf.getvalue().splitlines()), proto, cfg.duration,
                            cfg.seg_size, cfg.bottleneck_bandwidth)
    for f in ("goodput", "link_utilization", "retransmission_count", "superfluous_reductions",
              "classification_accuracy", "classified_events", "metadata_bytes", "segments_sent"):
        assert getattr(again, f) == getattr(direct, f), f


def test_goodput_never_exceeds_bottleneck():
    m = Simulation(ScenarioConfig(duration=100, n_connections=10)).run()
    assert m.goodput <= ScenarioConfig().bottleneck_bandwidth
    assert 0 <= m.link_utilization <= 1
