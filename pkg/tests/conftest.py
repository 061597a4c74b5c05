import math

import pytest

from ltedlsim import radio, sched
from ltedlsim.traffic import BEST_EFFORT


def make_flow(flow_id, flow_class="video", queue_bits=None, hol=0.0, cqi=8,
              pf_avg=1000.0, budget=0.1, ue_id=None, mu=None):
    """FlowSnapshot factory with sensible defaults for scheduler tests."""
    if flow_class == BEST_EFFORT:
        queue_bits = math.inf if queue_bits is None else queue_bits
        budget = math.inf
    elif queue_bits is None:
        queue_bits = 10_000
    return sched.FlowSnapshot(
        flow_id=flow_id,
        ue_id=flow_id if ue_id is None else ue_id,
        flow_class=flow_class,
        queue_bits=queue_bits,
        hol_delay_s=hol,
        cqi=cqi,
        rate_per_prb=radio.transport_block_bits(cqi, 1) if mu is None else mu,
        pf_avg_rate=pf_avg,
        delay_budget_s=budget,
    )


@pytest.fixture
def flow_factory():
    return make_flow
