from .emd import Histogram, TransportPlan, emd
from .sinkhorn import sinkhorn, sinkhorn_plan
from .wmd import nbow, wmd, wmd_reward
