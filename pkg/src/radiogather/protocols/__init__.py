from .ack import AcyclicGatherWithAck, acyclic_gather_with_ack
from .acyclic import AcyclicGather, ActivityPlan, acyclic_gather
from .arb import ArbGather, arb_gather, run_tests
from .common import AcyMessage, BetaSchedule, RumorMessage, ack_frequencies, scc_class_count, theta_for
from .gossip import BrokenGossip, SimpleGossip, check_gossip_contract, gossip_contract, make_gossip
from .roundrobin import RoundRobinGather, roundrobin_gather

__all__ = [
    "AcyMessage", "AcyclicGather", "AcyclicGatherWithAck", "ActivityPlan", "ArbGather", "BetaSchedule",
    "BrokenGossip", "RoundRobinGather", "RumorMessage", "SimpleGossip", "ack_frequencies",
    "acyclic_gather", "acyclic_gather_with_ack", "arb_gather", "check_gossip_contract",
    "gossip_contract", "make_gossip", "roundrobin_gather", "run_tests", "scc_class_count", "theta_for",
]
