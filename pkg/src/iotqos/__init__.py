"""Run-time pluggable QoS mechanisms for a REST IoT middleware, with a
discrete-event harness for the vehicular bandwidth-degradation scenario."""

from .anf import (PASS, CompressorConfig, DecompressorConfig, RedirectionPolicy,
                  compress, decompress, deflate, inflate, redirect)
from .autonomic import (AdaptationPlan, AutonomicManager, KnowledgeBase, MetricWindow,
                        NodeEffector, RttSample, Symptom, analyze, execute, monitor, plan,
                        reversal_plan, run_loop)
from .errors import QosError
from .message import Encoding, Kind, Message, ResourceAddress, Verb, deserialize, serialize
from .netsim import LinkProfile, Simulator, Topology, transmit
from .node import (HandlerChainSnapshot, LocalNetwork, NodeRole, NodeRuntime,
                   PluginDescriptor, PluginKind, PluginState)
from .scenario import (MetricsLog, Mode, ScenarioConfig, calibrate, load_config,
                       run_scenario)

__version__ = "0.1.0"
