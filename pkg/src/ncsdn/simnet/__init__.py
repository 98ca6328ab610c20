from .topology import (Demand, Link, Topology, TopologyError, build_butterfly, build_chain,
                       build_parallel_paths, build_two_path, load_topology)
from .trace import LinkCounters, Trace, UnitRecord
from .engine import (ConfigurationError, Event, Simulation, generate_traffic, inject_failures,
                     link_transmit, run)

__all__ = [
    "Demand", "Link", "Topology", "TopologyError", "build_butterfly", "build_chain",
    "build_parallel_paths", "build_two_path", "load_topology", "LinkCounters", "Trace",
    "UnitRecord", "ConfigurationError", "Event", "Simulation", "generate_traffic",
    "inject_failures", "link_transmit", "run",
]
