"""Packet-level simulation of real-time video delivery to an AI receiver.

The pieces: a correlation-driven bit allocator (allocator, mapfile), a
loss-adaptive frame-rate controller (rate_control), a deterministic link
emulator (netem), frame transport with NACK repair and a
discard-and-substitute sampler (transport), run wiring (session), metric
aggregation (metrics), and scenario/CLI drivers (scenario, cli).
"""

__all__ = ["allocator", "mapfile", "rate_control", "netem", "transport",
           "session", "metrics", "scenario", "cli"]
__version__ = "0.1.0"
