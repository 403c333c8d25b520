"""Executable AADL run-time services with superdense time.

Threads exchange values through infrastructure and application port
states; a director initializes them, dispatches them over a discrete-event
calendar, moves values between connected ports and records every state
change as a trace that can be queried and checked after the run.
"""

__version__ = "0.1.0"

from .values import EVENT, ORIGIN, EnumLiteral, PortQueue, Time, TimestampedValue  # noqa: E402
from .model import InstanceModel, load_model, parse_model, serialize_model  # noqa: E402
from .rts import (DispatchStatus, ThreadState, compute_entrypoint,  # noqa: E402
                  finalize_entrypoint, initialize_entrypoint, receive_input,
                  send_output)
from .behavior import Behavior, BehaviorSpec  # noqa: E402
from .timeout import TimeoutDecl, create_timeout  # noqa: E402
from .temporal import Trace, VariableId, at, eval  # noqa: E402
from .director import Director, load_scenario, parse_scenario, simulate  # noqa: E402

__all__ = [
    "EVENT", "ORIGIN", "EnumLiteral", "PortQueue", "Time", "TimestampedValue",
    "InstanceModel", "load_model", "parse_model", "serialize_model",
    "DispatchStatus", "ThreadState", "compute_entrypoint", "finalize_entrypoint",
    "initialize_entrypoint", "receive_input", "send_output",
    "Behavior", "BehaviorSpec", "TimeoutDecl", "create_timeout",
    "Trace", "VariableId", "at", "eval",
    "Director", "load_scenario", "parse_scenario", "simulate",
]
