"""Dynamic knowledge graphs from text-game observations."""

try:
    from tkg._core import *  # installed package layout
except ImportError:  # build-tree layout: _core sits on PYTHONPATH
    from _core import *

__all__ = [
    "BeliefGraph",
    "EventKind",
    "GraphEvent",
    "Model",
    "Timestamp",
    "commands_to_events",
    "events_to_commands",
    "load_checkpoint",
    "parse_command",
    "set_f1",
    "sort_commands",
    "tokenize",
    "well_formed",
]
