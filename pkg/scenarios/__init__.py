"""
Canned scenarios, re-exported from one place.

Usage:
    from scenarios import LONE_PACKET, LONE_PACKET_SCHEDULE
    from scenarios import ALL_SCENARIOS, get_scenario
"""

from errors import UsageError
from scenarios.worked import (
    COMPLEMENTS,
    COMPLEMENTS_SCHEDULE,
    DISJOINT,
    FOUR_CLIENT,
    FOUR_CLIENT_SCHEDULE,
    HANDMADE_SCHEDULES,
    LONE_PACKET,
    LONE_PACKET_SCHEDULE,
    WORKED_INSTANCES,
)

ALL_SCENARIOS = dict(WORKED_INSTANCES)


def get_scenario(name):
    try:
        return ALL_SCENARIOS[name]
    except KeyError:
        raise UsageError(f"Unknown scenario {name!r}; choose from {', '.join(sorted(ALL_SCENARIOS))}")


def get_handmade_schedule(name):
    try:
        return HANDMADE_SCHEDULES[name]
    except KeyError:
        raise UsageError(f"No hand-made schedule for {name!r}; choose from {', '.join(sorted(HANDMADE_SCHEDULES))}")
