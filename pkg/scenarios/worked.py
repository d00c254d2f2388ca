"""
Worked instances and hand-made schedules.

Holdings are written 1-based, exactly as x_1..x_n and c_1..c_k read, and
converted on load.
"""

from field import FieldSpec
from instance import Instance
from schemes import make_schedule


def _instance(n, clients):
    return Instance.from_lists(n, [[l - 1 for l in c] for c in clients])


def _schedule(n, q, rows):
    """rows: (sender, packets summed) with 1-based indices."""
    field = FieldSpec(q)
    vectors = []
    for sender, packets in rows:
        vec = [0] * n
        for l in packets:
            vec[l - 1] = 1
        vectors.append((sender - 1, vec))
    return make_schedule(vectors, field, scheme="handmade")


# Four clients; c1 got only x1
LONE_PACKET = _instance(4, [[1], [2, 4], [2, 3], [1, 3]])

# Each client misses exactly one packet
COMPLEMENTS = _instance(3, [[2, 3], [1, 3], [1, 2]])

# Leader bound gives 3, two coded sends suffice
FOUR_CLIENT = _instance(4, [[2, 3, 4], [1, 4], [1, 2, 4], [1, 3]])

# Disjoint singletons: every bound meets at n
DISJOINT = _instance(4, [[1], [2], [3], [4]])

LONE_PACKET_SCHEDULE = _schedule(4, 2, [(2, [2, 4]), (3, [2, 3]), (4, [1, 3])])
COMPLEMENTS_SCHEDULE = _schedule(3, 2, [(1, [2, 3]), (2, [1, 3])])
FOUR_CLIENT_SCHEDULE = _schedule(4, 2, [(1, [3, 4]), (3, [1, 2, 4])])

WORKED_INSTANCES = {
    "lone_packet": LONE_PACKET,
    "complements": COMPLEMENTS,
    "four_client": FOUR_CLIENT,
    "disjoint": DISJOINT,
}

HANDMADE_SCHEDULES = {
    "lone_packet": LONE_PACKET_SCHEDULE,
    "complements": COMPLEMENTS_SCHEDULE,
    "four_client": FOUR_CLIENT_SCHEDULE,
}
