"""Seed derivation for reproducible per-run random streams.

Every simulation run owns a private stream seeded from the identifying
tuple (global seed, design, scenario, replication), never from execution
order, so results are identical regardless of worker count or scheduling.
"""

from __future__ import annotations

import hashlib
import random


def derive_seed(global_seed: int, design_id: int, scenario_id: str, replication: int) -> int:
    material = f"{global_seed}|{design_id}|{scenario_id}|{replication}".encode()
    digest = hashlib.sha256(material).digest()
    return int.from_bytes(digest[:8], "big")


def run_rng(global_seed: int, design_id: int, scenario_id: str, replication: int) -> random.Random:
    return random.Random(derive_seed(global_seed, design_id, scenario_id, replication))
