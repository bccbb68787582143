"""
Pytest configuration and fixtures for fedauction tests.
"""

import pytest

from apps.core.models import Bid, TaskConfig


def make_bid(worker_id: int, price: float, reputation: float = 1.0, arrival: int = 1) -> Bid:
    return Bid(
        worker_id=worker_id,
        declared_arrival=arrival,
        price=price,
        reputation=reputation,
    )


@pytest.fixture
def bid():
    """Factory for bids with unit reputation arriving at step 1."""
    return make_bid


@pytest.fixture
def task_config():
    """B = 100, T = 10, B_1 = 35."""
    return TaskConfig(budget=100.0, rounds=10, first_round_ratio=0.35)


@pytest.fixture
def witness_schedule():
    """
    Workers 0, 1 and 3 arrive at step 1; worker 2 (group U_1) at step 2.

    U_1 faces thresholds B'(t) / 4 from U_2 = {1, 3}, and no group cap binds
    for any bid of worker 2 down to 1.0.
    """

    def build(price: float = 1.5, arrival: int = 2) -> dict[int, list[Bid]]:
        schedule = {
            1: [make_bid(0, 0.3), make_bid(1, 0.5), make_bid(3, 0.5)],
        }
        schedule.setdefault(arrival, []).append(make_bid(2, price, arrival=arrival))
        return schedule

    return build
