"""
Line-delimited population snapshots for replaying a run.

One worker per line as ``id,Re,b,c,a,quality,a_declared``; lines starting
with ``#`` are comments. ``a`` is the true arrival step and ``a_declared`` the
step the worker reports, so misreporting populations survive a round trip.
Records without the last field are read as truthful about their arrival.
"""

import csv
import io
from pathlib import Path

from apps.common.exceptions import DomainError
from apps.core.models import Bid, WorkerProfile
from apps.simulation.models import Population

SNAPSHOT_HEADER = "# id,Re,b,c,a,quality,a_declared"
SNAPSHOT_FIELDS = 7
TRUTHFUL_SNAPSHOT_FIELDS = 6


def dumps_population(population: Population) -> str:
    """Serialize a population to snapshot text."""
    bids = {bid.worker_id: bid for bid in population.bids}
    buffer = io.StringIO()
    buffer.write(SNAPSHOT_HEADER + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    for profile in sorted(population.profiles, key=lambda p: p.id):
        bid = bids[profile.id]
        writer.writerow([
            profile.id,
            repr(profile.reputation),
            repr(bid.price),
            repr(profile.true_cost),
            profile.true_arrival,
            repr(profile.internal_quality),
            bid.declared_arrival,
        ])
    return buffer.getvalue()


def loads_population(text: str) -> Population:
    """
    Parse snapshot text back into a population.

    Raises:
        DomainError: If a line is malformed or holds an out-of-range value
    """
    profiles = []
    bids = []
    lines = [line for line in text.splitlines() if line.strip() and not line.startswith("#")]
    for lineno, row in enumerate(csv.reader(lines), start=1):
        if len(row) not in (TRUTHFUL_SNAPSHOT_FIELDS, SNAPSHOT_FIELDS):
            raise DomainError(
                f"Snapshot record {lineno} has {len(row)} fields, "
                f"expected {TRUTHFUL_SNAPSHOT_FIELDS} or {SNAPSHOT_FIELDS}"
            )
        try:
            worker_id = int(row[0])
            reputation, price, cost = float(row[1]), float(row[2]), float(row[3])
            arrival = int(row[4])
            quality = float(row[5])
            declared = int(row[6]) if len(row) == SNAPSHOT_FIELDS else arrival
            profiles.append(
                WorkerProfile(
                    id=worker_id,
                    true_cost=cost,
                    true_arrival=arrival,
                    reputation=reputation,
                    internal_quality=quality,
                )
            )
            bids.append(
                Bid(
                    worker_id=worker_id,
                    declared_arrival=declared,
                    price=price,
                    reputation=reputation,
                )
            )
        except ValueError as exc:
            raise DomainError(f"Snapshot record {lineno} is invalid: {exc}") from exc
    return Population(profiles=tuple(profiles), bids=tuple(bids))


def dump_population(population: Population, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_population(population), encoding="utf-8")


def load_population(path: Path) -> Population:
    return loads_population(path.read_text(encoding="utf-8"))
