import csv
from datetime import date
from pathlib import Path

import numpy as np
import pytest

from driftkit.events import assign_bin
from driftkit.popularity import PopularityDistribution

ID_POOL = [f"i{k}" for k in range(20000)]


def random_rel_pair(rng, max_support=1000, pool=6000):
    """Two overlapping sparse relative distributions as plain dicts."""
    na = int(rng.integers(2, max_support + 1))
    nb = int(rng.integers(2, max_support + 1))
    oa = int(rng.integers(0, pool))
    ob = int(rng.integers(0, pool))
    pa = rng.random(na) + 1e-9
    pb = rng.random(nb) + 1e-9
    pa /= pa.sum()
    pb /= pb.sum()
    return (
        dict(zip(ID_POOL[oa : oa + na], pa.tolist())),
        dict(zip(ID_POOL[ob : ob + nb], pb.tolist())),
    )


def random_rel(rng, max_support=1000, pool=6000):
    return random_rel_pair(rng, max_support, pool)[0]


def month_bin(year, month):
    return assign_bin(date(year, month, 1), "month")


def dist(counts, year=2022, month=1, cohort="all"):
    return PopularityDistribution(month_bin(year, month), cohort, dict(counts), sum(counts.values()))


def write_events_csv(path: Path, rows, header=None):
    header = header or [
        "loan_date",
        "item_key",
        "title",
        "creator",
        "category",
        "medium",
        "loaner_id",
        "birthdate",
        "sex",
        "education",
        "residence",
    ]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def event_row(
    loan_date="2022-03-10",
    item_key="k1",
    title="Some Title",
    creator="Some Writer",
    category="adult_fiction",
    medium="physical",
    loaner_id="L1",
    birthdate="1980-05-05",
    sex="female",
    education="higher",
    residence="large_city",
):
    return [
        loan_date,
        item_key,
        title,
        creator,
        category,
        medium,
        loaner_id,
        birthdate,
        sex,
        education,
        residence,
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)
