"""Acceptance suite: every shipped guarantee, one test per criterion.

Each test prints one [PASS]/[FAIL] line (visible with `pytest -s` or in
captured output). Statistical criteria run against the synthetic market
whose exact ground truth is known; nothing here depends on confidential
source data.
"""

import csv
import math
import resource
import subprocess
import sys
import time
from datetime import date

import numpy as np
import pytest

from driftkit.analysis import (
    DriftSeries,
    build_group_schedule,
    contribution_groups,
    drift_matrix,
    global_drift,
    local_drift,
    transition_matrix,
)
from driftkit.canon import canonicalize
from driftkit.divergence import (
    jaccard_distance,
    jsd,
    jsd_alpha_normalized,
    jsd_with_contributions,
)
from driftkit.estimators import bootstrap_jsd, plugin_jsd
from driftkit.forecast import predict_drift, score
from driftkit.popularity import PopularityDistribution
from driftkit.synthmarket import (
    SynthMarketSpec,
    _build_truth,
    item_id,
    sample_counts,
    true_jsd,
)

ID_POOL = [f"i{k}" for k in range(16000)]


def check(criterion, label, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {label} {detail}")
    assert ok, f"criterion {criterion}: {label} {detail}"


def corpus_pairs(n_pairs=1000, max_support=10_000, seed=20240101):
    """The shared seeded corpus of sparse distribution pairs (streamed)."""
    rng = np.random.default_rng(seed)
    for i in range(n_pairs):
        if i % 10 == 0:  # every tenth pair runs at the maximum support
            na = nb = max_support
        else:
            na = int(rng.integers(2, max_support + 1))
            nb = int(rng.integers(2, max_support + 1))
        oa = int(rng.integers(0, 5000))
        ob = int(rng.integers(0, 5000))
        pa = rng.random(na) + 1e-12
        pb = rng.random(nb) + 1e-12
        pa /= pa.sum()
        pb /= pb.sum()
        yield (
            dict(zip(ID_POOL[oa : oa + na], pa.tolist())),
            dict(zip(ID_POOL[ob : ob + nb], pb.tolist())),
        )


@pytest.fixture(scope="module")
def market():
    """The criterion-6 market: K=50000, churn 0.05, gamma=3 on 1% seasonal
    items active Nov-Dec, 500000 loans/bin, 24 monthly bins over 2022-2023."""
    spec = SynthMarketSpec(
        catalog_size=50_000,
        zipf_exponent=1.0,
        monthly_churn=0.05,
        seasonal_fraction=0.01,
        seasonal_multiplier=3.0,
        seasonal_months=(11, 12),
        loans_per_bin=500_000,
        n_bins=24,
        start=date(2022, 1, 1),
        seed=90210,
    )
    dists, truth = sample_counts(spec)
    return spec, dists, truth


def pair_kind(left_bin, right_bin, active=(11, 12)):
    a = left_bin.start.month in active
    b = right_bin.start.month in active
    if a != b:
        return "boundary"
    return "in" if a else "off"


def test_criterion_01_decomposition_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for P, Q in corpus_pairs():
        value, breakdown = jsd_with_contributions(P, Q)
        worst = max(worst, abs(breakdown.total_bits - value.value))
    elapsed = time.perf_counter() - t0
    check(
        1,
        "partial sums equal entropy-form JSD",
        worst <= 1e-12 and elapsed < 10.0,
        f"(worst |diff| {worst:.2e}, limit 1e-12; {elapsed:.1f}s, limit 10s)",
    )


def test_criterion_02_bounds_and_identity():
    in_bounds = True
    for P, Q in corpus_pairs():
        v = jsd(P, Q).value
        if not 0.0 <= v <= 1.0:
            in_bounds = False
        if jsd(P, dict(P)).value != 0.0:
            in_bounds = False
    rng = np.random.default_rng(4)
    disjoint_worst = 0.0
    for k in range(200):
        na = int(rng.integers(1, 2000))
        nb = int(rng.integers(1, 2000))
        pa = rng.random(na) + 1e-12
        pb = rng.random(nb) + 1e-12
        P = dict(zip(ID_POOL[:na], (pa / pa.sum()).tolist()))
        Q = dict(zip(ID_POOL[8000 : 8000 + nb], (pb / pb.sum()).tolist()))
        disjoint_worst = max(disjoint_worst, abs(jsd(P, Q).value - 1.0))
    check(
        2,
        "values in [0,1]; self-JSD exactly 0; disjoint JSD 1",
        in_bounds and disjoint_worst <= 1e-12,
        f"(worst |disjoint - 1| {disjoint_worst:.2e})",
    )


def test_criterion_03_alpha_consistency():
    rng = np.random.default_rng(30303)
    worst_limit = 0.0
    worst_dice = 0.0
    for _ in range(100):
        na = int(rng.integers(2, 400))
        nb = int(rng.integers(2, 400))
        oa = int(rng.integers(0, 600))
        ob = int(rng.integers(0, 600))
        pa = rng.random(na) + 1e-12
        pb = rng.random(nb) + 1e-12
        P = dict(zip(ID_POOL[oa : oa + na], (pa / pa.sum()).tolist()))
        Q = dict(zip(ID_POOL[ob : ob + nb], (pb / pb.sum()).tolist()))
        base = jsd(P, Q).value
        for alpha in (1 - 1e-4, 1 + 1e-4):
            worst_limit = max(
                worst_limit, abs(jsd_alpha_normalized(P, Q, alpha).value - base)
            )
        # order-0 value against the raw order-0 entropy route
        h0_p, h0_q = len(P) - 1, len(Q) - 1
        h0_m = len(set(P) | set(Q)) - 1
        numerator = h0_m - (h0_p + h0_q) / 2
        maximum = 0.5 * (2**1 - 1) * (h0_p + h0_q + 2)
        worst_dice = max(
            worst_dice, abs(jsd_alpha_normalized(P, Q, 0.0).value - numerator / maximum)
        )
    exact_disjoint = jsd_alpha_normalized({"a": 1.0}, {"b": 1.0}, 2.0).value
    check(
        3,
        "order-alpha divergence consistent at its limits",
        worst_limit < 1e-3 and worst_dice <= 1e-12 and exact_disjoint == 1.0,
        f"(alpha->1 dev {worst_limit:.2e} < 1e-3; dice dev {worst_dice:.2e}; "
        f"alpha=2 disjoint {exact_disjoint})",
    )


def test_criterion_04_metric_property():
    rng = np.random.default_rng(40404)

    def sample():
        n = int(rng.integers(2, 300))
        o = int(rng.integers(0, 500))
        p = rng.random(n) + 1e-12
        return dict(zip(ID_POOL[o : o + n], (p / p.sum()).tolist()))

    worst_jsd = worst_jac = 0.0
    for _ in range(1000):
        P, Q, R = sample(), sample(), sample()
        ab = math.sqrt(jsd(P, Q).value)
        bc = math.sqrt(jsd(Q, R).value)
        ac = math.sqrt(jsd(P, R).value)
        worst_jsd = min(worst_jsd, ab + bc - ac)
        jab = jaccard_distance(P, Q).value
        jbc = jaccard_distance(Q, R).value
        jac = jaccard_distance(P, R).value
        worst_jac = min(worst_jac, jab + jbc - jac)
    check(
        4,
        "sqrt-JSD and Jaccard triangle inequalities",
        worst_jsd >= -1e-12 and worst_jac >= -1e-12,
        f"(worst slack sqrt-JSD {worst_jsd:.2e}, jaccard {worst_jac:.2e})",
    )


def test_criterion_05_estimator_bias():
    t0 = time.perf_counter()
    spec = SynthMarketSpec(
        catalog_size=10_000,
        monthly_churn=0.3,
        seasonal_fraction=0.0,
        n_bins=2,
        loans_per_bin=1000,
        seed=2024,
    )
    truth, _, _, _ = _build_truth(spec)
    exact = true_jsd(truth, 0, 1)
    ids = [
        [item_id(x) for x in truth.occupants[b].tolist()] for b in (0, 1)
    ]

    def draw(b, n, rng):
        counts = rng.multinomial(n, truth.weights[b])
        nz = np.flatnonzero(counts)
        table = {ids[b][j]: int(counts[j]) for j in nz}
        return PopularityDistribution(truth.bins[b], "all", table, n)

    plugin_err, corrected_err = [], []
    for i, child in enumerate(np.random.SeedSequence(555).spawn(100)):
        rng = np.random.default_rng(child)
        est = bootstrap_jsd(draw(0, 1000, rng), draw(1, 1000, rng), 500, seed=9000 + i)
        plugin_err.append(abs(est.plugin_value - exact))
        corrected_err.append(abs(est.corrected_value - exact))

    overestimates = 0
    for i, child in enumerate(np.random.SeedSequence(777).spawn(100)):
        rng = np.random.default_rng(child)
        est_null = plugin_jsd(draw(0, 1000, rng), draw(0, 1000, rng))
        overestimates += est_null.value > 0.0
    elapsed = time.perf_counter() - t0
    improved = float(np.mean(corrected_err)) < float(np.mean(plugin_err))
    check(
        5,
        "bootstrap correction beats plugin; plugin overestimates the null",
        improved and overestimates >= 95 and elapsed < 120.0,
        f"(plugin err {np.mean(plugin_err):.4f} vs corrected {np.mean(corrected_err):.4f}; "
        f"null overestimated {overestimates}/100; {elapsed:.0f}s, limit 120s)",
    )


def test_criterion_06_drift_phenomenology(market):
    t0 = time.perf_counter()
    spec, dists, _ = market
    series = local_drift(dists)
    off, boundary = [], []
    for left, point in zip(dists, series.points):
        kind = pair_kind(left.bin, point.bin, spec.seasonal_months)
        if kind == "off":
            off.append(point.value)
        elif kind == "boundary":
            boundary.append(point.value)
    off_arr = np.array(off)
    cv = float(off_arr.std(ddof=1) / off_arr.mean())
    median_off = float(np.median(off_arr))
    boundary_ok = min(boundary) >= 1.5 * median_off

    global_series = global_drift(dists, dists[0].bin.label)
    values = np.array(global_series.values())
    nondecreasing = float(np.mean(np.diff(values) >= 0.0))
    elapsed = time.perf_counter() - t0
    check(
        6,
        "churn market: flat local drift, seasonal bumps, growing global drift",
        cv < 0.15 and boundary_ok and nondecreasing >= 0.90 and elapsed < 300.0,
        f"(off-season CV {cv:.3f} < 0.15; boundary/median {min(boundary) / median_off:.2f} >= 1.5; "
        f"global nondecreasing {nondecreasing:.0%} >= 90%; {elapsed:.0f}s, limit 300s)",
    )


def test_criterion_07_consistency_of_views(market):
    _, dists, _ = market
    window = dists[:8]  # 8 bins: 28 matrix cells at full catalog width
    matrix = drift_matrix(window)
    global_series = global_drift(window, window[0].bin.label)
    local_series = local_drift(window)
    matrix_matches = all(
        matrix.values[0, t] == point.value
        for t, point in enumerate(global_series.points, start=1)
    ) and all(
        matrix.values[t, t + 1] == point.value
        for t, point in enumerate(local_series.points)
    )

    share_dev = 0.0
    for left, right in zip(window, window[1:]):
        _, _, shares = contribution_groups(left, right)
        share_dev = max(share_dev, abs(math.fsum(shares) - 1.0))

    transitions = transition_matrix(build_group_schedule(window))
    row_dev = float(np.abs(transitions.sum(axis=1) - 1.0).max())
    check(
        7,
        "matrix equals series bit-exactly; shares and transition rows sum to 1",
        matrix_matches and share_dev <= 1e-9 and row_dev <= 1e-9,
        f"(share dev {share_dev:.2e}, transition row dev {row_dev:.2e})",
    )


def test_criterion_08_forecast_fidelity(market):
    _, dists, truth = market
    series = local_drift(dists)
    floor_local = float(
        np.mean(
            [
                abs(p.value - true_jsd(truth, i, i + 1))
                for i, p in enumerate(series.points)
            ]
        )
    )
    source = DriftSeries(
        "local", series.measure, [p for p in series.points if p.bin.start.year == 2022]
    )
    observed = DriftSeries(
        "local", series.measure, [p for p in series.points if p.bin.start.year == 2023]
    )
    predicted = predict_drift(source, [p.bin for p in observed.points])
    local_report = score(predicted, observed)

    src_dists = [d for d in dists if d.bin.start.year == 2022]
    tgt_dists = [d for d in dists if d.bin.start.year == 2023]
    source_g = global_drift(src_dists, src_dists[0].bin.label)
    observed_g = global_drift(tgt_dists, tgt_dists[0].bin.label)
    floor_vals = []
    for p in source_g.points:
        floor_vals.append(abs(p.value - true_jsd(truth, 0, truth.bin_index(p.bin.label))))
    tgt_base = truth.bin_index(tgt_dists[0].bin.label)
    for p in observed_g.points:
        floor_vals.append(
            abs(p.value - true_jsd(truth, tgt_base, truth.bin_index(p.bin.label)))
        )
    floor_global = float(np.mean(floor_vals))
    predicted_g = predict_drift(source_g, [p.bin for p in observed_g.points])
    global_report = score(predicted_g, observed_g)

    ok_local = local_report.mae < 3.0 * floor_local
    ok_global = global_report.mae < 3.0 * floor_global
    check(
        8,
        "seasonal-naive forecast within 3x the sampling-noise floor",
        ok_local and ok_global,
        f"(local MAE {local_report.mae:.5f} vs floor {floor_local:.5f}; "
        f"global MAE {global_report.mae:.5f} vs floor {floor_global:.5f})",
    )


def test_criterion_09_canonicalizer_exact():
    letters = "abcdefghijklmnopqrstuvwxyz"

    def code(i):
        out = []
        for _ in range(4):
            i, r = divmod(i, 26)
            out.append(letters[r])
        return "".join(c * 3 for c in reversed(out))

    rows, truth_groups = [], {}
    for i in range(1000):
        stem = code(i)
        base = f"{stem} saga"
        creator = f"w{stem}"
        typo = f"{stem[:-1]}{'q' if stem[-1] != 'q' else 'r'} saga"
        members = {
            f"b{i}_clean": base,
            f"b{i}_typo": typo,
            f"b{i}_punct": base.replace(" saga", ", saga!"),
            f"b{i}_ed1": base + " 1",
        }
        for key, title in members.items():
            rows.append((key, title, creator))
        truth_groups[f"g{i}"] = set(members)
        decoy = f"b{i}_decoy"
        rows.append((decoy, base + " 2", creator))
        truth_groups[decoy] = {decoy}

    rng = np.random.default_rng(909)
    rows = [rows[j] for j in rng.permutation(len(rows))]
    catalog = canonicalize(rows)

    found = {}
    for key, cid in catalog.mapping.items():
        found.setdefault(cid, set()).add(key)

    def pair_set(groups):
        pairs = set()
        for members in groups:
            members = sorted(members)
            for i, a in enumerate(members):
                for b in members[i + 1 :]:
                    pairs.add((a, b))
        return pairs

    predicted = pair_set(found.values())
    expected = pair_set(truth_groups.values())
    precision = len(predicted & expected) / len(predicted) if predicted else 1.0
    recall = len(predicted & expected) / len(expected)

    by_key = {k: (t, c) for k, t, c in rows}
    rerun = canonicalize([(cid, *by_key[cid]) for cid in catalog.groups])
    idempotent = all(rerun.canonical(cid) == cid for cid in catalog.groups)
    check(
        9,
        "variant grouping exact on the generated corpus; idempotent",
        precision == 1.0 and recall == 1.0 and idempotent,
        f"(precision {precision}, recall {recall}, groups {catalog.n_canonical})",
    )


@pytest.mark.slow
def test_criterion_10_determinism_and_scale(tmp_path):
    events = 10_000_000
    bins = 20
    out = tmp_path / "log"
    cli = [sys.executable, "-m", "driftkit.cli"]

    t_gen = time.perf_counter()
    subprocess.run(
        cli
        + [
            "synth",
            "--out",
            str(out),
            "--catalog-size",
            "50000",
            "--loans-per-bin",
            str(events // bins),
            "--bins",
            str(bins),
            "--seed",
            "99",
        ],
        check=True,
        stdout=subprocess.DEVNULL,
    )
    gen_seconds = time.perf_counter() - t_gen
    log_path = out / "events.csv"

    t0 = time.perf_counter()
    # catalog pass: distinct items, then the dedup heuristic
    items_path = tmp_path / "items.csv"
    seen = set()
    with open(log_path, newline="") as fh, open(items_path, "w", newline="") as dst:
        reader = csv.reader(fh)
        writer = csv.writer(dst)
        header = next(reader)
        idx = [header.index(c) for c in ("item_key", "title", "creator")]
        writer.writerow(["item_key", "title", "creator"])
        for row in reader:
            key = row[idx[0]]
            if key not in seen:
                seen.add(key)
                writer.writerow([row[i] for i in idx])
    mapping_path = tmp_path / "mapping.csv"
    subprocess.run(
        cli + ["canon", "--items", str(items_path), "--out", str(mapping_path)],
        check=True,
        stdout=subprocess.DEVNULL,
    )

    run_dir = tmp_path / "run"
    drift_args = cli + [
        "drift",
        "local",
        "--input",
        str(log_path),
        "--catalog",
        str(mapping_path),
        "--output-dir",
        str(run_dir),
        "--seed",
        "7",
    ]
    subprocess.run(drift_args, check=True)
    pipeline_seconds = time.perf_counter() - t0
    first = {p.name: p.read_bytes() for p in run_dir.iterdir()}

    subprocess.run(drift_args, check=True)
    second = {p.name: p.read_bytes() for p in run_dir.iterdir()}

    peak_child_gb = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss / 1e6
    identical = first == second
    with open(run_dir / "drift_local.csv", newline="") as fh:
        n_points = len(list(csv.DictReader(fh)))
    check(
        10,
        "1e7-event pipeline: on time, bounded memory, byte-identical reruns",
        identical and pipeline_seconds < 600.0 and peak_child_gb < 4.0 and n_points == bins - 1,
        f"(pipeline {pipeline_seconds:.0f}s < 600s; generation {gen_seconds:.0f}s; "
        f"peak child RSS {peak_child_gb:.2f} GB < 4 GB; reruns identical: {identical})",
    )
