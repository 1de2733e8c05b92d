"""Acceptance gate: one test per release criterion, each printing a
pass/fail line (run with -s or -v to see them).

Expected values marked "frozen" were computed by the independent oracles
in oracles.py / fixture_oracle.py, never by the code paths under test.
"""

import math
import os
import time

import numpy as np
import pytest

from cdfuse.calibrate import _fuse_forced, apply_plausibility, cd_single, fuse_naive
from cdfuse.core import Distribution, LogitVector, softmax
from cdfuse.harness import ReplayProvider, load_dataset, preset_methods, run_eval
from cdfuse.metrics import hellinger
from cdfuse.perturb import DEFAULT_SCHEDULE, ImageTensor, diffuse, downsample
from cdfuse.records import read_records

import fixture_oracle
from testpaths import FIXTURES
from oracles import brute_force_plausibility, mp_hellinger

COMP = os.path.join(FIXTURES, "complementarity")
GOLDEN = os.path.join(FIXTURES, "golden")

N_RANDOM_CASES = 10_000


def _report(name: str):
    print(f"[PASS] {name}")


def _random_case(rng):
    vocab = int(rng.integers(2, 24))
    logits = rng.uniform(-30.0, 30.0, vocab)
    alpha = float(rng.uniform(0.0, 10.0))
    return logits, alpha


def test_calibration_identity_suite():
    """cd_single self-contrast, naive k=1, zero-weight fusion, forced-weight
    fusion: all bit-exact over >= 10^4 randomized cases in under 10 s."""
    rng = np.random.default_rng(2024)
    start = time.monotonic()
    for _ in range(N_RANDOM_CASES):
        logits, alpha = _random_case(rng)
        l = LogitVector.dense(logits)
        variant = LogitVector.dense(rng.uniform(-30.0, 30.0, len(logits)))

        self_contrast = cd_single(l, l, alpha)
        assert np.array_equal(self_contrast.values, l.values)

        single = cd_single(l, variant, alpha)
        for normalize in (False, True):
            naive = fuse_naive(l, [variant], alpha, normalize=normalize)
            assert naive.values.tobytes() == single.values.tobytes()

        zero = _fuse_forced(l, [variant], [0.0])
        assert np.array_equal(zero.values, l.values)

        forced = _fuse_forced(l, [variant], [alpha])
        assert forced.values.tobytes() == single.values.tobytes()
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"identity suite took {elapsed:.2f}s"
    _report(f"calibration identity suite ({N_RANDOM_CASES} cases, {elapsed:.2f}s)")


def test_plausibility_constraint():
    """Randomized survivor-set properties plus the worked beta=0.2 example
    against the brute-force oracle at 1e-12."""
    rng = np.random.default_rng(77)
    for _ in range(2000):
        logits, _ = _random_case(rng)
        calibrated = rng.uniform(-30.0, 30.0, len(logits))
        beta = float(rng.uniform(0.0, 1.0))
        out = apply_plausibility(
            LogitVector.dense(logits), LogitVector.dense(calibrated), beta
        )
        assert out.survivors, "survivor set must never be empty"
        assert int(np.argmax(softmax(LogitVector.dense(logits)).probs)) in out.survivors
        probs = out.distribution.probs
        non_survivors = sorted(set(range(len(logits))) - out.survivors)
        assert (probs[non_survivors] == 0.0).all()
        assert abs(probs.sum() - 1.0) <= 1e-9

    raw = [math.log(0.70), math.log(0.25), math.log(0.05)]
    calibrated = [1.0, 2.0, 9.0]
    out = apply_plausibility(LogitVector.dense(raw), LogitVector.dense(calibrated), 0.2)
    survivors, oracle_probs = brute_force_plausibility(raw, calibrated, 0.2)
    assert sorted(out.survivors) == survivors == [0, 1]
    assert np.abs(out.distribution.probs - [float(p) for p in oracle_probs]).max() < 1e-12
    _report("plausibility constraint (2000 randomized cases + worked beta=0.2 example)")


def test_metric_bounds():
    """Entropy within [0, ln V] with exact endpoints; Hellinger symmetric,
    zero iff equal, in [0, 1]; derived case vs the oracle at 1e-9."""
    one_hot = Distribution(np.array([0.0, 1.0, 0.0, 0.0]))
    assert one_hot.entropy_nats == 0.0
    for v in (2, 4, 32, 151):
        uniform = Distribution(np.full(v, 1.0 / v))
        assert abs(uniform.entropy_nats - math.log(v)) < 1e-12

    rng = np.random.default_rng(5)
    for _ in range(2000):
        v = int(rng.integers(2, 24))
        p = Distribution(np.ascontiguousarray(rng.dirichlet(np.ones(v))))
        q = Distribution(np.ascontiguousarray(rng.dirichlet(np.ones(v))))
        assert 0.0 <= p.entropy_nats <= math.log(v) + 1e-12
        h = hellinger(p, q)
        assert abs(h - hellinger(q, p)) < 1e-12
        assert 0.0 <= h <= 1.0
        assert hellinger(p, p) == 0.0

    got = hellinger(Distribution(np.array([0.5, 0.5])), Distribution(np.array([0.9, 0.1])))
    assert abs(got - float(mp_hellinger([0.5, 0.5], [0.9, 0.1]))) < 1e-9
    assert abs(got - 0.3249196962329063) < 1e-9  # frozen oracle value
    _report("metric bounds (entropy endpoints, Hellinger properties, oracle case)")


def test_perturbation_checks():
    """diffuse step-0 identity, seeded mean shift within 3 SE over 1000
    seeds, downsample identities; all in under 30 s."""
    start = time.monotonic()
    rng = np.random.default_rng(9)
    image = ImageTensor(pixels=rng.uniform(size=(8, 8, 3)))
    out0 = diffuse(image, 0, DEFAULT_SCHEDULE, rng_seed=123)
    assert out0.pixels.tobytes() == image.pixels.tobytes()

    steps, n_seeds = 10, 1000
    flat = ImageTensor(pixels=np.full((8, 8, 3), 0.5))
    expected = math.sqrt(DEFAULT_SCHEDULE.alpha_bar(steps)) * 0.5
    means = np.array(
        [diffuse(flat, steps, DEFAULT_SCHEDULE, rng_seed=s).pixels.mean() for s in range(n_seeds)]
    )
    se = means.std(ddof=1) / math.sqrt(n_seeds)
    assert abs(means.mean() - expected) < 3 * se, (means.mean(), expected, se)

    assert downsample(image, 1).pixels.tobytes() == image.pixels.tobytes()

    i, j = np.indices((4, 4))
    board = ImageTensor(pixels=((i + j) % 2).astype(np.float64)[:, :, None])
    collapsed = downsample(board, 4)
    assert np.abs(collapsed.pixels - 0.5).max() < 1e-6

    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"perturbation checks took {elapsed:.2f}s"
    _report(f"perturbation checks (1000-seed mean shift, identities, {elapsed:.2f}s)")


# frozen by tests/fixture_oracle.py on the shipped 200-item fixture
EXPECTED_ACCURACY = {
    "original": 136 / 200,
    "single-noise": 164 / 200,
    "single-noimage": 168 / 200,
    "entropy-fusion": 196 / 200,
}


def test_desk_scale_complementarity_scenario():
    """Two variant kinds rectify disjoint error subsets; their entropy-weighted
    fusion strictly beats each single-variant method, at the exact accuracies
    precomputed by the brute-force fixture oracle."""
    oracle = fixture_oracle.evaluate(
        os.path.join(COMP, "dataset.jsonl"), os.path.join(COMP, "records.jsonl")
    )
    for method, expected in EXPECTED_ACCURACY.items():
        assert oracle[method]["overall"] == expected, (method, oracle[method])

    items = load_dataset(os.path.join(COMP, "dataset.jsonl"))
    header, records = read_records(os.path.join(COMP, "records.jsonl"))
    report = run_eval(
        items,
        ReplayProvider(records, header),
        preset_methods(
            ["original", "single-noise", "single-noimage", "entropy-fusion"],
            fusion_kinds=("noise", "noimage"),
        ),
        threads=1,
    )
    for method, expected in EXPECTED_ACCURACY.items():
        assert report.overall_accuracy(method) == expected, method
        assert report.micro_accuracy(method) == expected, method

    fused = report.overall_accuracy("entropy-fusion")
    assert fused > report.overall_accuracy("single-noise")
    assert fused > report.overall_accuracy("single-noimage")

    # the two single methods rectify disjoint subsets
    sets = report.revise_correct_sets
    assert not (sets["single-noise"] & sets["single-noimage"])
    _report(
        "complementarity scenario (fusion "
        f"{fused:.3f} > singles {report.overall_accuracy('single-noise'):.3f}/"
        f"{report.overall_accuracy('single-noimage'):.3f}, oracle-exact)"
    )


def test_determinism_and_parallelism():
    """Eval reports byte-identical across reruns and thread counts 1, 4,
    and hardware concurrency."""
    items = load_dataset(os.path.join(COMP, "dataset.jsonl"))
    header, records = read_records(os.path.join(COMP, "records.jsonl"))
    provider = ReplayProvider(records, header)
    methods = preset_methods(
        ["original", "single-noise", "single-noimage", "entropy-fusion"],
        fusion_kinds=("noise", "noimage"),
    )
    hardware = os.cpu_count() or 1
    blobs = set()
    for threads in (1, 1, 4, hardware):
        report = run_eval(items, provider, methods, threads=threads)
        blobs.add(report.to_json_bytes())
        blobs.add(report.to_table_csv().encode())
        blobs.add(report.histograms_csv().encode())
    assert len(blobs) == 3  # one unique blob per artifact kind
    _report(f"determinism & parallelism (threads 1/4/{hardware}, byte-identical)")


def test_report_format_reproduction():
    """CSV report reproduces the benchmark-table layout byte-for-byte
    against the golden fixture."""
    items = load_dataset(os.path.join(GOLDEN, "dataset.jsonl"))
    header, records = read_records(os.path.join(GOLDEN, "records.jsonl"))
    report = run_eval(
        items,
        ReplayProvider(records, header),
        preset_methods(
            [
                "original",
                "single-noise",
                "single-noimage",
                "single-downsample",
                "single-edited",
                "naive-fusion",
                "entropy-fusion",
                "pdd-fusion",
            ]
        ),
        threads=1,
    )
    csv_text = report.to_table_csv()
    lines = csv_text.strip().split("\n")
    assert lines[0] == "method,P-R,P-P,P-A,MME,All"
    assert [line.split(",")[0] for line in lines[1:]] == [
        "original",
        "single-noise",
        "single-noimage",
        "single-downsample",
        "single-edited",
        "naive-fusion",
        "entropy-fusion",
        "pdd-fusion",
    ]
    with open(os.path.join(GOLDEN, "report.csv"), "r", newline="") as fp:
        assert csv_text == fp.read()
    with open(os.path.join(GOLDEN, "report.json"), "rb") as fp:
        assert report.to_json_bytes() == fp.read()
    _report("report-format reproduction (golden CSV/JSON byte match)")
