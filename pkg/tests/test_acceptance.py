"""Acceptance gate: one test per criterion, each marked ``acceptance(n, title)``.

The terminal summary prints one PASS/FAIL line per criterion (see conftest).
Run just this gate with ``pytest -m acceptance``.
"""

import itertools
import time

import numpy as np
import pytest

from garmentcolor.classify import (
    anchor_features,
    histogram_features,
    multilabel_loss_grad,
    predict_top1,
    softmax_loss_grad,
    swatch_features,
    train_softmax,
)
from garmentcolor.cli import main
from garmentcolor.colorspace import delta_e_2000_array, lab_array_to_srgb, srgb_array_to_lab
from garmentcolor.manifest import split_records
from garmentcolor.metrics import ContingencyTable, cramers_v, lift, lower_median
from garmentcolor.naming import BK_FAMILIES, css_table
from garmentcolor.palette import ACHROMATIC, CHROMATIC, MaskedImage, annotate
from garmentcolor.pipeline import Example, compare_stages, train_pipeline
from garmentcolor.synth import DEMO_HOUSES, SIX_BAND, TWO_TONE, SynthSpec, generate_synthetic, render_swatch

from ciede2000_pairs import PAIRS
from test_classify import numeric_grad, rel_err, separable_swatches

# Colors outside every demo house, used for slots 2..6 in the per-slot and anchor corpora.
OUTSIDERS = ["orange", "gold", "olive", "skyblue", "orchid", "sienna", "slategray", "khaki"]
UNIFORM_SECONDARY = tuple((n, 1 / len(OUTSIDERS)) for n in OUTSIDERS)
MODAL_SECONDARY = (("orange", 0.5),) + tuple((n, 0.5 / 7) for n in OUTSIDERS[1:])


def split(records, part):
    return split_records(records, part, 0.25)


@pytest.mark.acceptance(1, "CIEDE2000 conformance")
def test_criterion_1_ciede2000(record_detail):
    t = time.perf_counter()
    p = np.array(PAIRS)
    de = delta_e_2000_array(p[:, :3], p[:, 3:6])
    secs = time.perf_counter() - t
    err = np.abs(de - p[:, 6]).max()
    record_detail(f"{len(p)} pairs, max |err| {err:.2e}, {secs * 1000:.1f} ms")
    assert len(p) == 34
    assert err <= 1e-4
    assert secs < 1.0


@pytest.mark.acceptance(2, "sRGB/LAB round trip")
def test_criterion_2_round_trip(record_detail):
    t = time.perf_counter()
    levels = np.linspace(0, 255, 17).round().astype(int)
    grid = np.array(list(itertools.product(levels, repeat=3)))
    back, _ = lab_array_to_srgb(srgb_array_to_lab(grid))
    secs = time.perf_counter() - t
    worst = np.abs(back.astype(int) - grid).max()
    record_detail(f"{len(grid)} colors, worst channel error {worst}, {secs:.2f} s")
    assert len(grid) == 17**3
    assert worst <= 1
    assert secs < 5.0


@pytest.mark.acceptance(3, "palette recovery on 70/30 swatches")
def test_criterion_3_palette_recovery(record_detail):
    rng = np.random.default_rng(3)
    n_pixels = 64 * 64
    counts = [round(0.7 * n_pixels), n_pixels - round(0.7 * n_pixels)]
    worst_de = worst_w = 0.0
    ok = 0
    for _ in range(500):
        while True:
            rgb = rng.integers(0, 256, size=(2, 3))
            lab = srgb_array_to_lab(rgb)
            if delta_e_2000_array(lab[:1], lab[1:])[0] > 10:
                break
        p = annotate(render_swatch(rgb.astype(np.uint8), counts, 64)).palette
        de = delta_e_2000_array(np.array(p.colors[:2]), lab).max()
        dw = max(abs(p.weights[0] - 0.7), abs(p.weights[1] - 0.3))
        worst_de, worst_w = max(worst_de, de), max(worst_w, dw)
        ok += de <= 1.0 and dw <= 0.02
    record_detail(f"{ok}/500 records, worst dE00 {worst_de:.3f}, worst weight error {worst_w:.4f}")
    assert ok == 500


@pytest.mark.acceptance(4, "chromatic filter suite")
def test_criterion_4_chromatic_filter(record_detail):
    table = css_table()
    achromatic = [(v, v, v) for v in (0, 16, 48, 80, 105, 128, 160, 192, 210)]
    achromatic += [tuple(table[n].srgb) for n in ("black", "dimgray", "gray", "darkgray", "slategray", "lightslategray")]
    chromatic = [tuple(table[n].srgb) for n in ("white", "snow", "ivory", "whitesmoke", "ghostwhite", "linen")]
    chromatic += [tuple(table[n].srgb) for n in ("red", "lime", "blue", "firebrick", "goldenrod", "navy", "orange", "purple", "deeppink", "teal")]
    cases = [(c, ACHROMATIC) for c in achromatic] + [(c, CHROMATIC) for c in chromatic]
    results = [annotate(MaskedImage.uniform(c, 8, 8)).chromatic == want for c, want in cases]
    record_detail(f"{sum(results)}/{len(cases)} swatches classified as expected")
    assert all(results)


@pytest.mark.acceptance(5, "classifier gradients and separable task")
def test_criterion_5_classifier(record_detail):
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, d, k = rng.integers(2, 8), rng.integers(1, 5), rng.integers(2, 5)
        X = rng.normal(size=(n, d))
        W, b = rng.normal(size=(k, d)), rng.normal(size=k)
        Ys = np.eye(k)[rng.integers(k, size=n)]
        Ym = (rng.random((n, k)) > 0.5).astype(float)
        for fn, Y in ((softmax_loss_grad, Ys), (multilabel_loss_grad, Ym)):
            _, gW, gb = fn(W, b, X, Y, 0.01)
            worst = max(
                worst,
                rel_err(gW, numeric_grad(lambda: fn(W, b, X, Y, 0.01)[0], W)),
                rel_err(gb, numeric_grad(lambda: fn(W, b, X, Y, 0.01)[0], b)),
            )
    data = separable_swatches()
    m = train_softmax(data, BK_FAMILIES, seed=0)
    acc = np.mean([p == l for p, (_, l) in zip(predict_top1(m, [f for f, _ in data]), data)])
    record_detail(f"worst gradient rel. error {worst:.1e} over 40 instances, separable train top-1 {acc:.3f}")
    assert worst < 1e-5
    assert acc >= 0.99


def _stage_report(seed):
    spec = SynthSpec(DEMO_HOUSES, records_per_house=667, noise=4.0, texture=TWO_TONE, seed=seed)
    corpus = generate_synthetic(spec)
    records = corpus.records[:2000]
    ex = {r.id: Example(histogram_features(corpus.images[r.id], 8), r.bk_c1, r.css_c1, r.palette.c1) for r in records}
    models = train_pipeline([ex[r.id] for r in split(records, "train")], seed=seed)
    return compare_stages([ex[r.id] for r in split(records, "test")], models, radius=2.0)


@pytest.mark.acceptance(6, "stage ordering at desk scale")
def test_criterion_6_stage_ordering(record_detail):
    checks, parts = [], []
    for seed in (0, 1, 2):
        rep = _stage_report(seed)
        u, c, p, o = (rep.row(n) for n in ("unconstrained", "css_centroid_only", "predicted_pipeline", "oracle_pipeline"))
        parts.append(f"s{seed}: {u.mean_delta_e:.2f}/{c.mean_delta_e:.2f}/{p.mean_delta_e:.2f}/{o.mean_delta_e:.2f}")
        checks.append(
            o.mean_delta_e <= p.mean_delta_e <= c.mean_delta_e + 0.5 <= u.mean_delta_e
            and o.bk_accuracy >= p.bk_accuracy
        )
    record_detail("mean dE unconstrained/centroid/predicted/oracle " + "; ".join(parts))
    assert all(checks)


@pytest.mark.acceptance(7, "lift arithmetic")
def test_criterion_7_lift_arithmetic(record_detail):
    rows = [(75.95, 46.84, 29.1), (91.0, 68.5, 22.5), (82.3, 60.8, 21.5), (93.4, 80.2, 13.2)]
    lifts = [lift(a / 100, m / 100) for a, m, _ in rows]
    record_detail(", ".join(f"{x:+.2f}pp" for x in lifts))
    for (a, m, printed), x in zip(rows, lifts):
        assert abs(x - (a - m)) < 1e-9
        assert abs(x - printed) <= 0.01 + 1e-9


@pytest.mark.acceptance(8, "per-slot signal collapse")
def test_criterion_8_slot_collapse(record_detail):
    spec = SynthSpec(DEMO_HOUSES, records_per_house=300, noise=3.0, texture=SIX_BAND, seed=0, secondary=UNIFORM_SECONDARY)
    corpus = generate_synthetic(spec)
    train, test = split(corpus.records, "train"), split(corpus.records, "test")
    table = css_table()
    accs, meds = [], []
    for slot in range(6):
        label = (lambda r: r.css_c1) if slot == 0 else (lambda r, s=slot: r.slot_names[s])
        data = [(swatch_features(r.palette), label(r)) for r in train]
        m = train_softmax(data, sorted({l for _, l in data}), seed=0)
        pred = predict_top1(m, [swatch_features(r.palette) for r in test])
        accs.append(np.mean([p == label(r) for p, r in zip(pred, test)]))
        truth = np.array([r.palette.colors[slot] for r in test])
        meds.append(lower_median(delta_e_2000_array(np.array([table[p].centroid for p in pred]), truth)))
    record_detail("top-1 " + "/".join(f"{a:.2f}" for a in accs) + "; median dE " + "/".join(f"{m:.1f}" for m in meds))
    assert all(accs[0] - a >= 0.20 for a in accs[1:])
    assert all(m > meds[0] for m in meds[1:])


def _anchor_lift(secondary, coupling):
    spec = SynthSpec(DEMO_HOUSES, records_per_house=300, noise=3.0, texture=SIX_BAND, seed=0, secondary=secondary, coupling=coupling)
    corpus = generate_synthetic(spec)
    train, test = split(corpus.records, "train"), split(corpus.records, "test")
    anchors = sorted({r.css_c1 for r in corpus.records})
    vocab = sorted({r.slot_names[1] for r in corpus.records})

    def feats(r, anchored):
        f = swatch_features(r.palette)
        return anchor_features(f, r.css_c1, anchors) if anchored else f

    accs = []
    for anchored in (False, True):
        m = train_softmax([(feats(r, anchored), r.slot_names[1]) for r in train], vocab, seed=0)
        pred = predict_top1(m, [feats(r, anchored) for r in test])
        accs.append(np.mean([p == r.slot_names[1] for p, r in zip(pred, test)]))
    return lift(accs[1], accs[0])


@pytest.mark.acceptance(9, "anchor conditioning")
def test_criterion_9_anchor(record_detail):
    correlated = _anchor_lift(UNIFORM_SECONDARY, 0.5)
    independent = _anchor_lift(MODAL_SECONDARY, 0.0)
    record_detail(f"slot-2 lift: correlated {correlated:+.2f}pp, independent {independent:+.2f}pp")
    assert correlated >= 3.0
    assert abs(independent) <= 1.0


@pytest.mark.acceptance(10, "Cramer's V")
def test_criterion_10_cramers_v(record_detail):
    rng = np.random.default_rng(10)
    monk = rng.integers(1, 11, 10_000)
    fam = rng.choice(BK_FAMILIES, 10_000)
    v_ind = cramers_v(ContingencyTable.from_pairs(monk, fam, range(1, 11), BK_FAMILIES))
    perfect = ContingencyTable(np.diag([40, 25, 35, 10]), tuple("abcd"), tuple("wxyz"))
    v_perf = cramers_v(perfect)
    record_detail(f"independent V {v_ind:.4f}, perfect V {v_perf:.12f}")
    assert v_ind < 0.05
    assert abs(v_perf - 1.0) <= 1e-9


def _cli_run(root):
    steps = [
        ["synth", "--out", root / "synth", "--records-per-house", "40", "--noise", "3", "--texture", "two-tone", "--seed", "4"],
        ["annotate", "--images", root / "synth" / "images", "--masks", root / "synth" / "masks", "--out", root / "ann" / "manifest.jsonl", "--seed", "4"],
        ["train", "--manifest", root / "ann" / "manifest.jsonl", "--task", "pipeline", "--features", "histogram", "--out", root / "models", "--seed", "4"],
        ["evaluate", "--manifest", root / "ann" / "manifest.jsonl", "--models", root / "models", "--radius", "2", "--report", root / "report.json"],
    ]
    for argv in steps:
        assert main([str(a) for a in argv]) == 0, argv[0]
    return (root / "report.json").read_bytes()


@pytest.mark.acceptance(11, "end-to-end determinism")
def test_criterion_11_determinism(tmp_path, record_detail):
    a = _cli_run(tmp_path / "a")
    b = _cli_run(tmp_path / "b")
    record_detail(f"report {len(a)} bytes, identical={a == b}")
    assert a == b
