import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from garmentcolor.classify import SWATCH, FeatureVector, swatch_features
from garmentcolor.colorspace import LabColor, delta_e_2000_array
from garmentcolor.errors import EmptyData, SchemaMismatch, SingularSystem
from garmentcolor.manifest import split_records
from garmentcolor.naming import BK_FAMILIES, css_table
from garmentcolor.pipeline import (
    CENTROID,
    ORACLE,
    PREDICTED,
    STAGE_ROWS,
    Example,
    PipelineModels,
    RegressorModel,
    compare_stages,
    predict_batch,
    predict_hierarchical,
    project_to_ball,
    train_lab_regressor,
    train_pipeline,
)
from garmentcolor.synth import DEMO_HOUSES, HouseRegime, SynthSpec, generate_synthetic

lab_points = st.tuples(st.floats(0, 100), st.floats(-100, 100), st.floats(-100, 100))


def fv(x):
    return FeatureVector(np.asarray(x, float), SWATCH)


def examples_from(corpus):
    return [Example(swatch_features(r.palette), r.bk_c1, r.css_c1, r.palette.c1) for r in corpus.records]


@pytest.fixture(scope="module")
def small_corpus():
    return generate_synthetic(SynthSpec(DEMO_HOUSES, records_per_house=120, noise=4.0, seed=0))


@pytest.fixture(scope="module")
def trained(small_corpus):
    ex = examples_from(small_corpus)
    train = [e for e, r in zip(ex, small_corpus.records) if r in split_records(small_corpus.records, "train", 0.25)]
    return train_pipeline(train, seed=0), ex


# ---------------------------------------------------------------- regression


def test_constant_targets_give_constant_prediction():
    rng = np.random.default_rng(0)
    data = [(fv(rng.normal(size=3)), (40.0, 10.0, -5.0)) for _ in range(30)]
    m = train_lab_regressor(data, ridge=0.0)
    for x in rng.normal(size=(5, 3)):
        assert np.allclose(m.predict(fv(x)), (40.0, 10.0, -5.0), atol=1e-9)


def test_exact_linear_relation_recovered():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(4, 3)) * 5
    b = np.array([50.0, 3.0, -4.0])
    X = rng.normal(size=(50, 4)) * 0.5
    Y = X @ A + b
    m = train_lab_regressor([(fv(x), y) for x, y in zip(X, Y)], ridge=0.0)
    assert np.abs(m.weights - A).max() < 1e-8
    assert np.abs(m.bias - b).max() < 1e-8


def test_fit_beats_zero_model():
    rng = np.random.default_rng(2)
    X = rng.random((60, 5))
    Y = np.column_stack([rng.uniform(20, 80, 60), rng.normal(0, 30, (60, 2))])
    m = train_lab_regressor([(fv(x), y) for x, y in zip(X, Y)], ridge=1e-3)
    fitted = ((m.predict_array([fv(x) for x in X]) - Y) ** 2).sum()
    assert fitted <= (Y**2).sum()


def test_regressor_errors():
    with pytest.raises(EmptyData):
        train_lab_regressor([])
    x = fv([1.0, 2.0, 2.0])
    with pytest.raises(SingularSystem):
        # Duplicate column -> rank-deficient normal equations.
        train_lab_regressor([(fv([i, i, 1.0]), (50, 0, 0)) for i in range(5)], ridge=0.0)
    m = train_lab_regressor([(x, (50, 0, 0)), (fv([0.0, 1.0, 0.0]), (40, 1, 1))])
    with pytest.raises(SchemaMismatch):
        m.predict(fv([1.0]))


def test_regressor_round_trip():
    m = RegressorModel(SWATCH, np.arange(15.0).reshape(5, 3), [1.0, 2.0, 3.0], {"seed": 4})
    back = RegressorModel.from_dict(m.to_dict(), SWATCH)
    assert np.array_equal(back.weights, m.weights) and back.metadata == {"seed": 4}


# ---------------------------------------------------------------- projection


def test_projection_examples():
    c = LabColor(50, 0, 0)
    assert project_to_ball(c, c, 10) == c
    inside = LabColor(53, 4, 0)
    assert project_to_ball(inside, c, 10) == inside
    far = LabColor(50, 20, 0)  # distance 2r
    assert np.allclose(project_to_ball(far, c, 10), (50, 10, 0))


@given(lab_points, lab_points, st.floats(0.01, 60))
@settings(max_examples=200)
def test_projection_properties(p, c, r):
    p, c = np.array(p), np.array(c)
    q = np.array(project_to_ball(p, c, r))
    assert np.linalg.norm(q - c) <= r + 1e-9
    if np.linalg.norm(p - c) <= r:
        assert np.allclose(q, p)
    else:
        # The point at distance r on the segment from c towards p.
        assert np.allclose(q, c + r * (p - c) / np.linalg.norm(p - c))


# ---------------------------------------------------------------- hierarchical prediction


def test_family_consistency_and_constraint(trained):
    models, ex = trained
    recs = predict_batch([e.features for e in ex], models, 7.5)
    for r in recs:
        assert r.css.family == r.bk
        d = np.linalg.norm(np.array(r.lab) - np.array(r.css.centroid))
        assert d <= 7.5 + 1e-9
        assert (r.bk_source, r.css_source) == (PREDICTED, PREDICTED)


def test_radius_zero_is_centroid(trained):
    models, ex = trained
    for r in predict_batch([e.features for e in ex[:50]], models, 0.0):
        assert r.lab == r.css.centroid
        assert r.lab_source == CENTROID


def test_oracle_with_centroid_regressor_reproduces_centroid(trained):
    models, ex = trained
    e = ex[0]
    css = css_table()[e.css]
    # A regressor that outputs the CSS centroid exactly, whatever the input.
    reg = RegressorModel(SWATCH, np.zeros((5, 3)), np.array(css.centroid))
    m = PipelineModels(models.bk_model, models.css_models, reg, models.table, {})
    r = predict_hierarchical(e.features, m, 10.0, oracle=(e.bk, e.css))
    assert np.allclose(r.lab, css.centroid)
    assert (r.bk, r.css.name, r.bk_source) == (e.bk, e.css, ORACLE)


def test_oracle_rejects_inconsistent_pair(trained):
    models, ex = trained
    with pytest.raises(ValueError):
        predict_hierarchical(ex[0].features, models, 10.0, oracle=("blue", "firebrick"))


def test_perfect_upstream_equals_oracle():
    spec = SynthSpec(
        (HouseRegime("h", (("firebrick", 0.4), ("navy", 0.3), ("goldenrod", 0.3))),),
        records_per_house=90,
        seed=2,
    )
    ex = examples_from(generate_synthetic(spec))
    models = train_pipeline(ex, seed=0)
    feats = [e.features for e in ex]
    pred = predict_batch(feats, models, 10.0)
    assert all(p.bk == e.bk and p.css.name == e.css for p, e in zip(pred, ex))
    orc = predict_batch(feats, models, 10.0, [(e.bk, e.css) for e in ex])
    assert [(p.bk, p.css.name, p.lab) for p in pred] == [(o.bk, o.css.name, o.lab) for o in orc]
    rep = compare_stages(ex, models, 10.0)
    assert rep.row("predicted_pipeline").mean_delta_e == rep.row("oracle_pipeline").mean_delta_e


def test_css_models_cover_all_families(trained):
    models, _ = trained
    assert set(models.css_models) == set(BK_FAMILIES)


# ---------------------------------------------------------------- stage comparison


def test_stage_report_schema_and_recomputation(trained):
    models, ex = trained
    rep = compare_stages(ex, models, 10.0)
    assert tuple(r.name for r in rep.rows) == STAGE_ROWS
    for r in rep.rows:
        assert r.mean_delta_e >= 0 and r.median_delta_e >= 0
        assert 0 <= r.bk_accuracy <= 1
        assert r.n == len(ex)
    # Independent recomputation of the centroid-only row.
    idx = np.argmax(models.bk_model.scores([e.features for e in ex]), axis=1)
    cents = []
    for e, i in zip(ex, idx):
        fam = BK_FAMILIES[i]
        m = models.css_models[fam]
        s = m.scores(e.features)[0]
        allowed = [j for j, n in enumerate(m.vocab) if n in models.table and models.table[n].family == fam]
        best = max(allowed, key=lambda j: (s[j], -j))
        cents.append(models.table[m.vocab[best]].centroid)
    de = delta_e_2000_array(np.array(cents), np.array([e.lab for e in ex]))
    assert rep.row("css_centroid_only").mean_delta_e == pytest.approx(de.mean(), abs=1e-12)


def test_oracle_not_worse_than_predicted(trained):
    models, ex = trained
    rep = compare_stages(ex, models, 10.0)
    assert rep.row("oracle_pipeline").mean_delta_e <= rep.row("predicted_pipeline").mean_delta_e
    assert rep.row("oracle_pipeline").bk_accuracy == 1.0


def test_compare_stages_empty(trained):
    with pytest.raises(EmptyData):
        compare_stages([], trained[0])


def test_pipeline_save_load(tmp_path, trained):
    models, ex = trained
    models.save(tmp_path / "m")
    back = PipelineModels.load(tmp_path / "m")
    a = compare_stages(ex, models, 10.0).to_dict()
    b = compare_stages(ex, back, 10.0).to_dict()
    assert a == b
    assert back.metadata["seed"] == 0
    models.save(tmp_path / "m2")
    for f in sorted((tmp_path / "m").iterdir()):
        assert f.read_bytes() == (tmp_path / "m2" / f.name).read_bytes()


def test_training_is_deterministic(small_corpus):
    ex = examples_from(small_corpus)[:120]
    a = train_pipeline(ex, seed=1)
    b = train_pipeline(ex, seed=1)
    assert np.array_equal(a.bk_model.weights, b.bk_model.weights)
    assert np.array_equal(a.regressor.weights, b.regressor.weights)
