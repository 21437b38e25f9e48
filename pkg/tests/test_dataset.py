import csv
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penn.dataset import (
    COLUMNS,
    INPUT_COLUMNS,
    Dataset,
    NormalizationStats,
    denormalize,
    load_csv,
    normalize,
    split,
    subsample,
    validate,
    write_csv,
)
from penn.errors import ParameterError, SchemaError, StatsError
from penn.synth import (
    REGIMES,
    SyntheticGenConfig,
    generate_inputs,
    intake_recovery,
    standard_atmosphere,
    surrogate_targets,
    synth_generate,
)


def _dataset(n, seed=0):
    return synth_generate(SyntheticGenConfig("hs", n, seed=seed))


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _write_rows(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


# schema and CSV


def test_schema_layout():
    assert len(INPUT_COLUMNS) == 18 and len(COLUMNS) == 20
    assert COLUMNS[-2:] == ("thrust_n", "specific_impulse_s")
    assert INPUT_COLUMNS[:3] == ("atm_static_pressure_pa", "atm_static_temperature_k", "flight_mach")
    assert INPUT_COLUMNS[-2:] == ("nozzle_throat_area_m2", "nozzle_exit_area_m2")


def test_csv_round_trip(tmp_path):
    ds = _dataset(50)
    path = tmp_path / "a.csv"
    write_csv(ds, path)
    back = load_csv(path)
    assert back.X.tobytes() == ds.X.tobytes() and back.Y.tobytes() == ds.Y.tobytes()
    write_csv(back, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_records_round_trip():
    ds = _dataset(5)
    recs = ds.records()
    assert recs[0]._fields == COLUMNS
    back = Dataset.from_records(recs)
    np.testing.assert_array_equal(back.X, ds.X)
    assert len(Dataset.from_records([])) == 0


def test_zero_impulse_rows_dropped(tmp_path, caplog):
    ds = _dataset(20)
    ds.Y[[3, 7, 11], 1] = 0.0
    path = tmp_path / "z.csv"
    write_csv(ds, path)
    with caplog.at_level(logging.INFO, logger="penn.dataset"):
        loaded = load_csv(path)
    assert len(loaded) == 17
    assert (loaded.Y[:, 1] != 0).all()
    assert "dropped 3" in caplog.text
    assert len(load_csv(path, drop_zero=False)) == 20


def test_permuted_header_is_schema_error(tmp_path):
    rows = _rows(_written(tmp_path))
    rows[0][0], rows[0][1] = rows[0][1], rows[0][0]
    _write_rows(tmp_path / "p.csv", rows)
    with pytest.raises(SchemaError, match="out of order"):
        load_csv(tmp_path / "p.csv")


def test_missing_and_extra_columns_reported(tmp_path):
    rows = _rows(_written(tmp_path))
    rows[0][4] = "mystery"
    _write_rows(tmp_path / "m.csv", rows)
    with pytest.raises(SchemaError) as exc:
        load_csv(tmp_path / "m.csv")
    assert "intake_mass_flow_kg_s" in str(exc.value) and "mystery" in str(exc.value)


def test_unparsable_cell_addressed(tmp_path):
    rows = _rows(_written(tmp_path))
    rows[2][2] = "fast"
    _write_rows(tmp_path / "u.csv", rows)
    with pytest.raises(SchemaError, match=r":3: column 'flight_mach'"):
        load_csv(tmp_path / "u.csv")


def test_empty_after_header(tmp_path):
    path = tmp_path / "e.csv"
    _write_rows(path, [list(COLUMNS)])
    assert len(load_csv(path)) == 0


def test_no_header_is_error(tmp_path):
    path = tmp_path / "n.csv"
    path.write_text("")
    with pytest.raises(SchemaError):
        load_csv(path)


@pytest.mark.parametrize(
    "col, value",
    [("flight_mach", -0.1), ("intake_pressure_recovery", 1.2), ("nozzle_exit_area_m2", 0.0), ("thrust_n", np.inf)],
)
def test_field_invariants(col, value):
    ds = _dataset(10)
    if col in INPUT_COLUMNS:
        ds.X[4, INPUT_COLUMNS.index(col)] = value
    else:
        ds.Y[4, 0] = value
    with pytest.raises(SchemaError, match="row 4"):
        validate(ds)


def _written(tmp_path):
    path = tmp_path / "src.csv"
    write_csv(_dataset(5), path)
    return path


# split and subsample


@pytest.mark.parametrize("n, sizes", [(50_000, (30_000, 10_000, 10_000)), (20_000, (12_000, 4_000, 4_000))])
def test_split_sizes(n, sizes):
    ds = Dataset(np.zeros((n, 18)), np.arange(2.0 * n).reshape(n, 2))
    sp = split(ds, (0.6, 0.2, 0.2), seed=1)
    assert (len(sp.train), len(sp.val), len(sp.test)) == sizes


@settings(max_examples=50, deadline=None)
@given(n=st.integers(0, 500), a=st.floats(0, 1), b=st.floats(0, 1), seed=st.integers(0, 100))
def test_split_disjoint_exhaustive_deterministic(n, a, b, seed):
    r1 = a * (1 - 1e-9)
    r2 = (1 - r1) * b
    ratios = (r1, r2, 1 - r1 - r2)
    ds = Dataset(np.zeros((n, 18)), np.column_stack([np.arange(n), np.zeros(n)]))
    sp = split(ds, ratios, seed)
    ids = np.concatenate([sp.train.Y[:, 0], sp.val.Y[:, 0], sp.test.Y[:, 0]])
    assert sorted(ids) == list(range(n))
    for part, r in zip((sp.train, sp.val, sp.test), ratios):
        assert abs(len(part) - r * n) <= 1 + 1e-9
    again = split(ds, ratios, seed)
    assert again.train.Y.tobytes() == sp.train.Y.tobytes()


@pytest.mark.parametrize("ratios", [(0.5, 0.5, 0.5), (0.6, 0.4), (1.2, -0.1, -0.1)])
def test_split_rejects_bad_ratios(ratios):
    with pytest.raises(ParameterError):
        split(_dataset(10), ratios)


def test_subsample_sizes():
    train = Dataset(np.zeros((30_000, 18)), np.column_stack([np.arange(30_000), np.zeros(30_000)]))
    small = subsample(train, 200, seed=3)
    assert len(small) == 150
    assert len(np.unique(small.Y[:, 0])) == 150
    assert subsample(train, 1) is train
    for factor in (5, 20, 100, 200):
        assert len(subsample(train, factor)) == 30_000 // factor
    assert subsample(train, 20, seed=3).Y.tobytes() == subsample(train, 20, seed=3).Y.tobytes()


@pytest.mark.parametrize("factor", [0.5, 1000])
def test_subsample_rejects(factor):
    with pytest.raises(ParameterError):
        subsample(_dataset(100), factor)


# normalisation


def test_normalize_train_statistics():
    sp = split(_dataset(600), seed=2)
    norm, stats = normalize(sp)
    assert np.abs(norm.train.X.mean(axis=0)).max() < 1e-10
    np.testing.assert_allclose(norm.train.X.std(axis=0), 1.0, atol=1e-10)
    assert np.abs(norm.val.X.mean(axis=0)).max() > 1e-6
    np.testing.assert_array_equal(norm.val.Y, sp.val.Y)
    np.testing.assert_allclose(denormalize(norm.test.X, stats), sp.test.X, rtol=1e-10)


def test_constant_feature_rejected_by_name():
    ds = _dataset(30)
    ds.X[:, 3] = 0.9
    with pytest.raises(StatsError, match="intake_pressure_recovery"):
        NormalizationStats.fit(ds)


def test_rounding_noise_counts_as_constant():
    ds = _dataset(30)
    ds.X[:, 1] = 216.65 * (1 + 1e-15 * np.random.default_rng(0).standard_normal(30))
    with pytest.raises(StatsError, match="atm_static_temperature_k"):
        NormalizationStats.fit(ds)


# synthetic generator


def test_generator_determinism():
    cfg = SyntheticGenConfig("ls", 3000, seed=7)
    a, b = synth_generate(cfg), synth_generate(cfg)
    assert a.X.tobytes() == b.X.tobytes() and a.Y.tobytes() == b.Y.tobytes()
    c = synth_generate(SyntheticGenConfig("ls", 3000, seed=8))
    assert not np.array_equal(a.X, c.X)


def test_generator_prefix_is_stable():
    # per-block random streams: a shorter run is a prefix of a longer one
    short = synth_generate(SyntheticGenConfig("hs", 1500, seed=1))
    long = synth_generate(SyntheticGenConfig("hs", 5000, seed=1))
    assert short.X.tobytes() == long.X[:1500].tobytes()


@pytest.mark.parametrize("regime", ["hs", "ls"])
def test_generator_respects_field_invariants(regime):
    ds = synth_generate(SyntheticGenConfig(regime, 10_000, seed=0))
    validate(ds)
    mach = ds.X[:, 2]
    lo, hi = REGIMES[regime].mach
    assert mach.min() >= lo and mach.max() <= hi


@pytest.mark.parametrize("regime", ["hs", "ls"])
def test_thrust_dynamic_range(regime):
    thrust = synth_generate(SyntheticGenConfig(regime, 10_000, seed=0)).Y[:, 0]
    positive = thrust[thrust > 0]
    assert positive.max() / positive.min() >= 100


@pytest.mark.parametrize("regime", ["hs", "ls"])
def test_noise_free_targets_match_closed_form(regime):
    ds = synth_generate(SyntheticGenConfig(regime, 4000, noise_sd=0.0, seed=5))
    np.testing.assert_allclose(ds.Y, surrogate_targets(ds.X, regime), rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("regime, mach", [("hs", 3.0), ("ls", 2.2)])
def test_thrust_increases_with_fuel_flow(regime, mach):
    lo, hi = REGIMES[regime].mach
    u = np.tile([0.4, (mach - lo) / (hi - lo), 0.6, 0.0, 0.5, 0.5, 0.5, 0.9], (200, 1))
    u[:, 3] = np.linspace(0.0, 1.0, 200)
    X = generate_inputs(regime, u)
    fuel = X[:, INPUT_COLUMNS.index("ramjet_fuel_flow_kg_s")]
    thrust = surrogate_targets(X, regime)[:, 0]
    assert (np.diff(fuel) > 0).all()
    assert (np.diff(thrust) > 0).all()


def test_ls_regime_has_policy_cases():
    ds = synth_generate(SyntheticGenConfig("ls", 20_000, seed=0))
    assert (ds.Y[:, 1] == 0).sum() > 0
    assert (ds.Y[:, 0] < 0).sum() > 0


def test_standard_atmosphere_table_values():
    t, p = standard_atmosphere(np.array([0.0, 11_000.0, 20_000.0, 30_000.0]))
    np.testing.assert_allclose(t, [288.15, 216.65, 216.65, 226.65])
    np.testing.assert_allclose(p, [101_325.0, 22_632.0, 5_474.9, 1_171.9], rtol=2e-4)


def test_hs_temperature_varies():
    # the HS altitude band straddles the isothermal layer, so temperature must still carry signal
    X = synth_generate(SyntheticGenConfig("hs", 2000, seed=0)).X
    assert X[:, 1].std() > 1.0


def test_recovery_falls_supersonically():
    sigma = intake_recovery(np.linspace(0, 4, 50))
    assert (np.diff(sigma) <= 0).all() and sigma.min() > 0 and sigma.max() <= 1


def test_generator_config_validation():
    with pytest.raises(ParameterError):
        SyntheticGenConfig("mars", 10)
    with pytest.raises(ParameterError):
        SyntheticGenConfig("hs", -1)
    with pytest.raises(ParameterError):
        SyntheticGenConfig("hs", 10, noise_sd=-0.1)
    assert len(synth_generate(SyntheticGenConfig("hs", 0))) == 0
