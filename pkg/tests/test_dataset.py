import math

import numpy as np
import pytest

from flowal import (
    Dataset,
    DriftSpec,
    FeatureSchema,
    IngestionConfig,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    round_half_up,
    shuffle_and_subset,
    standardize,
)
from flowal.errors import (
    DimensionMismatch,
    EmptyDataset,
    InvalidFraction,
    InvalidSchema,
    InvalidSpec,
    MissingColumn,
    NonNumericValue,
    SchemaMismatch,
)


def write(tmp_path, text, name="flows.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def assert_record_invariants(ds):
    assert ds.features.shape == (len(ds), ds.schema.n_features)
    assert np.isfinite(ds.features).all()
    assert ((ds.labels >= 0) & (ds.labels < ds.schema.n_classes)).all()
    for i in range(len(ds)):
        rec = ds.record(i)
        assert rec.features.shape == (ds.schema.n_features,)
        assert 0 <= rec.label < ds.schema.n_classes


class TestSchema:
    def test_counts(self):
        s = FeatureSchema(("a", "b"), ("x", "y", "z"))
        assert s.n_features == 2 and s.n_classes == 3

    def test_rejects_duplicates_and_empties(self):
        with pytest.raises(InvalidSchema):
            FeatureSchema(("a", "a"), ("x", "y"))
        with pytest.raises(InvalidSchema):
            FeatureSchema(("a",), ("x",))
        with pytest.raises(InvalidSchema):
            FeatureSchema((), ("x", "y"))


class TestLoadCsv:
    def test_header_only_strict_is_empty(self, tmp_path):
        path = write(tmp_path, "a,b,label\n")
        with pytest.raises(EmptyDataset):
            load_csv(path, IngestionConfig(label_column="label"))

    def test_three_row_fixture(self, tmp_path):
        # hand parse: labels a,a,b appear in that order -> indices 0,0,1
        path = write(tmp_path, "f1,f2,label\n1,2,a\n3,4,a\n5,6,b\n")
        ds = load_csv(path, IngestionConfig(label_column="label"))
        assert ds.schema.n_classes == 2
        assert len(ds) == 3
        assert ds.labels.tolist() == [0, 0, 1]
        assert ds.schema.feature_names == ("f1", "f2")
        np.testing.assert_array_equal(ds.features[2], [5.0, 6.0])
        assert_record_invariants(ds)

    def test_twelve_traffic_categories(self, tmp_path):
        categories = ["WWW", "MAIL", "ATTACK", "P2P", "SERVICES", "DATABASE",
                      "INTERACTIVE", "MULTIMEDIA", "GAMES", "FTP-CONTROL",
                      "FTP-DATA", "FTP-PASV"]
        lines = ["dur,pkts,label"]
        for i, cat in enumerate(categories * 3):
            lines.append(f"{i}.5,{i},{cat}")
        ds = load_csv(write(tmp_path, "\n".join(lines) + "\n"),
                      IngestionConfig(label_column="label"))
        assert ds.schema.n_classes == 12
        assert ds.schema.class_names == tuple(categories)
        assert_record_invariants(ds)

    def test_missing_label_column(self, tmp_path):
        path = write(tmp_path, "a,b\n1,2\n")
        with pytest.raises(MissingColumn):
            load_csv(path, IngestionConfig(label_column="label"))

    def test_missing_feature_column(self, tmp_path):
        path = write(tmp_path, "a,b,label\n1,2,x\n3,4,y\n")
        with pytest.raises(MissingColumn):
            load_csv(path, IngestionConfig(label_column="label",
                                           feature_columns=["a", "zzz"]))

    def test_non_numeric_cell_reports_position(self, tmp_path):
        path = write(tmp_path, "a,b,label\n1,2,x\n1,oops,y\n")
        with pytest.raises(NonNumericValue) as err:
            load_csv(path, IngestionConfig(label_column="label"))
        assert err.value.row == 3  # header is line 1
        assert err.value.column == "b"

    def test_nan_and_empty_cells_rejected(self, tmp_path):
        for bad in ("nan", "inf", ""):
            path = write(tmp_path, f"a,label\n{bad},x\n1,y\n", name=f"{bad or 'blank'}.csv")
            with pytest.raises(NonNumericValue):
                load_csv(path, IngestionConfig(label_column="label"))

    def test_non_strict_skips_bad_rows(self, tmp_path):
        path = write(tmp_path, "a,label\n1,x\noops,x\n2,y\n")
        ds = load_csv(path, IngestionConfig(label_column="label", strict=False))
        assert len(ds) == 2
        assert ds.labels.tolist() == [0, 1]

    def test_ragged_row(self, tmp_path):
        path = write(tmp_path, "a,b,label\n1,2,x\n1,2\n3,4,y\n")
        with pytest.raises(DimensionMismatch):
            load_csv(path, IngestionConfig(label_column="label"))

    def test_feature_subset_and_order(self, tmp_path):
        path = write(tmp_path, "a,b,c,label\n1,2,3,x\n4,5,6,y\n")
        ds = load_csv(path, IngestionConfig(label_column="label",
                                            feature_columns=["c", "a"]))
        assert ds.schema.feature_names == ("c", "a")
        np.testing.assert_array_equal(ds.features[0], [3.0, 1.0])

    def test_single_class_file_rejected(self, tmp_path):
        path = write(tmp_path, "a,label\n1,x\n2,x\n")
        with pytest.raises(InvalidSchema):
            load_csv(path, IngestionConfig(label_column="label"))

    def test_label_listed_as_feature_rejected(self, tmp_path):
        path = write(tmp_path, "a,label\n1,x\n2,y\n")
        with pytest.raises(InvalidSchema):
            load_csv(path, IngestionConfig(label_column="label",
                                           feature_columns=["a", "label"]))


def toy_dataset(n, d=1):
    schema = FeatureSchema(tuple(f"f{j}" for j in range(d)), ("x", "y"))
    features = np.arange(n * d, dtype=float).reshape(n, d)
    labels = np.arange(n) % 2
    return Dataset(schema, features, labels)


class TestShuffleAndSubset:
    def test_identity_fraction(self):
        ds = toy_dataset(10)
        subset, rest = shuffle_and_subset(ds, 1.0, 3)
        assert len(subset) == 10 and len(rest) == 0

    def test_round_half_up_sizing_on_9159(self):
        # 0.005 * 9159 = 45.795, which rounds up to 46
        ds = toy_dataset(9159)
        subset, rest = shuffle_and_subset(ds, 0.005, 0)
        assert len(subset) == 46
        assert len(rest) == 9159 - 46

    def test_determinism(self):
        ds = toy_dataset(50, d=2)
        a1, b1 = shuffle_and_subset(ds, 0.3, 42)
        a2, b2 = shuffle_and_subset(ds, 0.3, 42)
        np.testing.assert_array_equal(a1.features, a2.features)
        np.testing.assert_array_equal(b1.labels, b2.labels)

    def test_partition_property(self):
        rng = np.random.default_rng(8)
        for trial in range(50):
            n = int(rng.integers(1, 60))
            frac = float(rng.uniform(0.01, 1.0))
            ds = toy_dataset(n, d=2)
            subset, rest = shuffle_and_subset(ds, frac, int(rng.integers(1 << 32)))
            assert abs(len(subset) - frac * n) <= 0.5
            merged = np.vstack([subset.features, rest.features])
            assert sorted(map(tuple, merged)) == sorted(map(tuple, ds.features))

    def test_invalid_fractions(self):
        ds = toy_dataset(5)
        for frac in (0.0, -0.2, 1.5):
            with pytest.raises(InvalidFraction):
                shuffle_and_subset(ds, frac, 0)


class TestGenerateSynthetic:
    def test_counts_per_class(self):
        ds = generate_synthetic(SyntheticSpec(n_classes=3, per_class=10,
                                              n_features=2, seed=0))
        assert len(ds) == 30
        assert ds.class_counts().tolist() == [10, 10, 10]
        assert_record_invariants(ds)

    def test_pure_in_spec(self):
        spec = SyntheticSpec(n_classes=2, per_class=7, n_features=3, seed=99)
        a = generate_synthetic(spec)
        b = generate_synthetic(spec)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_drift_at_end_is_no_drift(self):
        base = SyntheticSpec(n_classes=2, per_class=10, n_features=2, seed=5)
        drifted = SyntheticSpec(n_classes=2, per_class=10, n_features=2, seed=5,
                                drift=DriftSpec(onset_index=20, mean_shift=3.0))
        np.testing.assert_array_equal(generate_synthetic(base).features,
                                      generate_synthetic(drifted).features)

    def test_drift_shifts_segment_means(self):
        # sample means over each class segment must move by the shift,
        # up to 3 sigma / sqrt(segment size) sampling noise per feature
        per_class, n_classes, shift, sigma = 400, 2, 2.5, 0.7
        n = per_class * n_classes
        spec = SyntheticSpec(n_classes=n_classes, per_class=per_class,
                             n_features=3, class_mean_separation=8.0,
                             noise_stddev=sigma, seed=3,
                             drift=DriftSpec(onset_index=n // 2, mean_shift=shift))
        ds = generate_synthetic(spec)
        onset = n // 2
        tol = 3 * sigma / math.sqrt(per_class / 2)
        for c in range(n_classes):
            rows = np.nonzero(ds.labels == c)[0]
            before = ds.features[rows[rows < onset]].mean(axis=0)
            after = ds.features[rows[rows >= onset]].mean(axis=0)
            np.testing.assert_allclose(after - before, shift, atol=tol)

    def test_invalid_specs(self):
        with pytest.raises(InvalidSpec):
            SyntheticSpec(n_classes=1, per_class=5, n_features=2)
        with pytest.raises(InvalidSpec):
            SyntheticSpec(n_classes=2, per_class=0, n_features=2)
        with pytest.raises(InvalidSpec):
            SyntheticSpec(n_classes=2, per_class=5, n_features=2, noise_stddev=-1)
        with pytest.raises(InvalidSpec):
            SyntheticSpec(n_classes=2, per_class=5, n_features=2,
                          drift=DriftSpec(onset_index=11, mean_shift=1.0))


class TestStandardize:
    def test_constant_column_maps_to_zero(self):
        schema = FeatureSchema(("a", "b"), ("x", "y"))
        ds = Dataset(schema, [[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]], [0, 1, 0])
        out = standardize(ds).apply(ds)
        np.testing.assert_array_equal(out.features[:, 0], [0.0, 0.0, 0.0])

    def test_population_convention_closed_form(self):
        # column [1,2,3]: mean 2, population stddev sqrt(2/3)
        schema = FeatureSchema(("a",), ("x", "y"))
        ds = Dataset(schema, [[1.0], [2.0], [3.0]], [0, 1, 0])
        scaler = standardize(ds)
        assert scaler.mean[0] == pytest.approx(2.0, abs=1e-12)
        assert scaler.std[0] == pytest.approx(math.sqrt(2.0 / 3.0), abs=1e-12)
        out = scaler.apply(ds)
        expected = 1.0 / math.sqrt(2.0 / 3.0)
        np.testing.assert_allclose(out.features[:, 0],
                                   [-expected, 0.0, expected], atol=1e-12)
        assert expected == pytest.approx(1.2247, abs=1e-4)

    def test_train_maps_to_zero_mean(self):
        rng = np.random.default_rng(4)
        schema = FeatureSchema(tuple(f"f{j}" for j in range(4)), ("x", "y"))
        ds = Dataset(schema, rng.normal(3.0, 2.5, size=(40, 4)),
                     rng.integers(0, 2, size=40))
        out = standardize(ds).apply(ds)
        np.testing.assert_allclose(out.features.mean(axis=0), 0.0, atol=1e-9)

    def test_schema_mismatch_on_apply(self):
        ds = toy_dataset(6, d=2)
        other = toy_dataset(6, d=3)
        with pytest.raises(SchemaMismatch):
            standardize(ds).apply(other)
        with pytest.raises(SchemaMismatch):
            standardize(ds).transform(np.zeros((2, 5)))

    def test_empty_train_rejected(self):
        schema = FeatureSchema(("a",), ("x", "y"))
        empty = Dataset(schema, np.empty((0, 1)), np.empty(0, dtype=int))
        with pytest.raises(EmptyDataset):
            standardize(empty)


class TestRoundHalfUp:
    @pytest.mark.parametrize("x,expected", [
        (45.795, 46), (45.5, 46), (45.4999, 45), (0.5, 1), (0.49, 0), (2.0, 2),
    ])
    def test_values(self, x, expected):
        assert round_half_up(x) == expected


class TestDatasetContainer:
    def test_immutable_arrays(self):
        ds = toy_dataset(4)
        with pytest.raises(ValueError):
            ds.features[0, 0] = 99.0
        with pytest.raises(ValueError):
            ds.labels[0] = 1

    def test_dimension_checks(self):
        schema = FeatureSchema(("a", "b"), ("x", "y"))
        with pytest.raises(DimensionMismatch):
            Dataset(schema, [[1.0, 2.0, 3.0]], [0])
        with pytest.raises(DimensionMismatch):
            Dataset(schema, [[1.0, 2.0]], [0, 1])

    def test_label_range_check(self):
        schema = FeatureSchema(("a",), ("x", "y"))
        with pytest.raises(SchemaMismatch):
            Dataset(schema, [[1.0]], [2])

    def test_subset_keeps_order(self):
        ds = toy_dataset(6, d=2)
        sub = ds.subset([4, 1])
        np.testing.assert_array_equal(sub.features[0], ds.features[4])
        np.testing.assert_array_equal(sub.features[1], ds.features[1])
