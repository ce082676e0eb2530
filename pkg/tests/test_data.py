import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from dqnfraud.data import (
    DatasetSpec,
    IngestionError,
    SynthConfig,
    apply_scaler,
    fit_preprocessor,
    fit_scaler,
    invert_scaler,
    load_csv,
    prepare,
    split,
    split_bounds,
    synth_frame,
    synth_generate,
    target_encode,
    write_csv,
)


def csv_spec(path, **kw):
    return DatasetSpec(source="csv", path=str(path), **kw)


class TestIngestion:
    def test_sorted_by_time(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,x,amount,label\n3,0.3,30,0\n1,0.1,10,1\n2,0.2,20,0\n")
        raw = load_csv(csv_spec(p))
        assert raw.times.tolist() == [1.0, 2.0, 3.0]
        assert raw.amounts.tolist() == [10.0, 20.0, 30.0]
        assert raw.labels.tolist() == [1, 0, 0]

    def test_stable_on_ties(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,x,amount,label\n1,0.1,1,0\n0,9,1,0\n1,0.2,1,0\n1,0.3,1,0\n")
        raw = load_csv(csv_spec(p))
        x = raw.numeric[:, raw.numeric_names.index("x")]
        assert x.tolist() == [9.0, 0.1, 0.2, 0.3]

    def test_missing_label_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,amount\n1,2\n")
        with pytest.raises(IngestionError, match="label"):
            load_csv(csv_spec(p))

    def test_ecd_shape(self, tmp_path):
        cols = ["Time"] + [f"V{i}" for i in range(1, 29)] + ["Amount", "Class"]
        rng = np.random.default_rng(0)
        frame = pd.DataFrame(rng.normal(size=(20, 31)), columns=cols)
        frame["Time"] = np.arange(20.0)
        frame["Amount"] = rng.lognormal(3, 1, 20)
        frame["Class"] = [0] * 18 + [1] * 2
        p = tmp_path / "ecd.csv"
        frame.to_csv(p, index=False)
        spec = csv_spec(p, time_column="Time", amount_column="Amount", label_column="Class")
        raw = load_csv(spec)
        assert raw.numeric.shape == (20, 30)

    def test_non_numeric_names_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,x,amount,label\n1,0.1,1,0\n2,abc,1,0\n3,0.3,1,1\n")
        with pytest.raises(IngestionError, match=r"'x'.*\[1\]"):
            load_csv(csv_spec(p))

    def test_non_numeric_label(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,amount,label\n1,1,yes\n")
        with pytest.raises(IngestionError, match="label"):
            load_csv(csv_spec(p))

    def test_bad_label_value(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,amount,label\n1,1,2\n")
        with pytest.raises(IngestionError):
            load_csv(csv_spec(p))

    @pytest.mark.parametrize("text", ["", "time,amount,label\n"])
    def test_empty(self, tmp_path, text):
        p = tmp_path / "d.csv"
        p.write_text(text)
        with pytest.raises(IngestionError):
            load_csv(csv_spec(p))

    def test_missing_file(self, tmp_path):
        with pytest.raises(IngestionError):
            load_csv(csv_spec(tmp_path / "nope.csv"))

    def test_missing_numeric_imputed_with_train_median(self, tmp_path):
        rows = ["time,x,amount,label"]
        rows += [f"{i},{i},1,0" for i in range(7)]
        rows += ["7,,1,0", "8,100,1,0", "9,,1,1"]
        p = tmp_path / "d.csv"
        p.write_text("\n".join(rows) + "\n")
        raw = load_csv(csv_spec(p))
        parts = split(raw)
        pre = fit_preprocessor(parts.train)
        j = raw.numeric_names.index("x")
        assert pre.medians[j] == 3.0
        test = pre.transform(parts.test)
        assert test.features[-1, j] == pytest.approx(3.0 / 6.0)


class TestScaler:
    def test_midpoint(self):
        p = fit_scaler(np.array([[2.0], [6.0]]))
        assert apply_scaler(p, np.array([[4.0]]))[0, 0] == 0.5

    def test_constant(self):
        p = fit_scaler(np.array([[3.0], [3.0]]))
        assert apply_scaler(p, np.array([[3.0], [7.0]]))[:, 0].tolist() == [0.0, 0.0]

    def test_no_clamp(self):
        p = fit_scaler(np.array([[2.0], [6.0]]))
        assert apply_scaler(p, np.array([[8.0]]))[0, 0] == 1.5

    @settings(max_examples=50, deadline=None)
    @given(hnp.arrays(np.float64, st.tuples(st.integers(2, 20), st.integers(1, 4)),
                      elements=st.floats(-1e6, 1e6)))
    def test_inverse_recovers(self, x):
        p = fit_scaler(x)
        back = invert_scaler(p, apply_scaler(p, x))
        varying = p.maxs > p.mins
        np.testing.assert_allclose(back[:, varying], x[:, varying], atol=1e-9 * max(1.0, np.abs(x).max()), rtol=0)
        assert np.all(p.maxs >= p.mins)


class TestTargetEncoding:
    def test_plain_mean(self):
        enc, table = target_encode(np.array(["a", "a", "a", "b"]), np.array([1, 0, 1, 0]), smoothing=0.0)
        assert enc[0] == pytest.approx(2 / 3)
        assert table.table["a"] == pytest.approx(2 / 3)

    def test_unseen(self):
        _, table = target_encode(np.array(["a", "b", "b", "c"]), np.array([1, 0, 0, 0]), smoothing=5.0)
        assert table.transform(["zzz"])[0] == 0.25

    def test_large_smoothing(self):
        _, table = target_encode(np.array(["a", "b", "b", "c"]), np.array([1, 1, 0, 0]), smoothing=1e12)
        np.testing.assert_allclose(table.transform(["a", "b", "c"]), 0.5, atol=1e-11)

    def test_smoothed_formula(self):
        _, table = target_encode(np.array(["a"] * 4 + ["b"] * 6), np.array([1, 1, 0, 0, 0, 0, 0, 0, 0, 1]), 20.0)
        g = 0.3
        assert table.table["a"] == pytest.approx((2 + 20 * g) / (4 + 20))


class TestSplit:
    def test_exact(self):
        assert split_bounds(1000) == (700, 800)

    def test_remainder_to_test(self):
        parts = split(np.arange(1001))
        assert (len(parts.train), len(parts.validation), len(parts.test)) == (700, 100, 201)

    def test_too_small(self):
        with pytest.raises(ValueError):
            split(np.arange(9))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(10, 5000))
    def test_partition(self, n):
        parts = split(np.arange(n))
        joined = np.concatenate([parts.train, parts.validation, parts.test])
        assert joined.tolist() == list(range(n))
        assert parts.train.max() < parts.validation.min() < parts.test.min()
        # floors lose under one row each, so the test split gains under two
        assert 0 <= 7 * n - 10 * len(parts.train) < 10
        assert 0 <= n - 10 * len(parts.validation) < 10
        assert 0 <= 10 * len(parts.test) - 2 * n < 20


class TestSynthetic:
    def test_fraud_count_band(self):
        raw = synth_generate(SynthConfig(n_transactions=10000, fraud_rate=0.02, seed=1))
        assert 158 <= raw.labels.sum() <= 242

    def test_seed_determinism(self):
        a = synth_frame(SynthConfig(n_transactions=500, seed=3))
        b = synth_frame(SynthConfig(n_transactions=500, seed=3))
        c = synth_frame(SynthConfig(n_transactions=500, seed=4))
        pd.testing.assert_frame_equal(a, b)
        assert not a.equals(c)

    def test_amounts_positive_and_time_ordered(self):
        f = synth_frame(SynthConfig(n_transactions=2000, seed=0))
        assert (f["amount"] > 0).all()
        assert f["time"].is_monotonic_increasing

    def test_separation_distance(self):
        cfg = SynthConfig(n_transactions=200000, fraud_rate=0.3, n_features=4, mean_separation=5.0, seed=2)
        f = synth_frame(cfg)
        cols = [f"f{j}" for j in range(4)]
        gap = f[f.label == 1][cols].mean() - f[f.label == 0][cols].mean()
        assert math.sqrt((gap ** 2).sum()) == pytest.approx(5.0, abs=0.05)

    def test_drift_sample_means(self):
        cfg = SynthConfig(n_transactions=40000, fraud_rate=0.1, n_features=3, drift_index=5000,
                          drift_offset=2.0, seed=5)
        f = synth_frame(cfg)
        fraud = f[f.label == 1]
        idx = fraud.index.to_numpy()
        before = fraud[idx < 5000][["f0", "f1", "f2"]].mean()
        after = fraud[idx >= 5000][["f0", "f1", "f2"]].mean()
        np.testing.assert_allclose((after - before).to_numpy(), 2.0, atol=0.15)

    def test_invalid(self):
        with pytest.raises(ValueError):
            SynthConfig(fraud_rate=0.0)
        with pytest.raises(ValueError):
            SynthConfig(n_transactions=0)

    def test_csv_round_trip(self, tmp_path):
        cfg = SynthConfig(n_transactions=300, seed=9)
        p = tmp_path / "s.csv"
        write_csv(synth_frame(cfg), p)
        from_file = load_csv(csv_spec(p))
        direct = synth_generate(cfg)
        assert from_file.numeric.tobytes() == direct.numeric.tobytes()
        assert from_file.amounts.tobytes() == direct.amounts.tobytes()


class TestNoLeak:
    def test_fit_on_train_only(self):
        spec = DatasetSpec(synth=SynthConfig(n_transactions=3000, seed=11))
        prepared = prepare(spec)
        raw = synth_generate(spec.synth)
        a, _ = split_bounds(len(raw))
        train_raw = raw.numeric[:a]
        np.testing.assert_array_equal(prepared.preprocessor.scaler.mins, train_raw.min(axis=0))
        np.testing.assert_array_equal(prepared.preprocessor.scaler.maxs, train_raw.max(axis=0))
        # the training split spans exactly [0, 1]
        assert prepared.train.features.min() == 0.0 and prepared.train.features.max() == 1.0

    def test_encoder_ignores_test_rows(self, tmp_path):
        rows = ["time,cat,amount,label"]
        rows += [f"{i},a,1,{i % 2}" for i in range(7)]
        rows += [f"{i},a,1,1" for i in range(7, 10)]
        p = tmp_path / "d.csv"
        p.write_text("\n".join(rows) + "\n")
        spec = csv_spec(p, categorical_columns=["cat"], target_smoothing=0.0)
        prepared = prepare(spec)
        assert prepared.preprocessor.encoders["cat"].table["a"] == pytest.approx(3 / 7)

    def test_raw_amount_preserved(self):
        spec = DatasetSpec(synth=SynthConfig(n_transactions=1000, seed=1))
        prepared = prepare(spec)
        raw = synth_generate(spec.synth)
        assert prepared.test.amounts.tolist() == raw.amounts[800:].tolist()
