"""Disclosure-risk metrics, each pinned against a brute-force oracle."""
import numpy as np
import pytest

from sdgflow.errors import ConfigError
from sdgflow.evaluation.names import PRIVACY_METRICS
from sdgflow.evaluation.privacy import (
    PrivacyConfig,
    categorical_cap,
    evaluate_privacy,
    inference_attack_score,
    min_nn_distance,
    new_row_synthesis,
    sample_overlap,
    tcap,
    validate_privacy_config,
)
from sdgflow.rng import derive_stream
from sdgflow.tabular import ColumnKind, ColumnSpec, Schema, column_ranges, gower_distance, make_dataset

KS = Schema(
    (
        ColumnSpec("k", ColumnKind.CATEGORICAL, categories=("A", "B", "C")),
        ColumnSpec("s", ColumnKind.CATEGORICAL, categories=("x", "y")),
    )
)
CFG = PrivacyConfig(key_columns=("k",), sensitive_column="s")


def ks_ds(pairs):
    k = {"A": 0, "B": 1, "C": 2}
    s = {"x": 0, "y": 1}
    return make_dataset(KS, {"k": [k[a] for a, _ in pairs], "s": [s[b] for _, b in pairs]})


# ------------------------------------------------------------------ oracles ---

def rows_of(ds):
    return [tuple(col[i] for col in ds.columns) for i in range(ds.n)]


def cap_oracle(real, synth, key_idx, sens_idx):
    rr, sr = rows_of(real), rows_of(synth)
    fractions = []
    for r in rr:
        matches = [s for s in sr if all(s[j] == r[j] for j in key_idx)]
        if not matches:
            continue
        fractions.append(sum(s[sens_idx] == r[sens_idx] for s in matches) / len(matches))
    if not fractions:
        return 1.0
    return 1.0 - float(np.mean(np.asarray(fractions)))


def modal_per_key(sr, key_idx, sens_idx):
    groups = {}
    for s in sr:
        groups.setdefault(tuple(s[j] for j in key_idx), []).append(s[sens_idx])
    out = {}
    for key, vals in groups.items():
        counts = {}
        for v in vals:
            counts[v] = counts.get(v, 0) + 1
        top = max(counts.values())
        # ties resolve to the smallest category code
        modal = min(v for v, c in counts.items() if c == top)
        out[key] = (modal, top / len(vals))
    return out


def tcap_oracle(real, synth, key_idx, sens_idx, threshold):
    rr, sr = rows_of(real), rows_of(synth)
    modal = modal_per_key(sr, key_idx, sens_idx)
    attackable = {k: m for k, (m, prop) in modal.items() if prop >= threshold}
    hits, total = 0, 0
    for r in rr:
        key = tuple(r[j] for j in key_idx)
        if key in attackable:
            total += 1
            hits += r[sens_idx] == attackable[key]
    return hits / total if total else 0.0


def inference_oracle(real, synth, key_idx, sens_idx):
    rr, sr = rows_of(real), rows_of(synth)
    modal = {k: m for k, (m, _) in modal_per_key(sr, key_idx, sens_idx).items()}
    sens = [r[sens_idx] for r in rr]
    counts = {}
    for v in sens:
        counts[v] = counts.get(v, 0) + 1
    baseline = max(counts.values()) / len(sens)
    if baseline >= 1.0:
        return 0.0
    hits, total = 0, 0
    for r in rr:
        key = tuple(r[j] for j in key_idx)
        if key in modal:
            total += 1
            hits += r[sens_idx] == modal[key]
    if total == 0:
        return 0.0
    return max(0.0, (hits / total - baseline) / (1.0 - baseline))


# ---------------------------------------------------------------------- CAP ---

def test_cap_six_row_hand_case():
    real = ks_ds([("A", "x"), ("A", "x"), ("B", "y"), ("C", "x")])
    synth = ks_ds([("A", "x"), ("A", "x"), ("A", "y"), ("B", "y")])
    m = categorical_cap(real, synth, CFG)
    # attributions 2/3, 2/3, 1; C unmatched -> rate 7/9, score 2/9
    assert m.score == pytest.approx(2 / 9, rel=1e-12)
    assert m.details["matched_real_rows"] == 3
    assert m.details["unmatched_real_rows"] == 1


def test_cap_exact_copy_is_zero():
    ds = ks_ds([("A", "x"), ("B", "y"), ("A", "x")])
    m = categorical_cap(ds, ds, CFG)
    assert m.score == 0.0


def test_cap_no_key_overlap_flagged():
    real = ks_ds([("A", "x")])
    synth = ks_ds([("B", "y")])
    m = categorical_cap(real, synth, CFG)
    assert m.score == 1.0
    assert "undefined-baseline" in m.details["flags"]


def test_cap_shuffled_sensitive_approaches_one_minus_inverse_m():
    rng = np.random.default_rng(0)
    n = 20_000
    k = rng.integers(0, 3, n)
    real = make_dataset(KS, {"k": k, "s": rng.integers(0, 2, n)})
    synth = make_dataset(KS, {"k": k, "s": rng.integers(0, 2, n)})
    m = categorical_cap(real, synth, CFG)
    assert abs(m.score - 0.5) < 0.02  # 1 - 1/m with m = 2


# ---------------------------------------------------------------- inference ---

def test_inference_independent_sensitive_scores_zero():
    # modal attacker predicts x everywhere; real is half x: accuracy == baseline
    real = ks_ds([("A", "x"), ("A", "y"), ("B", "x"), ("B", "y")] * 2)
    synth = ks_ds([("A", "x"), ("A", "x"), ("B", "x"), ("B", "x")] * 2)
    m = inference_attack_score(real, synth, CFG)
    assert m.score == 0.0
    assert m.details["accuracy"] == pytest.approx(m.details["baseline"])


def test_inference_total_leakage_scores_one():
    real = ks_ds([("A", "x"), ("A", "x"), ("B", "y"), ("B", "y")])
    m = inference_attack_score(real, real, CFG)
    assert m.score == 1.0


def test_inference_constant_sensitive_flagged():
    real = ks_ds([("A", "x"), ("B", "x")])
    synth = ks_ds([("A", "x"), ("B", "x")])
    m = inference_attack_score(real, synth, CFG)
    assert m.score == 0.0
    assert "degenerate-baseline" in m.details["flags"]


def test_inference_no_predicted_rows_flagged():
    real = ks_ds([("A", "x"), ("A", "y")])
    synth = ks_ds([("C", "x"), ("C", "y")])
    m = inference_attack_score(real, synth, CFG)
    assert m.score == 0.0
    assert "no-predicted-rows" in m.details["flags"]


# --------------------------------------------------------------------- TCAP ---

def test_tcap_ten_row_hand_case():
    synth = ks_ds(
        [("A", "x")] * 4 + [("A", "y")]          # A: modal x at 4/5, attackable at 0.8
        + [("B", "x"), ("B", "x"), ("B", "y"), ("B", "y"), ("B", "y")]  # B: 3/5, not
    )
    real = ks_ds([("A", "x"), ("A", "x"), ("A", "y"), ("A", "x"), ("B", "y"), ("C", "x")])
    cfg = PrivacyConfig(key_columns=("k",), sensitive_column="s", tcap_homogeneity=0.8)
    m = tcap(real, synth, cfg)
    assert m.score == pytest.approx(3 / 4)
    assert m.details["attackable_real_rows"] == 4
    oracle = tcap_oracle(real, synth, (0,), 1, 0.8)
    assert m.score == oracle


def test_tcap_all_groups_mixed_flagged():
    synth = ks_ds([("A", "x"), ("A", "y"), ("B", "x"), ("B", "y")])
    real = ks_ds([("A", "x"), ("B", "y")])
    m = tcap(real, synth, CFG)  # homogeneity 1.0: no pure groups
    assert m.score == 0.0
    assert "no-attackable-records" in m.details["flags"]


def test_tcap_copy_with_deterministic_mapping():
    ds = ks_ds([("A", "x"), ("A", "x"), ("B", "y"), ("B", "y")])
    assert tcap(ds, ds, CFG).score == 1.0


# --------------------------------------------------- random-table equivalence ---

def random_table(rng):
    n_keys = int(rng.integers(1, 4))
    cols = [
        ColumnSpec(f"k{j}", ColumnKind.CATEGORICAL, categories=("a", "b", "c")[: int(rng.integers(2, 4))])
        for j in range(n_keys)
    ]
    cols.append(ColumnSpec("s", ColumnKind.CATEGORICAL, categories=("x", "y", "z")[: int(rng.integers(2, 4))]))
    schema = Schema(tuple(cols))
    def draw():
        n = int(rng.integers(1, 13))
        return make_dataset(
            schema,
            {c.name: rng.integers(0, len(c.categories), n) for c in schema.columns},
        )
    cfg = PrivacyConfig(
        key_columns=tuple(f"k{j}" for j in range(n_keys)),
        sensitive_column="s",
        tcap_homogeneity=float(rng.choice([0.5, 0.8, 1.0])),
    )
    return draw(), draw(), cfg, tuple(range(n_keys)), n_keys


def test_cap_tcap_inference_match_oracles_on_random_tables():
    rng = np.random.default_rng(77)
    for _ in range(60):
        real, synth, cfg, key_idx, sens_idx = random_table(rng)
        assert categorical_cap(real, synth, cfg).score == cap_oracle(real, synth, key_idx, sens_idx)
        assert tcap(real, synth, cfg).score == tcap_oracle(
            real, synth, key_idx, sens_idx, cfg.tcap_homogeneity
        )
        assert inference_attack_score(real, synth, cfg).score == inference_oracle(
            real, synth, key_idx, sens_idx
        )


# ---------------------------------------------------------- new row synthesis ---

NUM = Schema(
    (
        ColumnSpec("v", ColumnKind.CONTINUOUS),
        ColumnSpec("c", ColumnKind.CATEGORICAL, categories=("a", "b")),
    )
)


def test_new_row_relative_tolerance_threshold():
    real = make_dataset(NUM, {"v": [100.0], "c": [0]})
    synth = make_dataset(NUM, {"v": [100.5], "c": [0]})
    assert new_row_synthesis(real, synth, 0.01).score == 0.0   # 0.5 <= 1.0
    assert new_row_synthesis(real, synth, 0.001).score == 1.0  # 0.5 > 0.1


def test_new_row_zero_reference_uses_absolute_tolerance():
    real = make_dataset(NUM, {"v": [0.0], "c": [0]})
    close = make_dataset(NUM, {"v": [0.005], "c": [0]})
    far = make_dataset(NUM, {"v": [0.05], "c": [0]})
    assert new_row_synthesis(real, close, 0.01).score == 0.0
    assert new_row_synthesis(real, far, 0.01).score == 1.0


def test_new_row_categorical_must_match_exactly():
    real = make_dataset(NUM, {"v": [1.0], "c": [0]})
    synth = make_dataset(NUM, {"v": [1.0], "c": [1]})
    assert new_row_synthesis(real, synth, 0.5).score == 1.0


def test_new_row_copy_and_disjoint():
    ds = make_dataset(NUM, {"v": [1.0, 2.0], "c": [0, 1]})
    assert new_row_synthesis(ds, ds, 0.01).score == 0.0
    other = make_dataset(NUM, {"v": [50.0, 60.0], "c": [0, 1]})
    assert new_row_synthesis(ds, other, 0.01).score == 1.0


def test_new_row_monotone_in_tolerance():
    rng = np.random.default_rng(1)
    real = make_dataset(NUM, {"v": rng.normal(10, 1, 40), "c": rng.integers(0, 2, 40)})
    synth = make_dataset(NUM, {"v": rng.normal(10, 1, 40), "c": rng.integers(0, 2, 40)})
    scores = [new_row_synthesis(real, synth, t).score for t in (0.001, 0.01, 0.1, 0.5)]
    assert all(a >= b for a, b in zip(scores, scores[1:]))


def test_new_row_brute_force_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        n_r, n_s = rng.integers(1, 10, 2)
        real = make_dataset(NUM, {"v": rng.integers(0, 4, n_r) * 1.0, "c": rng.integers(0, 2, n_r)})
        synth = make_dataset(NUM, {"v": rng.integers(0, 4, n_s) * 1.0, "c": rng.integers(0, 2, n_s)})
        tol = float(rng.choice([0.01, 0.3]))
        expected_unmatched = 0
        for s in rows_of(synth):
            hit = any(
                s[1] == r[1] and abs(s[0] - r[0]) <= (tol * abs(r[0]) if r[0] != 0 else tol)
                for r in rows_of(real)
            )
            expected_unmatched += not hit
        assert new_row_synthesis(real, synth, tol).score == expected_unmatched / synth.n


# ------------------------------------------------------- nearest-neighbour ---

def test_min_nn_hand_case_uses_schema_bounds():
    schema = Schema((ColumnSpec("x", ColumnKind.CONTINUOUS, bounds=(0.0, 10.0)),))
    real = make_dataset(schema, {"x": [0.0]})
    synth = make_dataset(schema, {"x": [5.0]})
    assert min_nn_distance(real, synth).score == pytest.approx(0.5)


def test_min_nn_zero_on_copy():
    ds = make_dataset(NUM, {"v": [1.0, 2.0, 3.0], "c": [0, 1, 0]})
    assert min_nn_distance(ds, ds).score == 0.0


def test_min_nn_disjoint_categorical_is_one():
    schema = Schema((ColumnSpec("c", ColumnKind.CATEGORICAL, categories=("a", "b")),))
    real = make_dataset(schema, {"c": [0, 0]})
    synth = make_dataset(schema, {"c": [1, 1]})
    assert min_nn_distance(real, synth).score == 1.0


def test_min_nn_matches_pairwise_gower_oracle():
    rng = np.random.default_rng(3)
    real = make_dataset(NUM, {"v": rng.uniform(0, 10, 15), "c": rng.integers(0, 2, 15)})
    synth = make_dataset(NUM, {"v": rng.uniform(0, 10, 12), "c": rng.integers(0, 2, 12)})
    ranges = column_ranges(real)
    expected = min(
        gower_distance(s, r, NUM, ranges)
        for s in rows_of(synth)
        for r in rows_of(real)
    )
    assert min_nn_distance(real, synth).score == pytest.approx(expected, rel=1e-12)


# ------------------------------------------------------------ sample overlap ---

def test_overlap_copy_is_one():
    ds = make_dataset(NUM, {"v": [1.0, 2.0, 3.0], "c": [0, 1, 0]})
    m = sample_overlap(ds, ds, 1.0, derive_stream(0, "ov"))
    assert m.score == 1.0


def test_overlap_disjoint_is_zero():
    a = make_dataset(NUM, {"v": [1.0, 2.0], "c": [0, 1]})
    b = make_dataset(NUM, {"v": [9.0, 8.0], "c": [0, 1]})
    assert sample_overlap(a, b, 1.0, derive_stream(1, "ov")).score == 0.0


def test_overlap_one_of_four():
    real = make_dataset(NUM, {"v": [1.0, 2.0, 3.0, 4.0], "c": [0, 0, 1, 1]})
    synth = make_dataset(NUM, {"v": [3.0, 30.0, 40.0, 50.0], "c": [1, 0, 0, 1]})
    assert sample_overlap(real, synth, 1.0, derive_stream(2, "ov")).score == 0.25


def test_overlap_row_order_invariant():
    rng = np.random.default_rng(4)
    real = make_dataset(NUM, {"v": rng.integers(0, 5, 30) * 1.0, "c": rng.integers(0, 2, 30)})
    synth = make_dataset(NUM, {"v": rng.integers(0, 5, 30) * 1.0, "c": rng.integers(0, 2, 30)})
    perm = rng.permutation(30)
    shuffled_real = make_dataset(NUM, {n: real.column(n)[perm] for n in NUM.names})
    shuffled_synth = make_dataset(NUM, {n: synth.column(n)[perm] for n in NUM.names})
    a = sample_overlap(real, synth, 0.5, derive_stream(5, "ov")).score
    b = sample_overlap(shuffled_real, shuffled_synth, 0.5, derive_stream(5, "ov")).score
    assert a == b


def test_overlap_deterministic_given_stream():
    rng = np.random.default_rng(6)
    real = make_dataset(NUM, {"v": rng.integers(0, 3, 20) * 1.0, "c": rng.integers(0, 2, 20)})
    synth = make_dataset(NUM, {"v": rng.integers(0, 3, 20) * 1.0, "c": rng.integers(0, 2, 20)})
    a = sample_overlap(real, synth, 0.4, derive_stream(7, "ov")).score
    b = sample_overlap(real, synth, 0.4, derive_stream(7, "ov")).score
    assert a == b


# --------------------------------------------------------------- config/orch ---

def test_config_validation():
    with pytest.raises(ConfigError):
        validate_privacy_config(PrivacyConfig(key_columns=("nope",), sensitive_column="s"), KS, True)
    with pytest.raises(ConfigError):
        validate_privacy_config(PrivacyConfig(key_columns=("k",), sensitive_column="k"), KS, True)
    with pytest.raises(ConfigError):
        validate_privacy_config(PrivacyConfig(key_columns=(), sensitive_column="s"), KS, True)
    for bad in (
        PrivacyConfig(key_columns=("k",), sensitive_column="s", numeric_match_tolerance=-0.1),
        PrivacyConfig(key_columns=("k",), sensitive_column="s", tcap_homogeneity=0.0),
        PrivacyConfig(key_columns=("k",), sensitive_column="s", overlap_sample_fraction=1.5),
    ):
        with pytest.raises(ConfigError):
            validate_privacy_config(bad, KS, True)


def test_orchestrator_runs_requested_metrics_in_order():
    real = ks_ds([("A", "x"), ("B", "y"), ("A", "y"), ("C", "x")] * 3)
    synth = ks_ds([("A", "x"), ("B", "x"), ("C", "y"), ("A", "x")] * 3)
    out = evaluate_privacy(real, synth, CFG, rng=derive_stream(0, "priv"))
    assert tuple(m.name for m in out) == PRIVACY_METRICS
    subset = evaluate_privacy(
        real, synth, CFG, metrics=("tcap", "categorical_cap"), rng=derive_stream(0, "priv")
    )
    assert [m.name for m in subset] == ["tcap", "categorical_cap"]


def test_orchestrator_row_cap_flags_proximity_metrics():
    rng = np.random.default_rng(8)
    real = make_dataset(NUM, {"v": rng.normal(0, 1, 40), "c": rng.integers(0, 2, 40)})
    synth = make_dataset(NUM, {"v": rng.normal(0, 1, 40), "c": rng.integers(0, 2, 40)})
    cfg = PrivacyConfig()
    out = evaluate_privacy(
        real,
        synth,
        cfg,
        metrics=("new_row_synthesis", "min_nn_distance", "sample_overlap"),
        rng=derive_stream(1, "priv"),
        proximity_row_cap=10,
    )
    by_name = {m.name: m for m in out}
    assert "row-capped" in by_name["new_row_synthesis"].details["flags"]
    assert "row-capped" in by_name["min_nn_distance"].details["flags"]
    assert "flags" not in by_name["sample_overlap"].details or "row-capped" not in by_name["sample_overlap"].details["flags"]


def test_orchestrator_deterministic():
    rng = np.random.default_rng(9)
    real = ks_ds([("A", "x"), ("B", "y")] * 10)
    synth = ks_ds([("A", "y"), ("B", "x")] * 10)
    a = evaluate_privacy(real, synth, CFG, rng=derive_stream(2, "priv"))
    b = evaluate_privacy(real, synth, CFG, rng=derive_stream(2, "priv"))
    assert [(m.name, m.score) for m in a] == [(m.name, m.score) for m in b]
