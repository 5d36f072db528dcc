import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from latentact import nn
from latentact.recsys import (
    Dataset,
    DatasetFormatError,
    RankingResult,
    evaluate_agreement,
    kendall_tau,
    load_csv,
    save_csv,
    synth_dataset,
    top_k,
)

ITEMS = {"a": [2.0, 0.0], "b": [0.0, 3.0], "c": [1.0, 1.0]}


def brute_top_k(query, items, k):
    """Oracle: score every item, sort with Python's stable sort on (-score, id)."""
    scored = [(sum(q * v for q, v in zip(query, vec)), iid) for iid, vec in items.items()]
    return [(iid, s) for s, iid in sorted(scored, key=lambda t: (-t[0], t[1]))][:k]


def brute_tau(s1, s2):
    conc = disc = 0
    keys = sorted(s1)
    for i, j in itertools.combinations(keys, 2):
        p = (s1[i] - s1[j]) * (s2[i] - s2[j])
        conc += p > 0
        disc += p < 0
    return (conc - disc) / (len(keys) * (len(keys) - 1) / 2)


def ranking(scores: dict) -> RankingResult:
    return RankingResult("q", sorted(scores.items(), key=lambda t: (-t[1], t[0])), len(scores))


def test_top_k_example():
    res = top_k([1.0, 0.0], ITEMS, 2)
    assert res.ranked_items == [("a", 2.0), ("c", 1.0)]
    assert res.ranked_items == brute_top_k([1.0, 0.0], ITEMS, 2)


def test_top_k_k_larger_than_items():
    assert len(top_k([1.0, 1.0], ITEMS, 10).ranked_items) == 3


def test_top_k_errors():
    with pytest.raises(ValueError, match="empty"):
        top_k([1.0], {}, 1)
    with pytest.raises(ValueError):
        top_k([1.0, 0.0], ITEMS, 0)


def test_top_k_identity_encoder_matches_raw():
    ds = synth_dataset(5, 40, 8, 0.3, seed=2)
    model = nn.identity_model(8)
    for x in ds.users:
        for k in (1, 7, 40):
            assert top_k(x, ds, k).ranked_items == top_k(x, ds, k, encoder=model).ranked_items


def test_top_k_zero_query_image_ties_by_id():
    kill = nn.linear_model(np.zeros((2, 2)))
    res = top_k([1.0, 0.0], ITEMS, 2, encoder=kill)
    assert res.ranked_items == [("a", 0.0), ("b", 0.0)]


def test_top_k_plain_callable_encoder():
    res = top_k([1.0, 0.0], ITEMS, 3, encoder=lambda x: -np.asarray(x))
    assert res.ids == ["a", "c", "b"]


@given(st.integers(0, 10_000), st.floats(0.01, 100.0))
def test_positive_scaling_preserves_order(seed, scale):
    rng = np.random.default_rng(seed)
    items = {f"i{j:02d}": rng.standard_normal(4) for j in range(20)}
    q = rng.standard_normal(4)
    scaled = {k: v * scale for k, v in items.items()}
    base = top_k(q, items, 20)
    assert base.ids == top_k(q, scaled, 20).ids
    assert base.ids == [i for i, _ in brute_top_k(q, items, 20)]


def test_kendall_examples():
    five = {c: float(5 - i) for i, c in enumerate("abcde")}
    assert kendall_tau(ranking(five), ranking(five)) == 1.0
    rev = {c: float(i) for i, c in enumerate("abcde")}
    assert kendall_tau(ranking(five), ranking(rev)) == -1.0
    r1 = {"a": 3.0, "b": 2.0, "c": 1.0}
    r2 = {"a": 2.0, "b": 3.0, "c": 1.0}
    assert brute_tau(r1, r2) == pytest.approx(1 / 3)
    assert kendall_tau(ranking(r1), ranking(r2)) == pytest.approx(1 / 3)


def test_kendall_ties_count_as_neither():
    r1 = {"a": 3.0, "b": 2.0, "c": 1.0}
    flat = {"a": 0.0, "b": 0.0, "c": 0.0}
    assert kendall_tau(ranking(r1), ranking(flat)) == 0.0


def test_kendall_mismatched_sets():
    with pytest.raises(ValueError, match="identical item set"):
        kendall_tau(ranking({"a": 1.0, "b": 2.0}), ranking({"a": 1.0, "c": 2.0}))


@given(st.integers(0, 10_000), st.integers(2, 12))
def test_kendall_matches_brute_force_and_symmetric(seed, n):
    rng = np.random.default_rng(seed)
    s1 = {f"i{j}": float(v) for j, v in enumerate(rng.integers(0, 4, n))}
    s2 = {f"i{j}": float(v) for j, v in enumerate(rng.integers(0, 4, n))}
    t = kendall_tau(ranking(s1), ranking(s2))
    assert t == pytest.approx(brute_tau(s1, s2), abs=1e-15)
    assert t == kendall_tau(ranking(s2), ranking(s1))
    assert -1.0 <= t <= 1.0


def test_agreement_identity():
    ds = synth_dataset(6, 30, 8, 0.0, seed=1)
    rep = evaluate_agreement(ds, nn.identity_model(8), 5)
    assert rep.kendall_tau == 1.0 and rep.topk_overlap == 1.0 and rep.collapse_flags == []


def test_agreement_identity_with_score_ties():
    # sparse vectors give exactly tied raw scores, which tau-a counts as neither
    ds = synth_dataset(6, 30, 8, 0.5, seed=1)
    rep = evaluate_agreement(ds, nn.identity_model(8), 5)
    assert rep.topk_overlap == 1.0 and rep.collapse_flags == []
    assert 0.0 < rep.kendall_tau < 1.0
    for u, x in zip(rep.per_user, ds.users):
        s = dict(zip(ds.item_ids, ds.items @ x))
        assert u.kendall_tau == pytest.approx(brute_tau(s, s))


def test_agreement_constant_encoder_collapses_everyone():
    ds = synth_dataset(6, 30, 8, 0.0, seed=1)
    const = nn.linear_model(np.zeros((3, 8)), np.array([0.2, -1.0, 0.7]))
    rep = evaluate_agreement(ds, const, 5)
    assert rep.collapse_flags == ds.user_ids


def test_agreement_collapse_flag_iff_score_spread_small():
    ds = synth_dataset(8, 25, 6, 0.0, seed=4)
    f = nn.linear_model(np.random.default_rng(0).standard_normal((3, 6)) * 1e-6)
    rep = evaluate_agreement(ds, f, 3)
    Z = f.encode_batch(ds.items)
    for u, x in zip(rep.per_user, ds.users):
        s = Z @ f.encode(x)
        assert u.collapsed == (s.max() - s.min() <= 1e-9)


def test_agreement_k_range():
    ds = synth_dataset(2, 5, 4, seed=0)
    with pytest.raises(ValueError):
        evaluate_agreement(ds, nn.identity_model(4), 6)


def test_synth_contract():
    ds = synth_dataset(10, 50, 16, 0.8, 7)
    assert ds.users.shape == (10, 16) and ds.items.shape == (50, 16)
    assert np.all(np.count_nonzero(ds.users, axis=1) >= 1)
    assert np.all(np.count_nonzero(ds.items, axis=1) >= 1)
    zero_frac = 1 - np.count_nonzero(np.vstack([ds.users, ds.items])) / (60 * 16)
    assert 0.7 < zero_frac < 0.9


def test_synth_dense_and_deterministic():
    ds = synth_dataset(4, 9, 8, 0.0, 3)
    assert np.all(ds.users != 0) and np.all(ds.items != 0)
    again = synth_dataset(4, 9, 8, 0.0, 3)
    assert ds.users.tobytes() == again.users.tobytes() and ds.items.tobytes() == again.items.tobytes()
    assert ds.item_ids == again.item_ids


def test_synth_is_low_rank():
    ds = synth_dataset(40, 60, 16, 0.0, 1)
    assert np.linalg.matrix_rank(np.vstack([ds.users, ds.items])) == 4


def test_csv_well_formed(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("kind,id,v0,v1\nuser,alice,1,2\nitem,x,0.5,-1\nuser,bob,3,4\nitem,y,0,1\nitem,z,2,2\n")
    ds = load_csv(p)
    assert ds.user_ids == ["alice", "bob"] and ds.item_ids == ["x", "y", "z"]
    np.testing.assert_array_equal(ds.users, [[1, 2], [3, 4]])
    np.testing.assert_array_equal(ds.items, [[0.5, -1], [0, 1], [2, 2]])


def test_csv_round_trip(tmp_path):
    ds = synth_dataset(3, 7, 5, 0.2, 9)
    back = load_csv(save_csv(ds, tmp_path / "d.csv"))
    assert back.users.tobytes() == ds.users.tobytes() and back.items.tobytes() == ds.items.tobytes()
    assert back.user_ids == ds.user_ids and back.item_ids == ds.item_ids


@pytest.mark.parametrize(
    "body, pattern",
    [
        ("kind,id,v0,v1\nuser,a,1\n", "row 2: expected 4 columns, found 3"),
        ("kind,id,v0,v1\nitem,a,1,2\nitem,a,3,4\n", "row 3: duplicate item id 'a'"),
        ("kind,id,v0,v1\nitem,a,1,oops\n", "row 2: non-numeric value 'oops'"),
        ("kind,id,v0,v1\nthing,a,1,2\n", "row 2: kind must be"),
        ("id,kind,v0\n", "row 1: bad header"),
        ("kind,id,v0\nuser,a,1\n", "no item rows"),
    ],
)
def test_csv_errors(tmp_path, body, pattern):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(DatasetFormatError, match=pattern):
        load_csv(p)


def test_dataset_validation():
    with pytest.raises(ValueError, match="duplicate user id"):
        Dataset(["a", "a"], np.ones((2, 2)), ["x"], np.ones((1, 2)))
