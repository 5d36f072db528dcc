"""Dot-product recommendation in raw and latent space, and agreement metrics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .linalg import DimensionError
from .properties import TAU_ORDER


class DatasetFormatError(ValueError):
    pass


@dataclass
class Dataset:
    user_ids: list[str]
    users: np.ndarray  # (n_users, dim)
    item_ids: list[str]
    items: np.ndarray  # (n_items, dim)

    def __post_init__(self):
        self.users = np.array(self.users, dtype=np.float64, ndmin=2)
        self.items = np.array(self.items, dtype=np.float64, ndmin=2)
        self.user_ids = [str(u) for u in self.user_ids]
        self.item_ids = [str(i) for i in self.item_ids]
        if len(self.user_ids) != len(self.users) or len(self.item_ids) != len(self.items):
            raise ValueError("id lists must match vector counts")
        if self.users.shape[1] != self.items.shape[1]:
            raise DimensionError(f"user dim {self.users.shape[1]} != item dim {self.items.shape[1]}")
        for kind, ids in (("user", self.user_ids), ("item", self.item_ids)):
            if len(set(ids)) != len(ids):
                dup = next(i for i in ids if ids.count(i) > 1)
                raise ValueError(f"duplicate {kind} id {dup!r}")

    @property
    def dim(self) -> int:
        return self.items.shape[1]

    def item_pairs(self) -> list[tuple[str, np.ndarray]]:
        return list(zip(self.item_ids, self.items))


@dataclass
class RankingResult:
    query_id: str
    ranked_items: list[tuple[str, float]]
    k: int

    @property
    def ids(self) -> list[str]:
        return [i for i, _ in self.ranked_items]

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.ranked_items]


def encode_rows(f, X) -> np.ndarray:
    """Apply an encoder to each row, using ``f.encode_batch`` when it exists."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    batch = getattr(f, "encode_batch", None)
    if batch is not None:
        return np.atleast_2d(batch(X))
    return np.array([np.asarray(f(row), dtype=np.float64).reshape(-1) for row in X])


def _split_items(items):
    if isinstance(items, Dataset):
        return items.item_ids, items.items
    if isinstance(items, dict):
        items = list(items.items())
    ids = [str(i) for i, _ in items]
    if not ids:
        raise ValueError("item list is empty")
    return ids, np.array([np.asarray(v, dtype=np.float64) for _, v in items])


def rank_scores(query_id: str, ids: list[str], scores: np.ndarray, k: int) -> RankingResult:
    # descending score, ties by ascending id
    order = np.lexsort((np.argsort(np.argsort(ids, kind="stable"), kind="stable"), -scores))
    top = order[:k]
    return RankingResult(query_id, [(ids[i], float(scores[i])) for i in top], k)


def top_k(query, items, k: int, encoder=None, query_id: str = "query") -> RankingResult:
    """Exact full-scan top-k by dot product, in latent space when ``encoder`` is given."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ids, X = _split_items(items)
    if len(ids) == 0:
        raise ValueError("item list is empty")
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.size != X.shape[1]:
        raise DimensionError(f"query dim {q.size} != item dim {X.shape[1]}")
    if encoder is not None:
        X = encode_rows(encoder, X)
        q = encode_rows(encoder, q)[0]
    return rank_scores(query_id, ids, X @ q, k)


def kendall_tau(r1: RankingResult, r2: RankingResult) -> float:
    """Tau-a over all item pairs; a pair tied in either ranking counts as neither."""
    s1 = dict(r1.ranked_items)
    s2 = dict(r2.ranked_items)
    if set(s1) != set(s2) or len(s1) != len(r1.ranked_items) or len(s2) != len(r2.ranked_items):
        raise ValueError("rankings must cover the identical item set")
    keys = sorted(s1)
    n = len(keys)
    if n < 2:
        return 1.0
    a = np.array([s1[i] for i in keys])
    b = np.array([s2[i] for i in keys])
    iu = np.triu_indices(n, 1)
    prod = (np.sign(a[:, None] - a[None, :]) * np.sign(b[:, None] - b[None, :]))[iu]
    return float((np.count_nonzero(prod > 0) - np.count_nonzero(prod < 0)) / (n * (n - 1) / 2))


@dataclass
class UserAgreement:
    user_id: str
    kendall_tau: float
    topk_overlap: float
    collapsed: bool


@dataclass
class AgreementReport:
    kendall_tau: float
    topk_overlap: float
    collapse_flags: list[str]
    k: int
    seed: int
    per_user: list[UserAgreement] = field(default_factory=list)

    def to_dict(self):
        return {
            "kendall_tau": self.kendall_tau,
            "topk_overlap": self.topk_overlap,
            "collapse_flags": list(self.collapse_flags),
            "k": self.k,
            "seed": self.seed,
            "per_user": [
                {"user_id": u.user_id, "kendall_tau": u.kendall_tau, "topk_overlap": u.topk_overlap,
                 "collapsed": u.collapsed}
                for u in self.per_user
            ],
        }


def evaluate_agreement(dataset: Dataset, f, k: int, seed: int = 0, tau_order: float = TAU_ORDER) -> AgreementReport:
    """Compare raw and latent full rankings for every user.

    ``seed`` is recorded in the report; the evaluation itself is exhaustive.
    """
    n_items = len(dataset.item_ids)
    if not 1 <= k <= n_items:
        raise ValueError(f"k must lie in [1, {n_items}]")
    ids = dataset.item_ids
    Z_items = encode_rows(f, dataset.items)
    Z_users = encode_rows(f, dataset.users)
    rows = []
    for uid, x, zx in zip(dataset.user_ids, dataset.users, Z_users):
        raw = rank_scores(uid, ids, dataset.items @ x, n_items)
        latent_scores = Z_items @ zx
        latent = rank_scores(uid, ids, latent_scores, n_items)
        overlap = len(set(raw.ids[:k]) & set(latent.ids[:k])) / k
        collapsed = bool(latent_scores.max() - latent_scores.min() <= tau_order)
        rows.append(UserAgreement(uid, kendall_tau(raw, latent), overlap, collapsed))
    return AgreementReport(
        kendall_tau=float(np.mean([r.kendall_tau for r in rows])),
        topk_overlap=float(np.mean([r.topk_overlap for r in rows])),
        collapse_flags=[r.user_id for r in rows if r.collapsed],
        k=k,
        seed=seed,
        per_user=rows,
    )


def low_rank_vectors(count: int, dim: int, factor_rank: int, rng: np.random.Generator, loadings=None):
    """Rows of ``P @ L`` with Gaussian factors, scaled to unit-order entries."""
    if loadings is None:
        loadings = rng.standard_normal((factor_rank, dim))
    P = rng.standard_normal((count, factor_rank))
    return (P @ loadings) / np.sqrt(factor_rank), loadings


def synth_dataset(n_users: int, n_items: int, dim: int, sparsity: float = 0.0, seed: int = 0) -> Dataset:
    """Latent-factor users and items sharing one loading matrix of rank ``max(2, dim // 4)``.

    Each entry is then zeroed independently with probability ``sparsity``;
    a row that ends up all zero gets a fresh mask.
    """
    if min(n_users, n_items, dim) < 1:
        raise ValueError("counts and dim must be positive")
    if not 0.0 <= sparsity < 1.0:
        raise ValueError("sparsity must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    r = max(2, dim // 4)
    users, L = low_rank_vectors(n_users, dim, r, rng)
    items, _ = low_rank_vectors(n_items, dim, r, rng, loadings=L)
    for M in (users, items):
        if sparsity == 0.0:
            continue
        for row in M:
            while True:
                keep = rng.random(dim) >= sparsity
                if np.any(keep & (row != 0)):
                    break
            row[~keep] = 0.0
    width_u = len(str(max(n_users - 1, 0)))
    width_i = len(str(max(n_items - 1, 0)))
    return Dataset(
        [f"u{i:0{width_u}d}" for i in range(n_users)],
        users,
        [f"i{i:0{width_i}d}" for i in range(n_items)],
        items,
    )


def dumps_csv(dataset: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "id", *(f"v{j}" for j in range(dataset.dim))])
    for kind, ids, X in (("user", dataset.user_ids, dataset.users), ("item", dataset.item_ids, dataset.items)):
        for i, row in zip(ids, X):
            w.writerow([kind, i, *(format(float(v), ".17g") for v in row)])
    return buf.getvalue()


def save_csv(dataset: Dataset, path) -> Path:
    return atomic_write_text(path, dumps_csv(dataset))


def load_csv(path) -> Dataset:
    """Parse ``kind,id,v0,...`` rows; row numbers in errors count the header as row 1."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetFormatError("empty file: header row required")
    header = [h.strip() for h in rows[0]]
    dim = len(header) - 2
    if header[:2] != ["kind", "id"] or dim < 1 or header[2:] != [f"v{j}" for j in range(dim)]:
        raise DatasetFormatError(f"row 1: bad header {rows[0]!r}; expected kind,id,v0,...,v{{n-1}}")
    seen = {"user": {}, "item": {}}
    vecs = {"user": [], "item": []}
    for rownum, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != dim + 2:
            raise DatasetFormatError(f"row {rownum}: expected {dim + 2} columns, found {len(row)}")
        kind, ident = row[0].strip(), row[1].strip()
        if kind not in seen:
            raise DatasetFormatError(f"row {rownum}: kind must be 'user' or 'item', found {kind!r}")
        if not ident:
            raise DatasetFormatError(f"row {rownum}: empty id")
        if ident in seen[kind]:
            raise DatasetFormatError(
                f"row {rownum}: duplicate {kind} id {ident!r} (first seen on row {seen[kind][ident]})"
            )
        try:
            vec = [float(c) for c in row[2:]]
        except ValueError:
            bad = next(c for c in row[2:] if not _is_float(c))
            raise DatasetFormatError(f"row {rownum}: non-numeric value {bad!r}") from None
        if not all(np.isfinite(vec)):
            raise DatasetFormatError(f"row {rownum}: non-finite value")
        seen[kind][ident] = rownum
        vecs[kind].append(vec)
    if not vecs["item"]:
        raise DatasetFormatError("no item rows")
    return Dataset(
        list(seen["user"]),
        np.array(vecs["user"]).reshape(-1, dim),
        list(seen["item"]),
        np.array(vecs["item"]).reshape(-1, dim),
    )


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True
