"""Audits of the three encoder properties and a constructive violation certifier.

An *encoder* here is any callable mapping a length-``n`` float array to a
length-``m`` float array; ``MLPModel`` instances qualify. The properties:

1. dimension reduction, ``m <= n``;
2. order preservation, ``<x,u> <= <x,v>`` implies ``<f(x),f(u)> <= <f(x),f(v)>``;
3. non-zero preservation, ``x != 0`` implies ``f(x) != 0``.

If 2 and 3 hold and ``m < n`` then ``f(0)`` cannot be zero. ``certify_violation``
runs that argument backwards: given ``f(0) = 0`` and ``m < n`` it walks an
orthogonal basis and returns a concrete witness that 2 or 3 fails.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np

from .linalg import OrthogonalBasis, dot, norm, null_vector, rank, standard_basis

# Exact zero test by default; see README "Tolerances".
TAU_ZERO = 0.0
TAU_ORDER = 1e-9
RAW_TIE = 1e-12

Encoder = Callable[[np.ndarray], np.ndarray]


class PreconditionError(ValueError):
    pass


def _vec(a) -> list[float] | None:
    return None if a is None else [float(v) for v in np.asarray(a).reshape(-1)]


def _eval(f: Encoder, x) -> np.ndarray:
    return np.asarray(f(np.asarray(x, dtype=np.float64)), dtype=np.float64).reshape(-1)


@dataclass(frozen=True)
class ZeroImageReport:
    zero_image: np.ndarray
    norm_sq: float
    is_zero: bool
    tau_zero: float

    def to_dict(self):
        return {
            "zero_image": _vec(self.zero_image),
            "norm_sq": self.norm_sq,
            "is_zero": self.is_zero,
            "tau_zero": self.tau_zero,
        }


def zero_image(f: Encoder, n: int, tau_zero: float = TAU_ZERO) -> ZeroImageReport:
    z = _eval(f, np.zeros(n))
    nsq = dot(z, z)
    return ZeroImageReport(z, nsq, bool(norm(z) <= tau_zero), tau_zero)


class CertificateKind(str, enum.Enum):
    NON_ZERO_VIOLATION = "NonZeroViolation"
    ORDER_VIOLATION = "OrderViolation"
    NONE_FOUND = "NoneFound"


@dataclass(frozen=True)
class ViolationCertificate:
    kind: CertificateKind
    witness_x: np.ndarray | None = None
    witness_u: np.ndarray | None = None
    witness_v: np.ndarray | None = None
    raw_dots: tuple[float, float] | None = None
    encoded_dots: tuple[float, float] | None = None
    margin: float = 0.0

    def to_dict(self):
        return {
            "kind": self.kind.value,
            "witness_x": _vec(self.witness_x),
            "witness_u": _vec(self.witness_u),
            "witness_v": _vec(self.witness_v),
            "raw_dots": None if self.raw_dots is None else list(self.raw_dots),
            "encoded_dots": None if self.encoded_dots is None else list(self.encoded_dots),
            "margin": self.margin,
        }


def _nonzero_cert(x):
    return ViolationCertificate(CertificateKind.NON_ZERO_VIOLATION, witness_x=np.array(x), margin=norm(x))


def nonzero_preservation_audit(f: Encoder, inputs, tau_zero: float = TAU_ZERO) -> list[ViolationCertificate]:
    """Every non-zero input whose image vanishes, in input order."""
    found = []
    for x in inputs:
        x = np.asarray(x, dtype=np.float64)
        if norm(x) > tau_zero and norm(_eval(f, x)) <= tau_zero:
            found.append(_nonzero_cert(x))
    return found


@dataclass(frozen=True)
class OrderAuditReport:
    triples_tested: int
    violations: int
    violation_rate: float
    worst_margin: float
    seed: int

    def to_dict(self):
        return asdict(self)


def gaussian_sampler(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.standard_normal(n)


def order_preservation_audit(
    f: Encoder,
    n: int,
    triples: int,
    seed: int = 0,
    sampler=gaussian_sampler,
    tau_order: float = TAU_ORDER,
) -> OrderAuditReport:
    """Sampled check of order preservation.

    Triple ``i`` is drawn from a generator seeded with ``(seed, i)``, so the
    report does not depend on evaluation order. ``u`` and ``v`` are swapped
    as needed so that ``<x,u> <= <x,v>``. A raw tie (gap at most 1e-12)
    demands encoded equality within ``tau_order``. ``worst_margin`` is the
    largest encoded reversal seen, 0 when there is none.
    """
    if triples < 1:
        raise ValueError("triples must be >= 1")
    violations = 0
    worst = 0.0
    for i in range(triples):
        rng = np.random.default_rng([seed, i])
        x, u, v = (np.asarray(sampler(rng, n), dtype=np.float64) for _ in range(3))
        ru, rv = dot(x, u), dot(x, v)
        if ru > rv:
            u, v, ru, rv = v, u, rv, ru
        fx, fu, fv = _eval(f, x), _eval(f, u), _eval(f, v)
        gap = dot(fx, fu) - dot(fx, fv)
        if rv - ru <= RAW_TIE:
            gap = abs(gap)
        if gap > tau_order:
            violations += 1
            worst = max(worst, gap)
    return OrderAuditReport(triples, violations, violations / triples, worst, seed)


def certify_violation(
    f: Encoder,
    n: int,
    m: int,
    basis: OrthogonalBasis | None = None,
    tau_zero: float = TAU_ZERO,
    tau_order: float = TAU_ORDER,
) -> ViolationCertificate:
    """Witness that a dimension-reducing encoder with ``f(0) = 0`` breaks property 2 or 3.

    Walks ``basis`` (standard basis by default). A basis vector with a
    vanishing image is a non-zero violation. Otherwise ``n`` non-zero images
    in ``R^m`` with ``m < n`` cannot be mutually orthogonal; for the first
    ordered pair ``(i, j)`` with a non-zero encoded dot product, ``b_i`` is
    orthogonal to both ``b_j`` and ``0`` yet their encoded similarities to
    ``f(b_i)`` differ, which reverses the order one way or the other.
    """
    if m >= n:
        raise PreconditionError(f"theorem inapplicable: needs m < n, got m={m}, n={n}")
    zi = zero_image(f, n, tau_zero)
    if zi.zero_image.size != m:
        raise PreconditionError(f"encoder outputs dim {zi.zero_image.size}, expected m={m}")
    if not zi.is_zero:
        raise PreconditionError(
            f"f(0) is not zero (norm {np.sqrt(zi.norm_sq):.3g} > tau_zero {tau_zero}); "
            "inspect zero_image instead"
        )
    basis = standard_basis(n) if basis is None else basis
    if basis.n != n:
        raise PreconditionError(f"basis has {basis.n} vectors, expected n={n}")

    zero = np.zeros(n)
    f0 = zi.zero_image
    images = []
    for b in basis:
        fb = _eval(f, b)
        if norm(fb) <= tau_zero:
            return _nonzero_cert(b)
        images.append(fb)

    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            d = dot(images[i], images[j])
            if abs(d) <= tau_order:
                continue
            x = basis[i]
            u, v = (basis[j], zero) if d > 0 else (zero, basis[j])
            fu, fv = (images[j], f0) if d > 0 else (f0, images[j])
            enc = (dot(images[i], fu), dot(images[i], fv))
            margin = enc[0] - enc[1]
            if margin <= tau_order:
                continue
            return ViolationCertificate(
                CertificateKind.ORDER_VIOLATION,
                witness_x=np.array(x),
                witness_u=np.array(u),
                witness_v=np.array(v),
                raw_dots=(dot(x, u), dot(x, v)),
                encoded_dots=enc,
                margin=margin,
            )
    return ViolationCertificate(CertificateKind.NONE_FOUND)


def verify_certificate(
    f: Encoder, cert: ViolationCertificate, tau_zero: float = TAU_ZERO, tau_order: float = TAU_ORDER
) -> bool:
    """Re-check a certificate with fresh forward passes."""
    if cert.kind is CertificateKind.NON_ZERO_VIOLATION:
        x = cert.witness_x
        return norm(x) > tau_zero and norm(_eval(f, x)) <= tau_zero
    if cert.kind is CertificateKind.ORDER_VIOLATION:
        x, u, v = cert.witness_x, cert.witness_u, cert.witness_v
        if not dot(x, u) <= dot(x, v) + RAW_TIE:
            return False
        fx = _eval(f, x)
        return dot(fx, _eval(f, u)) > dot(fx, _eval(f, v)) + tau_order
    return False


@dataclass(frozen=True)
class RankReport:
    basis_dim: int
    latent_dim: int
    encoded_rank: int
    dependent_coeffs: np.ndarray | None

    def to_dict(self):
        return {
            "basis_dim": self.basis_dim,
            "latent_dim": self.latent_dim,
            "encoded_rank": self.encoded_rank,
            "dependent_coeffs": _vec(self.dependent_coeffs),
        }


def encode_basis(f: Encoder, basis: OrthogonalBasis) -> np.ndarray:
    return np.array([_eval(f, b) for b in basis])


def lemma1_rank_check(f: Encoder, basis: OrthogonalBasis) -> RankReport:
    """Rank of the encoded basis, plus unit-norm ``a`` with ``sum a_i f(b_i) ~ 0`` when dependent."""
    F = encode_basis(f, basis)
    n, m = F.shape
    # dependence among the rows of F is a null vector of F^T
    r = rank(F.T)
    coeffs = null_vector(F.T) if r < n else None
    return RankReport(n, m, r, coeffs)


def hyperplane_check(f: Encoder, inputs) -> float:
    """Largest ``|<f(0), f(u)> - |f(0)|^2|`` over ``inputs``."""
    inputs = [np.asarray(u, dtype=np.float64) for u in inputs]
    if not inputs:
        raise ValueError("inputs must be non-empty")
    f0 = _eval(f, np.zeros(inputs[0].size))
    base = dot(f0, f0)
    return max(abs(dot(f0, _eval(f, u)) - base) for u in inputs)
