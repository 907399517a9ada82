"""Secure MSR scheme: random pad + Gabidulin precoding + systematic Ye–Barg encoding.

The message vector is a = (r, f_s): the first M - Ms coordinates are the
uniform pad, the last Ms are the secret.  The precoded vector f = p(a; Y) is
split into k blocks of alpha symbols and encoded systematically.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping

import numpy as np

from .errors import (
    BudgetTooLarge,
    DegenerateCode,
    HelperInRepairSet,
    LengthMismatch,
    ParamError,
    TowerTooSmall,
)
from .field_tower import FieldTower
from .gabidulin import evaluation_points, invert_precode, moore_inverse, moore_matrix, precode
from .msr import CodeParams, code_params, decode_erasures, encode_systematic, repair_indices


def secure_file_size(n: int, k: int, ell1: int, ell2: int) -> int:
    """(k - l1 - l2) (1 - 1/(n-k))^l2 (n-k)^(n-1), computed in integers."""
    r = n - k
    return (k - ell1 - ell2) * (r - 1) ** ell2 * r ** (n - 1 - ell2)


@dataclass(frozen=True, eq=False)
class SchemeParams:
    code: CodeParams
    ell1: int
    ell2: int
    Ms: int
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def tower(self) -> FieldTower:
        return self.code.tower

    @property
    def n(self) -> int:
        return self.code.n

    @property
    def k(self) -> int:
        return self.code.k

    @property
    def Q(self) -> int:
        return self.tower.Q

    @property
    def M(self) -> int:
        return self.code.k * self.code.alpha

    @property
    def pad_size(self) -> int:
        return self.M - self.Ms

    @property
    def nominal_Ms(self) -> int:
        return secure_file_size(self.n, self.k, self.ell1, self.ell2)

    @property
    def tampered(self) -> bool:
        return self.Ms != self.nominal_Ms

    @cached_property
    def points(self) -> np.ndarray:
        return evaluation_points(self.M, self.tower)

    @cached_property
    def moore(self) -> np.ndarray:
        return moore_matrix(self.tower, self.points)

    @cached_property
    def moore_inv(self) -> np.ndarray:
        return moore_inverse(self.tower, self.points)

    def summary(self) -> dict:
        c = self.code
        return {
            "n": c.n, "k": c.k, "d": c.d, "ell1": self.ell1, "ell2": self.ell2,
            "alpha": c.alpha, "beta": c.beta, "M": self.M, "Ms": self.Ms,
            "pad_symbols": self.pad_size,
            "repair_bandwidth": c.repair_bandwidth,
            "tower": self.tower.params,
        }


def scheme_params(n: int, k: int, ell1: int, ell2: int, tower: FieldTower,
                  secret_size: int | None = None) -> SchemeParams:
    """Validate and derive all sizes.

    ``secret_size`` overrides Ms (shrinking the pad); only meant for tightness
    experiments, the resulting scheme is generally insecure.
    """
    if ell1 < 0 or ell2 < 0:
        raise ParamError("eavesdropper budgets must be non-negative")
    if ell1 + ell2 >= k:
        raise BudgetTooLarge(f"need ell1 + ell2 < k, got {ell1} + {ell2} >= {k}")
    if n - k < 2:
        raise DegenerateCode(f"n - k = {n - k} leaves no room for a secret")
    if tower.base_order < n + 1:
        raise TowerTooSmall(f"|B| = {tower.base_order} < n + 1 = {n + 1}")
    code = code_params(n, k, tower)
    M = k * code.alpha
    if tower.Q < M:
        raise TowerTooSmall(f"Q = {tower.Q} < M = {M}: not enough B-independent points")
    Ms = secure_file_size(n, k, ell1, ell2)
    if secret_size is not None:
        if not 0 < secret_size <= M:
            raise ParamError(f"secret size must be in (0, {M}]")
        Ms = secret_size
    return SchemeParams(code=code, ell1=ell1, ell2=ell2, Ms=Ms)


# --------------------------------------------------------------------------
# repair downloads seen from one helper

def download_set(code: CodeParams, j: int, S) -> tuple[np.ndarray, int]:
    """Union of the positions helper ``j`` sends while every node in ``S`` is repaired."""
    S = set(S)
    if j in S:
        raise HelperInRepairSet(f"helper {j} is itself being repaired")
    if not 1 <= j <= code.n:
        raise ParamError(f"node ids must be in 1..{code.n}")
    mask = np.zeros(code.alpha, dtype=bool)
    for i in S:
        mask[repair_indices(code, i)] = True
    idx = np.flatnonzero(mask)
    return idx, len(idx)


def download_size_closed_form(n: int, k: int, s: int) -> int:
    value = (1 - (1 - Fraction(1, n - k)) ** s) * (n - k) ** (n - 1)
    assert value.denominator == 1
    return int(value)


# --------------------------------------------------------------------------
# bounds

@dataclass
class BoundsReport:
    n: int
    k: int
    d: int
    ell1: int
    ell2: int
    alpha: int
    beta: Fraction
    cutset_total: Fraction
    secrecy_cutset: Fraction
    msr_fixed_beta: Fraction
    msr_d_n_minus_1: Fraction
    msr_general_d: Fraction
    construction_Ms: Fraction
    # the same three formulas with (k - l1 + l2), the alternate reading
    msr_fixed_beta_plus_reading: Fraction
    msr_d_n_minus_1_plus_reading: Fraction
    msr_general_d_plus_reading: Fraction

    def to_dict(self) -> dict:
        out = {}
        for key, val in asdict(self).items():
            if isinstance(val, Fraction):
                out[key] = int(val) if val.denominator == 1 else float(val)
            else:
                out[key] = val
        return out


def bounds(n: int, k: int, d: int, ell1: int, ell2: int, alpha, beta) -> BoundsReport:
    alpha = Fraction(alpha)
    beta = Fraction(beta)
    r = n - k

    def cut(lo):
        return sum((min(alpha, (d - i + 1) * beta) for i in range(lo, k + 1)), Fraction(0))

    minus = k - ell1 - ell2
    plus = k - ell1 + ell2
    fixed_beta = alpha - ell2 * beta
    d_n1 = (1 - Fraction(1, r)) ** ell2 * alpha
    general = (1 - Fraction(1, d - k + 1)) ** ell2 * alpha
    return BoundsReport(
        n=n, k=k, d=d, ell1=ell1, ell2=ell2, alpha=int(alpha), beta=beta,
        cutset_total=cut(1),
        secrecy_cutset=cut(ell1 + ell2 + 1),
        msr_fixed_beta=minus * fixed_beta,
        msr_d_n_minus_1=minus * d_n1,
        msr_general_d=minus * general,
        construction_Ms=Fraction(secure_file_size(n, k, ell1, ell2)),
        msr_fixed_beta_plus_reading=plus * fixed_beta,
        msr_d_n_minus_1_plus_reading=plus * d_n1,
        msr_general_d_plus_reading=plus * general,
    )


# --------------------------------------------------------------------------
# encode / decode

class SystemRandomSource:
    """OS entropy with the one method the encoders need."""

    def bytes(self, n: int) -> bytes:
        return os.urandom(n)


def draw_pad(scheme: SchemeParams, batch=(), source=None) -> np.ndarray:
    if source is None:
        source = SystemRandomSource()
    return scheme.tower.random(tuple(batch) + (scheme.pad_size,), source)


def message_vector(scheme: SchemeParams, secret, pad) -> np.ndarray:
    """a = (pad, secret)."""
    return np.concatenate([np.asarray(pad, dtype=np.uint8),
                           np.asarray(secret, dtype=np.uint8)], axis=-2)


def secure_encode(scheme: SchemeParams, secret, source=None, *, pad=None) -> np.ndarray:
    """Codeword (..., n, alpha, Q) for the secret (..., Ms, Q).

    The pad comes from ``source`` (anything with ``bytes(n)``, e.g. a seeded
    numpy Generator; OS entropy by default) unless given explicitly.
    """
    secret = np.asarray(secret, dtype=np.uint8)
    if secret.ndim < 2 or secret.shape[-2:] != (scheme.Ms, scheme.Q):
        raise LengthMismatch(f"secret must have shape (..., {scheme.Ms}, {scheme.Q}),"
                             f" got {secret.shape}")
    batch = secret.shape[:-2]
    if pad is None:
        pad = draw_pad(scheme, batch, source)
    elif np.shape(pad) != batch + (scheme.pad_size, scheme.Q):
        raise LengthMismatch(f"pad must have shape {batch + (scheme.pad_size, scheme.Q)}")
    f = precode(scheme.tower, message_vector(scheme, secret, pad), scheme.points, scheme.moore)
    code = scheme.code
    return encode_systematic(code, f.reshape(batch + (code.k, code.alpha, scheme.Q)))


def recover_message(scheme: SchemeParams, codeword) -> np.ndarray:
    """Full message vector a = (pad, secret) from a complete codeword."""
    c = np.asarray(codeword, dtype=np.uint8)
    code = scheme.code
    f = c[..., :code.k, :, :].reshape(c.shape[:-3] + (scheme.M, scheme.Q))
    return invert_precode(scheme.tower, f, scheme.points, inverse=scheme.moore_inv)


def secure_decode(scheme: SchemeParams, known: Mapping[int, np.ndarray]) -> np.ndarray:
    """Secret from any k (or more) node blocks."""
    codeword = decode_erasures(scheme.code, known)
    return recover_message(scheme, codeword)[..., scheme.pad_size:, :]


def min_base_degree(n: int) -> int:
    w = 1
    while (1 << w) < n + 1:
        w += 1
    return w


def default_tower(n: int, k: int, w: int | None = None, Q: int | None = None) -> FieldTower:
    """Smallest base field with |B| >= n + 1 and Q = M unless overridden."""
    from .field_tower import build_field_tower

    if w is None:
        w = min_base_degree(n)
    if Q is None:
        Q = k * (n - k) ** (n - 1)
    return build_field_tower(w, Q)
