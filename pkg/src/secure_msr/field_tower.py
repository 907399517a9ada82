"""Two-level field tower B = GF(2^w), F = B[z]/(g(z)) with deg g = Q.

Elements of B are small ints (GF(2)-polynomial bitmasks).  Elements of F are
numpy ``uint8`` arrays whose last axis holds the Q coefficients over B
(coefficient ``i`` multiplies ``z**i``).  Every array operation broadcasts
over leading axes, so a vector of F elements has shape ``(n, Q)`` and a matrix
has shape ``(m, n, Q)``.

Linear algebra is provided at both levels: ``base_*`` functions work on plain
B-valued matrices (trailing axes of the right-hand side are carried along,
which is how a B-matrix is applied to F-valued symbols coefficient-wise), and
``ext_*`` functions do exact Gaussian elimination over F.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DivisionByZero,
    Inconsistent,
    NoIrreducibleFound,
    NotIrreducible,
    NotPrimitive,
    ParamError,
    Underdetermined,
)

MAX_W = 8


# --------------------------------------------------------------------------
# GF(2)[x] helpers (ints as bit vectors)

def _clmul(a: int, b: int) -> int:
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def _gf2_mod(a: int, m: int) -> int:
    dm = m.bit_length() - 1
    while a.bit_length() - 1 >= dm:
        a ^= m << (a.bit_length() - 1 - dm)
    return a


def gf2_is_irreducible(m: int) -> bool:
    """Exhaustive check: no factor of degree 1..deg/2 divides ``m``."""
    deg = m.bit_length() - 1
    if deg < 1:
        return False
    if deg == 1:
        return True
    for d in range(1, deg // 2 + 1):
        for f in range(1 << d, 1 << (d + 1)):
            if _gf2_mod(m, f) == 0:
                return False
    return True


def find_base_modulus(w: int) -> int:
    for m in range(1 << w, 1 << (w + 1)):
        if gf2_is_irreducible(m):
            return m
    raise NoIrreducibleFound(f"no irreducible polynomial of degree {w} over GF(2)")


def _prime_factors(n: int) -> list[int]:
    out, p = [], 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


# --------------------------------------------------------------------------
# B[z] helpers on coefficient lists (constant term first)

def _ptrim(p: list[int]) -> list[int]:
    while p and p[-1] == 0:
        p.pop()
    return p


def _pdivmod(a: list[int], b: list[int], mul, inv) -> tuple[list[int], list[int]]:
    a = _ptrim(list(a))
    b = _ptrim(list(b))
    if not b:
        raise DivisionByZero("polynomial division by zero")
    q = [0] * max(len(a) - len(b) + 1, 0)
    lead_inv = inv[b[-1]]
    db = len(b) - 1
    while len(a) - 1 >= db and a:
        shift = len(a) - 1 - db
        c = mul[a[-1]][lead_inv]
        q[shift] = c
        for i, bi in enumerate(b):
            if bi:
                a[shift + i] ^= mul[c][bi]
        _ptrim(a)
    return q, a


def _pmul(a: list[int], b: list[int], mul) -> list[int]:
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            row = mul[ai]
            for j, bj in enumerate(b):
                if bj:
                    out[i + j] ^= row[bj]
    return _ptrim(out)


def _pgcd(a: list[int], b: list[int], mul, inv) -> list[int]:
    a, b = _ptrim(list(a)), _ptrim(list(b))
    while b:
        a, b = b, _pdivmod(a, b, mul, inv)[1]
    return a


def _companion_power_matrix(ext_modulus, power, mul_table, lists=None) -> np.ndarray:
    """Matrix over B of ``x -> x**power`` on B[z]/(g), for ``power`` = |B|.

    Column ``i`` holds ``(z**power)**i mod g``; this equals ``(z**i)**power``
    because raising to |B| is a ring map fixing B.
    """
    g = [int(c) for c in ext_modulus]
    Q = len(g) - 1
    mul, inv = lists or _table_lists(mul_table)
    zp, base, e = [1], [0, 1], power
    while e:
        if e & 1:
            zp = _pdivmod(_pmul(zp, base, mul), g, mul, inv)[1]
        base = _pdivmod(_pmul(base, base, mul), g, mul, inv)[1]
        e >>= 1
    cols = np.zeros((Q, Q), dtype=np.uint8)
    cur = [1]
    for i in range(Q):
        cols[: len(cur), i] = cur
        cur = _pdivmod(_pmul(cur, zp, mul), g, mul, inv)[1]
    return cols


def _bmatvec(mat: np.ndarray, x: np.ndarray, mul_table: np.ndarray) -> np.ndarray:
    return np.bitwise_xor.reduce(mul_table[mat, x[None, :]], axis=1)


def _table_lists(mul_table: np.ndarray):
    return mul_table.tolist(), _base_inverse_table(mul_table).tolist()


def ext_is_irreducible(ext_modulus, w: int, mul_table: np.ndarray, lists=None) -> bool:
    """Rabin's test for a monic polynomial over GF(2^w).

    g of degree Q is irreducible iff z^(q^Q) = z mod g and, for each prime p
    dividing Q, gcd(z^(q^(Q/p)) - z, g) = 1, where q = 2^w.
    ``lists`` optionally carries precomputed (mul, inv) tables as lists.
    """
    g = [int(c) for c in ext_modulus]
    Q = len(g) - 1
    if Q < 1 or g[-1] != 1:
        return False
    if Q == 1:
        return True
    if g[0] == 0:
        return False
    q = 1 << w
    lists = lists or _table_lists(mul_table)
    mul, inv = lists
    # no roots in B is cheap and rejects most candidates
    for x in range(q):
        acc = 0
        for c in reversed(g):
            acc = mul[acc][x] ^ c
        if acc == 0:
            return False
    frob = _companion_power_matrix(g, q, mul_table, lists)
    z = np.zeros(Q, dtype=np.uint8)
    z[1] = 1
    powers = {}
    v = z.copy()
    for j in range(1, Q + 1):
        v = _bmatvec(frob, v, mul_table)
        powers[j] = v
    if not np.array_equal(powers[Q], z):
        return False
    for p in _prime_factors(Q):
        h = [int(c) for c in powers[Q // p]]
        h[1] ^= 1
        if len(_pgcd(g, h, mul, inv)) != 1:
            return False
    return True


def _batch_reduce(full: np.ndarray, low: np.ndarray, mul_table: np.ndarray) -> np.ndarray:
    """Reduce (batch, 2Q-1) polynomials modulo the monic z^Q + low(z), one modulus per row."""
    Q = low.shape[1]
    # candidates in search order have short low parts; only that support matters
    nz = np.flatnonzero(low.any(axis=0))
    support = int(nz[-1]) + 1 if len(nz) else 0
    low = low[:, :support]
    full = full.copy()
    for deg in range(full.shape[1] - 1, Q - 1, -1):
        full[:, deg - Q:deg - Q + support] ^= mul_table[full[:, deg, None], low]
    return full[:, :Q]


def _batch_frobenius_powers(low: np.ndarray, w: int, mul_table: np.ndarray, wanted) -> dict:
    """z^(q^j) mod (z^Q + low) for each j in ``wanted``, vectorised over candidates."""
    batch, Q = low.shape
    square = mul_table[np.arange(1 << w), np.arange(1 << w)]
    v = np.zeros((batch, Q), dtype=np.uint8)
    v[:, 1] = 1
    full = np.zeros((batch, 2 * Q - 1), dtype=np.uint8)
    out = {}
    for j in range(1, max(wanted) + 1):
        for _ in range(w):
            full[:, 0::2] = square[v]
            v = _batch_reduce(full, low, mul_table)
        if j in wanted:
            out[j] = v
    return out


def _candidate_block(w: int, Q: int, high: int, m: int) -> np.ndarray:
    """All monic candidates whose digits above the lowest m equal those of ``high``.

    Rows are in search order: lower coefficients read as base-2^w digits, the
    constant term least significant.
    """
    q = 1 << w
    t = np.arange(q ** m, dtype=np.int64)
    out = np.empty((len(t), Q + 1), dtype=np.uint8)
    for i in range(m):
        out[:, i] = (t >> (w * i)) & (q - 1)
    for i in range(m, Q):
        out[:, i] = (high >> (w * (i - m))) & (q - 1)
    out[:, Q] = 1
    return out


def find_ext_modulus(w: int, Q: int, mul_table: np.ndarray) -> tuple[int, ...]:
    """Lowest monic irreducible of degree Q over GF(2^w) in the candidate order.

    Vectorised screening applies the Rabin conditions to chunks of candidates
    (no root in B first, then z^(q^Q) = z, then the gcd conditions per
    survivor in order), so the result is the same as testing candidates one
    by one.  The winner is re-checked with :func:`ext_is_irreducible`.
    """
    q = 1 << w
    if Q == 1:
        return (0, 1)
    m = 1
    while m < Q and q ** m < 4096:
        m += 1
    points = np.arange(q, dtype=np.uint8)
    mul, inv = lists = _table_lists(mul_table)
    primes = _prime_factors(Q)
    wanted = {Q} | {Q // p for p in primes}
    z = np.zeros(Q, dtype=np.uint8)
    z[1] = 1
    for high in range(q ** (Q - m)):
        block = _candidate_block(w, Q, high, m)
        block = block[block[:, 0] != 0]
        for lo in range(0, len(block), 4096):
            chunk = block[lo:lo + 4096]
            # Horner evaluation at every point of B
            acc = np.zeros((len(chunk), q), dtype=np.uint8)
            for i in range(Q, -1, -1):
                acc = mul_table[acc, points[None, :]] ^ chunk[:, i, None]
            chunk = chunk[acc.all(axis=1)]
            for s in range(0, len(chunk), 1024):
                sub = chunk[s:s + 1024]
                pw = _batch_frobenius_powers(sub[:, :Q], w, mul_table, wanted)
                for row in np.flatnonzero((pw[Q] == z).all(axis=1)):
                    g = [int(c) for c in sub[row]]
                    ok = True
                    for p in primes:
                        h = [int(c) for c in pw[Q // p][row]]
                        h[1] ^= 1
                        if len(_pgcd(g, h, mul, inv)) != 1:
                            ok = False
                            break
                    if ok and ext_is_irreducible(g, w, mul_table, lists):
                        return tuple(g)
    raise NoIrreducibleFound(f"no irreducible polynomial of degree {Q} over GF(2^{w})")


# --------------------------------------------------------------------------
# base field tables

def _base_mul_table(w: int, modulus: int) -> np.ndarray:
    size = 1 << w
    tab = np.zeros((size, size), dtype=np.uint8)
    for a in range(size):
        for b in range(a, size):
            v = _gf2_mod(_clmul(a, b), modulus)
            tab[a, b] = tab[b, a] = v
    return tab


def _base_inverse_table(mul_table: np.ndarray) -> np.ndarray:
    size = mul_table.shape[0]
    inv = np.zeros(size, dtype=np.uint8)
    rows, cols = np.nonzero(mul_table == 1)
    inv[rows] = cols
    return inv


def _multiplicative_order(x: int, mul_table: np.ndarray) -> int:
    if x == 0:
        return 0
    order, acc = 1, x
    while acc != 1:
        acc = int(mul_table[acc, x])
        order += 1
    return order


# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldTower:
    """Immutable arithmetic context; build with :func:`build_field_tower`."""

    w: int
    base_modulus: int
    Q: int
    ext_modulus: tuple[int, ...]
    gamma: int
    mul_table: np.ndarray = field(repr=False)
    inv_table: np.ndarray = field(repr=False)
    reduce_matrix: np.ndarray = field(repr=False)   # (Q-1, Q): z^(Q+t) mod g
    frobenius_matrix: np.ndarray = field(repr=False)

    @property
    def base_order(self) -> int:
        return 1 << self.w

    @property
    def params(self) -> dict:
        return {
            "w": self.w,
            "base_modulus": self.base_modulus,
            "Q": self.Q,
            "ext_modulus": list(self.ext_modulus),
            "gamma": self.gamma,
        }

    def same_as(self, other: "FieldTower") -> bool:
        return (self.w, self.base_modulus, self.ext_modulus) == (
            other.w, other.base_modulus, other.ext_modulus)

    # -- element construction ------------------------------------------------

    def zeros(self, shape=()) -> np.ndarray:
        if isinstance(shape, int):
            shape = (shape,)
        return np.zeros(tuple(shape) + (self.Q,), dtype=np.uint8)

    def one(self) -> np.ndarray:
        e = self.zeros()
        e[0] = 1
        return e

    def embed(self, b) -> np.ndarray:
        """Embed B-values (scalar or array) as constant polynomials in F."""
        b = np.asarray(b, dtype=np.uint8)
        out = np.zeros(b.shape + (self.Q,), dtype=np.uint8)
        out[..., 0] = b
        return out

    def element(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=np.uint8)
        if c.shape[-1:] != (self.Q,):
            raise ParamError(f"an extension element has exactly {self.Q} coefficients")
        if (c >> self.w).any():
            raise ParamError(f"coefficient outside GF(2^{self.w})")
        return c.copy()

    def z_power(self, i: int) -> np.ndarray:
        """The reduced element z**i."""
        out = self.one()
        for _ in range(i):
            out = self.mul_by_z(out)
        return out

    def random(self, shape=(), source=None) -> np.ndarray:
        """Uniform elements of F; ``source`` only needs a ``bytes(n)`` method."""
        if isinstance(shape, int):
            shape = (shape,)
        shape = tuple(shape) + (self.Q,)
        count = int(np.prod(shape))
        if source is None:
            source = np.random.default_rng()
        raw = np.frombuffer(source.bytes(count), dtype=np.uint8)
        # 2^w divides 256, so the low w bits of a uniform byte are uniform
        return (raw & (self.base_order - 1)).reshape(shape).copy()

    # -- base field ------------------------------------------------------------

    def base_mul(self, a, b):
        return self.mul_table[a, b]

    def base_inv(self, a):
        a = np.asarray(a)
        if (a == 0).any():
            raise DivisionByZero("inverse of zero in the base field")
        return self.inv_table[a]

    def base_pow(self, a: int, e: int) -> int:
        acc = 1
        for _ in range(e):
            acc = int(self.mul_table[acc, a])
        return acc

    # -- extension field -----------------------------------------------------

    @staticmethod
    def add(x, y):
        return np.bitwise_xor(x, y)

    sub = add

    def scale(self, b, x):
        """B-scalar(s) times F-element(s), coefficient-wise."""
        b = np.asarray(b, dtype=np.uint8)
        return self.mul_table[b[..., None], x]

    def mul_by_z(self, x):
        x = np.asarray(x, dtype=np.uint8)
        out = np.zeros_like(x)
        out[..., 1:] = x[..., :-1]
        low = np.asarray(self.ext_modulus[: self.Q], dtype=np.uint8)
        return out ^ self.mul_table[x[..., -1:], low]

    def mul(self, x, y):
        x = np.asarray(x, dtype=np.uint8)
        y = np.asarray(y, dtype=np.uint8)
        Q = self.Q
        shape = np.broadcast_shapes(x.shape, y.shape)
        full = np.zeros(shape[:-1] + (2 * Q - 1,), dtype=np.uint8)
        tab = self.mul_table
        for i in range(Q):
            xi = x[..., i:i + 1]
            full[..., i:i + Q] ^= tab[xi, y]
        return self._reduce(full)

    def _reduce(self, full):
        Q = self.Q
        low = full[..., :Q]
        if Q == 1:
            return low.copy()
        high = full[..., Q:]
        return low ^ np.bitwise_xor.reduce(
            self.mul_table[high[..., :, None], self.reduce_matrix], axis=-2)

    # -- GF(2) bit coordinates ----------------------------------------------
    #
    # Bit ``t*w + v`` of an element is bit ``v`` of its z^t coefficient.
    # Multiplication by a fixed y is GF(2)-linear, so many products against
    # the same operands reduce to one float matmul taken mod 2.

    def to_bits(self, x):
        x = np.asarray(x, dtype=np.uint8)
        bits = (x[..., None] >> np.arange(self.w, dtype=np.uint8)) & 1
        return bits.reshape(x.shape[:-1] + (self.Q * self.w,))

    def from_bits(self, b):
        b = np.asarray(b).astype(np.uint8) & 1
        b = b.reshape(b.shape[:-1] + (self.Q, self.w))
        out = b[..., 0].copy()
        for v in range(1, self.w):
            out |= b[..., v] << v
        return out

    def mul_matrix(self, y):
        """GF(2) matrix (..., in_bit, out_bit) of ``x -> x * y``."""
        y = np.asarray(y, dtype=np.uint8)
        units = (1 << np.arange(self.w)).astype(np.uint8)
        cur = self.mul_table[units[:, None], y[..., None, :]]   # (..., w, Q)
        rows = np.empty(y.shape[:-1] + (self.Q, self.w, self.Q), dtype=np.uint8)
        for t in range(self.Q):
            rows[..., t, :, :] = cur
            cur = self.mul_by_z(cur)
        wq = self.w * self.Q
        return self.to_bits(rows).reshape(y.shape[:-1] + (wq, wq))

    def outer_mul(self, x, y):
        """All products ``x[i] * y[j]`` for vectors x (m, Q), y (n, Q) -> (m, n, Q)."""
        x = np.asarray(x, dtype=np.uint8)
        y = np.asarray(y, dtype=np.uint8)
        m, n, wq = x.shape[0], y.shape[0], self.w * self.Q
        if m * n < 64:
            return self.mul(x[:, None, :], y[None, :, :])
        big = np.moveaxis(self.mul_matrix(y), 0, 1).reshape(wq, n * wq)
        prod = self.to_bits(x).astype(np.float32) @ big.astype(np.float32)
        return self.from_bits(prod.astype(np.int32).reshape(m, n, wq))

    def inv(self, x):
        """Inverse of one F element via extended Euclid over B[z]."""
        x = np.asarray(x, dtype=np.uint8)
        if x.shape != (self.Q,):
            return np.stack([self.inv(e) for e in x.reshape(-1, self.Q)]).reshape(x.shape)
        mul = self._mul_list
        inv = self._inv_list
        r0, r1 = list(self.ext_modulus), _ptrim([int(c) for c in x])
        if not r1:
            raise DivisionByZero("inverse of zero in the extension field")
        s0, s1 = [], [1]
        while len(r1) > 1:
            q, r = _pdivmod(r0, r1, mul, inv)
            r0, r1 = r1, r
            qs = _pmul(q, s1, mul)
            s_new = [0] * max(len(s0), len(qs))
            for i, c in enumerate(s0):
                s_new[i] ^= c
            for i, c in enumerate(qs):
                s_new[i] ^= c
            s0, s1 = s1, _ptrim(s_new)
        c = inv[r1[0]]
        out = np.zeros(self.Q, dtype=np.uint8)
        s1 = _pdivmod(s1, list(self.ext_modulus), mul, inv)[1]
        for i, si in enumerate(s1):
            out[i] = mul[si][c]
        return out

    def pow(self, x, e: int):
        result = np.broadcast_to(self.one(), np.shape(x)).copy()
        base = np.asarray(x, dtype=np.uint8)
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    def frobenius(self, x, i: int = 1):
        """x ** (|B| ** i), applying the precomputed B-linear map i times."""
        if i < 0:
            raise ParamError("Frobenius power must be non-negative")
        x = np.array(x, dtype=np.uint8)
        for _ in range(i):
            x = self._apply_frob(x)
        return x

    def _apply_frob(self, x):
        return np.bitwise_xor.reduce(
            self.mul_table[self.frobenius_matrix, x[..., None, :]], axis=-1)

    def is_zero(self, x):
        return ~np.asarray(x).any(axis=-1)

    @functools.cached_property
    def _mul_list(self):
        return self.mul_table.tolist()

    @functools.cached_property
    def _inv_list(self):
        return self.inv_table.tolist()


@functools.lru_cache(maxsize=None)
def build_field_tower(w: int, Q: int, base_modulus: int | None = None,
                      ext_modulus: tuple[int, ...] | None = None,
                      gamma: int | None = None) -> FieldTower:
    """Find (or check) the moduli and a primitive element; deterministic.

    When moduli are not supplied, the lowest irreducible in the search order is
    used: for B, the smallest bitmask; for F, lower coefficients read as base-2^w
    digits with the constant term least significant.
    """
    if not 1 <= w <= MAX_W:
        raise ParamError(f"base degree w must be in [1, {MAX_W}], got {w}")
    if Q < 1:
        raise ParamError(f"extension degree Q must be >= 1, got {Q}")
    if base_modulus is None:
        base_modulus = find_base_modulus(w)
    elif base_modulus.bit_length() - 1 != w or not gf2_is_irreducible(base_modulus):
        raise NotIrreducible(f"{base_modulus:#b} is not an irreducible degree-{w} polynomial")
    mul_table = _base_mul_table(w, base_modulus)
    inv_table = _base_inverse_table(mul_table)

    order = (1 << w) - 1
    if gamma is None:
        gamma = next(g for g in range(1, 1 << w)
                     if _multiplicative_order(g, mul_table) == order)
    elif not 0 < gamma < (1 << w) or _multiplicative_order(gamma, mul_table) != order:
        raise NotPrimitive(f"gamma={gamma} does not have order {order}")

    if ext_modulus is None:
        ext_modulus = find_ext_modulus(w, Q, mul_table)
    else:
        ext_modulus = tuple(int(c) for c in ext_modulus)
        if len(ext_modulus) != Q + 1 or not ext_is_irreducible(ext_modulus, w, mul_table):
            raise NotIrreducible(f"extension modulus is not irreducible of degree {Q}")

    low = np.asarray(ext_modulus[:Q], dtype=np.uint8)
    reduce_matrix = np.zeros((max(Q - 1, 0), Q), dtype=np.uint8)
    cur = low.copy()   # z^Q mod g
    for t in range(Q - 1):
        reduce_matrix[t] = cur
        top = cur[-1]
        cur = np.roll(cur, 1)
        cur[0] = 0
        cur ^= mul_table[top, low]
    frob = _companion_power_matrix(ext_modulus, 1 << w, mul_table)
    for arr in (mul_table, inv_table, reduce_matrix, frob):
        arr.setflags(write=False)
    return FieldTower(w=w, base_modulus=base_modulus, Q=Q, ext_modulus=ext_modulus,
                      gamma=gamma, mul_table=mul_table, inv_table=inv_table,
                      reduce_matrix=reduce_matrix, frobenius_matrix=frob)


def ext_add(x, y):
    return np.bitwise_xor(x, y)


def ext_mul(tower: FieldTower, x, y):
    return tower.mul(x, y)


def ext_inv(tower: FieldTower, x):
    return tower.inv(x)


def frobenius(tower: FieldTower, x, i: int = 1):
    return tower.frobenius(x, i)


# --------------------------------------------------------------------------
# linear algebra over B

def base_matmul(tower: FieldTower, A, X):
    """``A`` is (p, q) over B; ``X`` is (..., q, c); returns (..., p, c)."""
    A = np.asarray(A, dtype=np.uint8)
    X = np.asarray(X, dtype=np.uint8)
    p, q = A.shape
    if X.shape[-2] != q:
        raise ParamError(f"shape mismatch {A.shape} @ {X.shape}")
    out = np.zeros(X.shape[:-2] + (p, X.shape[-1]), dtype=np.uint8)
    tab = tower.mul_table
    for j in np.flatnonzero(A.any(axis=0)):
        out ^= tab[A[:, j, None], X[..., j:j + 1, :]]
    return out


def base_rref(tower: FieldTower, A):
    """Reduced row echelon form over B; returns (R, pivot_columns)."""
    R = np.array(A, dtype=np.uint8)
    m, n = R.shape
    tab = tower.mul_table
    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row == m:
            break
        nz = np.flatnonzero(R[row:, col])
        if nz.size == 0:
            continue
        p = row + nz[0]
        if p != row:
            R[[row, p]] = R[[p, row]]
        R[row] = tab[tower.inv_table[R[row, col]], R[row]]
        others = np.flatnonzero(R[:, col])
        others = others[others != row]
        if others.size:
            R[others] ^= tab[R[others, col][:, None], R[row][None, :]]
        pivots.append(col)
        row += 1
    return R, pivots


def base_rank(tower: FieldTower, A) -> int:
    return len(base_rref(tower, A)[1])


def base_left_solver(tower: FieldTower, A):
    """For A (m, n) of full column rank return (P, N) with P A = I and N A = 0.

    ``A x = b`` is consistent iff ``N b = 0``, and then ``x = P b``.
    """
    A = np.asarray(A, dtype=np.uint8)
    m, n = A.shape
    aug = np.concatenate([A, np.eye(m, dtype=np.uint8)], axis=1)
    R, pivots = base_rref(tower, aug)
    rank = sum(1 for p in pivots if p < n)
    if rank < n:
        raise Underdetermined(f"rank {rank} < {n} unknowns", rank, R[:rank, :n])
    return R[:n, n:], R[n:, n:]


def base_solve(tower: FieldTower, A, b):
    """Solve ``A x = b`` over B; ``b`` may carry trailing axes (e.g. Q)."""
    A = np.asarray(A, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    m = A.shape[0]
    flat = b.reshape(m, -1)
    try:
        P, N = base_left_solver(tower, A)
    except Underdetermined:
        R, piv = base_rref(tower, np.concatenate([A, flat], axis=1))
        if any(p >= A.shape[1] for p in piv):
            raise Inconsistent("inconsistent system", sum(p < A.shape[1] for p in piv))
        raise
    if N.size and base_matmul(tower, N, flat).any():
        raise Inconsistent("inconsistent system", A.shape[1])
    x = base_matmul(tower, P, flat)
    return x.reshape((A.shape[1],) + b.shape[1:])


def base_particular_solution(tower: FieldTower, A, b):
    """Some solution of ``A x = b`` (free variables set to zero)."""
    A = np.asarray(A, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    m, n = A.shape
    flat = b.reshape(m, -1)
    R, pivots = base_rref(tower, np.concatenate([A, flat], axis=1))
    rank = sum(1 for p in pivots if p < n)
    if rank < len(pivots) or R[rank:, n:].any():
        raise Inconsistent("inconsistent system", rank, R[:rank, :n])
    x = np.zeros((n, flat.shape[1]), dtype=np.uint8)
    x[pivots[:rank]] = R[:rank, n:]
    return x.reshape((n,) + b.shape[1:])


def base_inverse(tower: FieldTower, A):
    A = np.asarray(A, dtype=np.uint8)
    if A.shape[0] != A.shape[1]:
        raise ParamError("matrix is not square")
    P, _ = base_left_solver(tower, A)
    return P


# --------------------------------------------------------------------------
# linear algebra over F

def ext_matvec(tower: FieldTower, A, x):
    """``A`` is (p, q, Q) over F, ``x`` is (..., q, Q); returns (..., p, Q)."""
    A = np.asarray(A, dtype=np.uint8)
    x = np.asarray(x, dtype=np.uint8)
    p, q = A.shape[:2]
    batch = x.shape[:-2]
    xs = x.reshape((-1, q, tower.Q))
    s = xs.shape[0]
    if s * p < 64:
        out = np.zeros((s, p, tower.Q), dtype=np.uint8)
        for j in range(q):
            if A[:, j].any():
                out ^= tower.mul(A[:, j], xs[:, j:j + 1, :])
        return out.reshape(batch + (p, tower.Q))
    wq = tower.w * tower.Q
    # integer counts stay exact in float32 (q * wq << 2**24)
    acc = np.zeros((s, p * wq), dtype=np.float32)
    for j in range(q):
        col = A[:, j]
        if col.any():
            big = np.moveaxis(tower.mul_matrix(col), 0, 1).reshape(wq, p * wq)
            acc += tower.to_bits(xs[:, j]).astype(np.float32) @ big.astype(np.float32)
    out = tower.from_bits(acc.astype(np.int32).reshape(s, p, wq))
    return out.reshape(batch + (p, tower.Q))


def ext_matmul(tower: FieldTower, A, B):
    """(p, q, Q) times (q, s, Q) over F."""
    B = np.asarray(B, dtype=np.uint8)
    return np.swapaxes(ext_matvec(tower, A, np.swapaxes(B, 0, 1)), 0, 1)


def ext_rref(tower: FieldTower, A):
    """Reduced row echelon form over F of an (m, n, Q) array.

    Pivots are taken in column order, so the number of pivots falling in the
    first c columns is the rank of that leading column block.
    """
    R = np.array(A, dtype=np.uint8)
    m, n = R.shape[:2]
    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row == m:
            break
        nz = np.flatnonzero(R[row:, col].any(axis=-1))
        if nz.size == 0:
            continue
        p = row + nz[0]
        if p != row:
            R[[row, p]] = R[[p, row]]
        # rows >= row vanish on columns < col
        R[row, col:] = tower.mul(R[row, col:], tower.inv(R[row, col]))
        others = np.flatnonzero(R[:, col].any(axis=-1))
        others = others[others != row]
        if others.size:
            R[others, col:] ^= tower.outer_mul(R[others, col], R[row, col:])
        pivots.append(col)
        row += 1
    return R, pivots


def rank_over_F(tower: FieldTower, A) -> int:
    A = np.asarray(A, dtype=np.uint8)
    if A.size == 0:
        return 0
    return len(ext_rref(tower, A)[1])


def solve_linear(tower: FieldTower, A, b):
    """Unique solution of ``A x = b`` over F.

    Raises :class:`Inconsistent` or :class:`Underdetermined`, both carrying the
    rank of ``A`` and a basis of its row space.
    """
    A = np.asarray(A, dtype=np.uint8)
    b = np.asarray(b, dtype=np.uint8)
    m, n = A.shape[:2]
    if b.shape[0] != m:
        raise ParamError("right-hand side length does not match")
    aug = np.concatenate([A, b[:, None, :]], axis=1)
    R, pivots = ext_rref(tower, aug)
    rank = sum(1 for p in pivots if p < n)
    if rank < len(pivots):
        raise Inconsistent("inconsistent system", rank, R[:rank, :n])
    if rank < n:
        raise Underdetermined(f"rank {rank} < {n} unknowns", rank, R[:rank, :n])
    return R[:n, n]


def ext_inverse(tower: FieldTower, A):
    A = np.asarray(A, dtype=np.uint8)
    n = A.shape[0]
    eye = tower.embed(np.eye(n, dtype=np.uint8))
    R, pivots = ext_rref(tower, np.concatenate([A, eye], axis=1))
    rank = sum(1 for p in pivots if p < n)
    if rank < n:
        raise Underdetermined("singular matrix", rank, R[:rank, :n])
    return R[:, n:]
