from __future__ import annotations

import numpy as np
import pytest

from helpers import rand_ext
from oracles import ExtOracle
from secure_msr.errors import SingularPoints, TooManyPoints
from secure_msr.field_tower import (
    base_matmul,
    base_rank,
    build_field_tower,
    ext_matvec,
    rank_over_F,
)
from secure_msr.gabidulin import evaluation_points, invert_precode, moore_matrix, precode


def test_points(t16):
    assert np.array_equal(evaluation_points(1, t16), t16.one()[None])
    p3 = evaluation_points(3, t16)
    assert np.array_equal(p3, np.stack([t16.z_power(i) for i in range(3)]))
    assert rank_over_F(t16, moore_matrix(t16, p3)) == 3
    with pytest.raises(TooManyPoints):
        evaluation_points(17, t16)


def test_moore_small_cases(t16):
    one = t16.one()[None]
    assert np.array_equal(moore_matrix(t16, one), one[None])
    dup = np.stack([t16.one(), t16.one()])
    assert rank_over_F(t16, moore_matrix(t16, dup)) < 2
    with pytest.raises(SingularPoints):
        invert_precode(t16, dup, dup)


@pytest.mark.parametrize("fixture", ["t16", "t48"])
def test_standard_moore_full_rank(fixture, request):
    t = request.getfixturevalue(fixture)
    assert rank_over_F(t, moore_matrix(t, evaluation_points(t.Q, t))) == t.Q


def test_moore_entries_and_rank_match_oracle(t16):
    ora = ExtOracle(3, 0b1011, t16.ext_modulus)
    pts = evaluation_points(6, t16)
    mm = moore_matrix(t16, pts)
    rows = []
    for j in range(6):
        row = [ora.frob(pts[j].tolist(), i) for i in range(6)]
        assert [mm[j, i].tolist() for i in range(6)] == row
        rows.append(row)
    assert ora.rank(rows) == 6


def test_precode_examples_and_linearity(t16, rng):
    pts = evaluation_points(16, t16)
    e1 = t16.zeros(16)
    e1[0] = t16.one()
    assert np.array_equal(precode(t16, e1, pts), pts)
    e2 = t16.zeros(16)
    e2[1] = t16.one()
    assert np.array_equal(precode(t16, e2, pts), t16.frobenius(pts, 1))
    a, b = rand_ext(t16, (16,), rng), rand_ext(t16, (16,), rng)
    assert np.array_equal(precode(t16, a ^ b, pts), precode(t16, a, pts) ^ precode(t16, b, pts))
    c = t16.scale(5, a)
    assert np.array_equal(precode(t16, c, pts), t16.scale(5, precode(t16, a, pts)))


def test_round_trip_many_messages(t16, rng):
    pts = evaluation_points(16, t16)
    a = rand_ext(t16, (120, 16), rng)
    ev = precode(t16, a, pts)
    assert np.array_equal(invert_precode(t16, ev, pts), a)
    e1 = t16.zeros(16)
    e1[0] = t16.one()
    assert np.array_equal(invert_precode(t16, pts, pts), e1)


def test_truncated_inversion(t16, rng):
    M, K = 16, 5
    pts = evaluation_points(M, t16)
    # K B-independent combinations of the standard points
    while True:
        L = rng.integers(0, 8, (K, M), dtype=np.uint8)
        if base_rank(t16, L) == K:
            break
    sub = base_matmul(t16, L, pts)
    a = t16.zeros(M)
    a[:K] = rand_ext(t16, (K,), rng)
    full = precode(t16, a, pts)
    # B-linearity of m_a: its values at the combinations are the combinations of values
    ev = base_matmul(t16, L, full)
    assert np.array_equal(ev, ext_matvec(t16, moore_matrix(t16, sub, M), a))
    assert np.array_equal(invert_precode(t16, ev, sub, num_coeffs=K), a[:K])


def test_root_space_dimension_bound():
    """Kernel of m_a on F (= span of {1, z}) is a B-subspace of dim <= q-degree of m_a."""
    t = build_field_tower(3, 2)
    xs = t.element([[u, v] for u in range(8) for v in range(8)])      # all of F
    lin = xs.reshape(64, 2)
    a = lin[:, None, :]                                               # a_1 ranges over F
    x8 = t.frobenius(xs, 1)
    for a2 in lin:
        vals = t.mul(a, xs[None]) ^ t.mul(a2, x8)[None]               # (64 a_1, 64 x)
        roots = ~vals.any(axis=-1)
        for i in range(64):
            count = int(roots[i].sum())
            if not a2.any() and not lin[i].any():
                assert count == 64
                continue
            qdeg = 1 if a2.any() else 0
            assert count in {8 ** d for d in range(qdeg + 1)}
            ker = xs[roots[i]]
            # closed under addition and B-scaling
            s = {tuple(v) for v in ker}
            assert all(tuple(p ^ q) in s for p in ker for q in ker[:4])
            assert all(tuple(t.scale(b, p)) in s for p in ker for b in (2, 7))
