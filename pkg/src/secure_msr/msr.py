"""Ye–Barg MSR array code with d = n - 1 helpers.

Nodes are numbered 1..n.  A codeword is an array of shape ``(..., n, alpha, Q)``
(node ``i`` lives at index ``i - 1``).  Positions ``a`` in a node's block are
(n-k)-ary vectors (a_{n-1}, ..., a_1) with a_1 the least significant digit.

The parity checks are

    sum_{j=1}^{n-1} A_j^t c_j + c_n = 0,          t = 0, ..., n-k-1,

where ``(A_j v)[a] = lambda(j, a_j) * v[a(j, a_j + 1)]``, lambda(j, 0) = gamma^j
and lambda(j, u) = 1 otherwise.  All coefficients live in B, so every B-linear
solve is done once on B matrices and applied to F symbols coefficient-wise.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .errors import (
    DegenerateCode,
    DigitOutOfRange,
    FieldTooSmall,
    InconsistentInput,
    MissingHelper,
    ParamError,
    PlanMismatch,
    TooFewNodes,
)
from .field_tower import (
    FieldTower,
    base_left_solver,
    base_matmul,
    base_particular_solution,
    base_rank,
)


@dataclass(frozen=True, eq=False)
class CodeParams:
    n: int
    k: int
    tower: FieldTower = field(repr=False)
    lambdas: np.ndarray = field(repr=False)    # (n, r); row j holds lambda(j, .)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def r(self) -> int:
        return self.n - self.k

    @property
    def d(self) -> int:
        return self.n - 1

    @property
    def alpha(self) -> int:
        return self.r ** (self.n - 1)

    @property
    def beta(self) -> int:
        return self.alpha // self.r

    @property
    def repair_bandwidth(self) -> int:
        return (self.n - 1) * self.beta

    # -- index arithmetic ----------------------------------------------------

    @cached_property
    def digits(self) -> np.ndarray:
        """(alpha, n) table; column i (1..n-1) holds digit a_i, column 0 is unused."""
        a = np.arange(self.alpha)
        out = np.zeros((self.alpha, self.n), dtype=np.int64)
        for i in range(1, self.n):
            out[:, i] = (a // self.r ** (i - 1)) % self.r
        out.setflags(write=False)
        return out

    def index_digits(self, a: int) -> tuple[int, ...]:
        """Digits of ``a`` in the order (a_{n-1}, ..., a_1)."""
        if not 0 <= a < self.alpha:
            raise DigitOutOfRange(f"index {a} outside [0, {self.alpha})")
        return tuple(int(self.digits[a, i]) for i in range(self.n - 1, 0, -1))

    def digits_to_index(self, digits) -> int:
        digits = tuple(digits)
        if len(digits) != self.n - 1:
            raise DigitOutOfRange(f"expected {self.n - 1} digits")
        a = 0
        for dgt in digits:
            if not 0 <= dgt < self.r:
                raise DigitOutOfRange(f"digit {dgt} outside [0, {self.r})")
            a = a * self.r + dgt
        return a

    def substitute(self, a, i: int, u):
        """a(i, u): replace digit i of ``a`` by ``u`` (vectorised over a and u)."""
        a = np.asarray(a)
        return a + (np.asarray(u) - (a // self.r ** (i - 1)) % self.r) * self.r ** (i - 1)

    def lam(self, i: int, u: int) -> int:
        if not 1 <= i <= self.n - 1:
            raise ParamError(f"lambda is defined for nodes 1..{self.n - 1}")
        return int(self.lambdas[i, u % self.r])

    @cached_property
    def _powers(self):
        """src[j][t], coef[j][t] with (A_j^t v)[a] = coef[a] * v[src[a]]."""
        src: dict[tuple[int, int], np.ndarray] = {}
        coef: dict[tuple[int, int], np.ndarray] = {}
        mul = self.tower.mul_table
        a = np.arange(self.alpha)
        for j in range(1, self.n):
            aj = self.digits[:, j]
            c = np.ones(self.alpha, dtype=np.uint8)
            for t in range(self.r):
                src[j, t] = self.substitute(a, j, (aj + t) % self.r)
                coef[j, t] = c.copy()
                c = mul[c, self.lambdas[j][(aj + t) % self.r]]
        return src, coef

    # -- matrices (cached) ---------------------------------------------------

    @cached_property
    def parity_matrix(self) -> np.ndarray:
        return parity_check_matrix(self)

    @cached_property
    def encoder_matrix(self) -> np.ndarray:
        """E with c_{k+1..n} = E c_{1..k} (stacked node blocks)."""
        H = self.parity_matrix
        ka = self.k * self.alpha
        P, _ = base_left_solver(self.tower, H[:, ka:])
        return base_matmul(self.tower, P, H[:, :ka])

    @cached_property
    def generator_transpose(self) -> np.ndarray:
        """(n alpha, k alpha) over B: codeword = G^T . message."""
        ka = self.k * self.alpha
        return np.concatenate([np.eye(ka, dtype=np.uint8), self.encoder_matrix])

    def node_columns(self, nodes) -> np.ndarray:
        return np.concatenate([np.arange((i - 1) * self.alpha, i * self.alpha)
                               for i in nodes]) if nodes else np.zeros(0, dtype=np.int64)


def code_params(n: int, k: int, tower: FieldTower, lambdas=None) -> CodeParams:
    """Validate (n, k) against the tower and build the lambda table.

    ``lambdas`` overrides the table (shape (n, n-k)); used for negative controls.
    """
    if not 1 <= k < n:
        raise ParamError(f"need 1 <= k < n, got n={n}, k={k}")
    if n - k < 2:
        raise DegenerateCode(f"n - k = {n - k}: repair degenerates and no secrecy is possible")
    if tower.base_order < n + 1:
        raise FieldTooSmall(f"|B| = {tower.base_order} < n + 1 = {n + 1}")
    r = n - k
    if lambdas is None:
        lambdas = np.ones((n, r), dtype=np.uint8)
        lambdas[0, :] = 0
        for i in range(1, n):
            lambdas[i, 0] = tower.base_pow(tower.gamma, i)
    else:
        lambdas = np.array(lambdas, dtype=np.uint8)
        if lambdas.shape != (n, r):
            raise ParamError(f"lambda table must have shape {(n, r)}")
    lambdas.setflags(write=False)
    return CodeParams(n=n, k=k, tower=tower, lambdas=lambdas)


def lambda_coeff(params: CodeParams, i: int, u: int) -> int:
    return params.lam(i, u)


def apply_block_power(params: CodeParams, j: int, t: int, v):
    """(A_j^t v) for a block ``v`` of shape (..., alpha, Q)."""
    if not 1 <= j <= params.n - 1:
        raise ParamError(f"A_j exists for j in 1..{params.n - 1}")
    if not 0 <= t < params.r:
        raise ParamError(f"power must be in [0, {params.r})")
    src, coef = params._powers
    v = np.asarray(v, dtype=np.uint8)
    return params.tower.mul_table[coef[j, t][:, None], v[..., src[j, t], :]]


def apply_parity(params: CodeParams, c):
    """Syndrome of shape (..., n-k, alpha, Q); zero iff ``c`` is a codeword."""
    c = np.asarray(c, dtype=np.uint8)
    if c.shape[-3:-1] != (params.n, params.alpha):
        raise ParamError(f"codeword must have shape (..., {params.n}, {params.alpha}, Q)")
    rows = []
    for t in range(params.r):
        acc = c[..., params.n - 1, :, :].copy()
        for j in range(1, params.n):
            acc ^= apply_block_power(params, j, t, c[..., j - 1, :, :])
        rows.append(acc)
    return np.stack(rows, axis=-3)


def block_matrix(params: CodeParams, i: int) -> np.ndarray:
    """Dense A_i = sum_a lambda(i, a_i) e_a e_{a(i, a_i + 1)}^T."""
    A = np.zeros((params.alpha, params.alpha), dtype=np.uint8)
    for a in range(params.alpha):
        ai = int(params.digits[a, i])
        b = int(params.substitute(a, i, (ai + 1) % params.r))
        A[a, b] ^= params.lambdas[i, ai]
    return A


def parity_check_matrix(params: CodeParams) -> np.ndarray:
    """The (n-k) alpha x n alpha parity check matrix over B."""
    alpha, r, n = params.alpha, params.r, params.n
    eye = np.eye(alpha, dtype=np.uint8)
    H = np.zeros((r * alpha, n * alpha), dtype=np.uint8)
    for j in range(1, n):
        A = block_matrix(params, j)
        P = eye
        for t in range(r):
            H[t * alpha:(t + 1) * alpha, (j - 1) * alpha:j * alpha] = P
            P = base_matmul(params.tower, A, P)
    for t in range(r):
        H[t * alpha:(t + 1) * alpha, (n - 1) * alpha:] = eye
    return H


# --------------------------------------------------------------------------
# encode / decode

def encode_systematic(params: CodeParams, message):
    """Nodes 1..k carry ``message`` (shape (..., k, alpha, Q)); the rest satisfy Hc = 0."""
    message = np.asarray(message, dtype=np.uint8)
    if message.shape[-3:-1] != (params.k, params.alpha):
        raise ParamError(f"message must have shape (..., {params.k}, {params.alpha}, Q)")
    batch = message.shape[:-3]
    Q = message.shape[-1]
    flat = message.reshape(batch + (params.k * params.alpha, Q))
    parity = base_matmul(params.tower, params.encoder_matrix, flat)
    out = np.concatenate([flat, parity], axis=-2)
    return out.reshape(batch + (params.n, params.alpha, Q))


def _decoder(params: CodeParams, known: tuple[int, ...]):
    key = ("decode", known)
    if key not in params._cache:
        unknown = tuple(i for i in range(1, params.n + 1) if i not in known)
        H = params.parity_matrix
        P, N = base_left_solver(params.tower, H[:, params.node_columns(unknown)])
        params._cache[key] = (unknown, P, N, H[:, params.node_columns(known)])
    return params._cache[key]


def decode_erasures(params: CodeParams, known: Mapping[int, np.ndarray]):
    """Rebuild the full codeword from at least k node blocks."""
    nodes = tuple(sorted(known))
    if any(not 1 <= i <= params.n for i in nodes):
        raise ParamError(f"node ids must be in 1..{params.n}")
    if len(nodes) < params.k:
        raise TooFewNodes(f"need {params.k} nodes, got {len(nodes)}")
    blocks = [np.asarray(known[i], dtype=np.uint8) for i in nodes]
    shape = blocks[0].shape
    if any(b.shape != shape for b in blocks) or shape[-2] != params.alpha:
        raise ParamError("node blocks must share the shape (..., alpha, Q)")
    unknown, P, N, H_known = _decoder(params, nodes)
    batch, Q = shape[:-2], shape[-1]
    c_known = np.concatenate(blocks, axis=-2)
    rhs = base_matmul(params.tower, H_known, c_known)
    if N.size and base_matmul(params.tower, N, rhs).any():
        raise InconsistentInput("node blocks are not consistent with any codeword")
    out = np.zeros(batch + (params.n, params.alpha, Q), dtype=np.uint8)
    for i, b in zip(nodes, blocks):
        out[..., i - 1, :, :] = b
    if unknown:
        sol = base_matmul(params.tower, P, rhs)
        sol = sol.reshape(batch + (len(unknown), params.alpha, Q))
        for pos, i in enumerate(unknown):
            out[..., i - 1, :, :] = sol[..., pos, :, :]
    return out


# --------------------------------------------------------------------------
# repair

@dataclass(frozen=True, eq=False)
class RepairPlan:
    """What each helper sends when ``failed`` is rebuilt, and how to combine it.

    Entry ``s`` of the schedule solves parity row (row_power[s], row_index[s])
    for the unknown symbol at ``positions[s]``, whose coefficient in that row is
    ``unknown_coef[s]``.  ``terms[j]`` gives, per schedule entry, the slot into
    helper j's transmitted symbols and its coefficient.
    """

    failed: int
    helpers: tuple[int, ...]
    indices: Mapping[int, np.ndarray]
    positions: np.ndarray
    row_power: np.ndarray
    row_index: np.ndarray
    unknown_coef: np.ndarray
    terms: Mapping[int, tuple[np.ndarray, np.ndarray]] = field(repr=False)

    @property
    def symbols_per_helper(self) -> dict[int, int]:
        return {j: len(idx) for j, idx in self.indices.items()}

    @property
    def total_symbols(self) -> int:
        return sum(len(idx) for idx in self.indices.values())


def repair_indices(params: CodeParams, failed: int) -> np.ndarray:
    """Positions every helper sends when node ``failed`` is rebuilt."""
    if not 1 <= failed <= params.n:
        raise ParamError(f"node ids must be in 1..{params.n}")
    if failed < params.n:
        mask = params.digits[:, failed] == 0
    else:
        mask = params.digits[:, 1:].sum(axis=1) % params.r == 0
    return np.flatnonzero(mask)


def repair_plan(params: CodeParams, failed: int) -> RepairPlan:
    key = ("plan", failed)
    if key in params._cache:
        return params._cache[key]
    n, r, alpha = params.n, params.r, params.alpha
    idx = repair_indices(params, failed)
    helpers = tuple(j for j in range(1, n + 1) if j != failed)
    slot_of = np.full(alpha, -1, dtype=np.int64)
    slot_of[idx] = np.arange(len(idx))
    src, coef = params._powers
    if failed < n:
        row_index = np.repeat(idx, r)
        row_power = np.tile(np.arange(r), len(idx))
        positions = params.substitute(row_index, failed, row_power)
        # telescoped lambda product; gamma^failed for t >= 1 under the default table
        c_fail = np.stack([coef[failed, t] for t in range(r)])
        unknown_coef = c_fail[row_power, row_index]
    else:
        row_index = np.arange(alpha)
        row_power = (-params.digits[:, 1:].sum(axis=1)) % r
        positions = row_index.copy()
        unknown_coef = np.ones(alpha, dtype=np.uint8)
    terms = {}
    for j in helpers:
        if j == n:
            slots, cf = slot_of[row_index], np.ones(len(row_index), dtype=np.uint8)
        else:
            s_all = np.stack([src[j, t] for t in range(r)])
            c_all = np.stack([coef[j, t] for t in range(r)])
            slots = slot_of[s_all[row_power, row_index]]
            cf = c_all[row_power, row_index]
        if (slots < 0).any():
            raise AssertionError("repair equation references a symbol that is not sent")
        terms[j] = (slots, cf)
    assert np.array_equal(np.sort(positions), np.arange(alpha))
    plan = RepairPlan(failed=failed, helpers=helpers, indices={j: idx for j in helpers},
                      positions=positions, row_power=row_power, row_index=row_index,
                      unknown_coef=unknown_coef, terms=terms)
    params._cache[key] = plan
    return plan


def helper_symbols(params: CodeParams, codeword, failed: int) -> dict[int, np.ndarray]:
    """What each helper transmits for the repair of ``failed``."""
    plan = repair_plan(params, failed)
    c = np.asarray(codeword)
    return {j: c[..., j - 1, plan.indices[j], :] for j in plan.helpers}


def _check_helpers(params: CodeParams, plan: RepairPlan, helper_data) -> list[np.ndarray]:
    missing = [j for j in plan.helpers if j not in helper_data]
    if missing:
        raise MissingHelper(f"no data from helper(s) {missing}; repair requires all d = n - 1")
    extra = [j for j in helper_data if j not in plan.helpers]
    if extra:
        raise PlanMismatch(f"unexpected data from node(s) {extra}")
    data = []
    for j in plan.helpers:
        arr = np.asarray(helper_data[j], dtype=np.uint8)
        if arr.ndim < 2 or arr.shape[-2] != len(plan.indices[j]):
            raise PlanMismatch(f"helper {j} sent {arr.shape[-2] if arr.ndim >= 2 else arr.shape}"
                               f" symbols, plan expects {len(plan.indices[j])}")
        data.append(arr)
    return data


def repair(params: CodeParams, failed: int, helper_data: Mapping[int, np.ndarray]):
    """Rebuild node ``failed`` from exactly beta symbols per helper."""
    plan = repair_plan(params, failed)
    data = _check_helpers(params, plan, helper_data)
    mul = params.tower.mul_table
    acc = None
    for j, arr in zip(plan.helpers, data):
        slots, cf = plan.terms[j]
        term = mul[cf[:, None], arr[..., slots, :]]
        acc = term if acc is None else acc ^ term
    out = np.empty(acc.shape, dtype=np.uint8)
    inv = params.tower.inv_table[plan.unknown_coef]
    out[..., plan.positions, :] = mul[inv[:, None], acc]
    return out


def repair_by_solve(params: CodeParams, failed: int, helper_data: Mapping[int, np.ndarray]):
    """Generic repair: express the lost block through the downloads by elimination.

    Independent of the closed-form recovery equations used by :func:`repair`.
    """
    plan = repair_plan(params, failed)
    data = _check_helpers(params, plan, helper_data)
    Gt = params.generator_transpose
    rows = np.concatenate([(j - 1) * params.alpha + plan.indices[j] for j in plan.helpers])
    D = Gt[rows]                               # downloads = D . message
    T = Gt[params.node_columns([failed])]      # lost block = T . message
    key = ("repair_solve", failed)
    if key not in params._cache:
        # find X with X D = T, i.e. D^T X^T = T^T
        params._cache[key] = base_particular_solution(params.tower, D.T, T.T).T
    X = params._cache[key]
    downloads = np.concatenate(data, axis=-2)
    return base_matmul(params.tower, X, downloads)


# --------------------------------------------------------------------------

@dataclass
class MDSReport:
    n: int
    k: int
    subsets: list[tuple[tuple[int, ...], int, bool]]

    @property
    def ok(self) -> bool:
        return all(ok for _, _, ok in self.subsets)

    @property
    def failures(self) -> list[tuple[int, ...]]:
        return [s for s, _, ok in self.subsets if not ok]


def mds_verify(params: CodeParams) -> MDSReport:
    """Check that every k-subset of nodes determines the codeword."""
    H = params.parity_matrix
    need = params.r * params.alpha
    results = []
    for known in itertools.combinations(range(1, params.n + 1), params.k):
        erased = [i for i in range(1, params.n + 1) if i not in known]
        rank = base_rank(params.tower, H[:, params.node_columns(erased)])
        results.append((known, rank, rank == need))
    return MDSReport(n=params.n, k=params.k, subsets=results)
