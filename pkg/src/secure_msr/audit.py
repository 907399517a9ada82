"""Exact secrecy audit against an (l1, l2)-eavesdropper.

Every symbol the eavesdropper sees is a codeword symbol, hence a B-linear
function of the precoded vector f, hence (through the Moore map) an F-linear
function of a = (r, f_s).  Writing the observations as ``A r + B f_s`` with a
uniform pad r, the observations carry no information about f_s exactly when
the column space of B lies inside that of A, i.e. rank [A | B] = rank A.
"""

from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetTooLarge, NoValidR, ParamError
from .field_tower import base_matmul, ext_matvec, ext_rref
from .gabidulin import invert_precode, moore_matrix
from .msr import repair, repair_plan
from .scheme import SchemeParams, download_set

STORED = "stored"
REPAIR = "repair"


@dataclass(frozen=True)
class EavesdropperSpec:
    E1: frozenset
    E2: frozenset

    def __init__(self, E1=(), E2=()):
        object.__setattr__(self, "E1", frozenset(E1))
        object.__setattr__(self, "E2", frozenset(E2))

    def validate(self, n: int, ell1: int | None = None, ell2: int | None = None):
        if self.E1 & self.E2:
            raise ParamError("storage- and download-eavesdropped sets must be disjoint")
        if any(not 1 <= i <= n for i in self.E1 | self.E2):
            raise ParamError(f"node ids must be in 1..{n}")
        if ell1 is not None and len(self.E1) != ell1:
            raise ParamError(f"|E1| = {len(self.E1)} != {ell1}")
        if ell2 is not None and len(self.E2) != ell2:
            raise ParamError(f"|E2| = {len(self.E2)} != {ell2}")
        return self

    def to_dict(self) -> dict:
        return {"E1": sorted(self.E1), "E2": sorted(self.E2)}


@dataclass(frozen=True)
class Observation:
    source: str       # STORED or REPAIR
    node: int         # node whose symbol c_{node, index} is seen
    index: int
    target: int | None = None   # node under repair, for REPAIR rows


def observation_labels(spec: EavesdropperSpec, scheme: SchemeParams) -> list[Observation]:
    code = scheme.code
    labels = [Observation(STORED, i, a) for i in sorted(spec.E1) for a in range(code.alpha)]
    for i in sorted(spec.E2):
        plan = repair_plan(code, i)
        for j in plan.helpers:
            labels.extend(Observation(REPAIR, j, int(a), i) for a in plan.indices[j])
    return labels


@dataclass(eq=False)
class ObservationMatrix:
    labels: list[Observation]
    functional: np.ndarray    # (rows, M) over B: observation = functional . f
    pad_part: np.ndarray      # A, (rows, M - Ms, Q)
    secret_part: np.ndarray   # B, (rows, Ms, Q)

    @property
    def rows(self) -> int:
        return len(self.labels)


def _symbol_rows(scheme: SchemeParams, labels) -> np.ndarray:
    alpha = scheme.code.alpha
    return np.array([(o.node - 1) * alpha + o.index for o in labels], dtype=np.int64)


def observation_matrix(spec: EavesdropperSpec, scheme: SchemeParams,
                       generator_transpose=None) -> ObservationMatrix:
    """The eavesdropper's view as a linear map on (pad, secret).

    ``generator_transpose`` (n alpha x M over B) replaces the systematic
    generator, e.g. to check that verdicts do not depend on that choice.
    """
    spec.validate(scheme.n)
    Gt = scheme.code.generator_transpose if generator_transpose is None else generator_transpose
    labels = observation_labels(spec, scheme)
    L = np.asarray(Gt, dtype=np.uint8)[_symbol_rows(scheme, labels)]
    M, Q = scheme.M, scheme.Q
    # B-matrix applied to the F-valued Moore matrix, coefficient-wise
    full = base_matmul(scheme.tower, L, scheme.moore.reshape(M, M * Q)).reshape(len(labels), M, Q)
    return ObservationMatrix(labels=labels, functional=L,
                             pad_part=full[:, :scheme.pad_size],
                             secret_part=full[:, scheme.pad_size:])


def observe(spec: EavesdropperSpec, scheme: SchemeParams, codeword) -> np.ndarray:
    """The symbols the eavesdropper actually sees on one execution."""
    labels = observation_labels(spec, scheme)
    c = np.asarray(codeword)
    nodes = np.array([o.node - 1 for o in labels], dtype=np.int64)
    idx = np.array([o.index for o in labels], dtype=np.int64)
    return c[..., nodes, idx, :]


# --------------------------------------------------------------------------

@dataclass
class EntropyBudget:
    spec: EavesdropperSpec
    R: tuple[int, ...]
    stored_symbols: int
    download_sizes: dict[int, int]
    budget: int
    target: int

    @property
    def equal(self) -> bool:
        return self.budget == self.target

    def to_dict(self) -> dict:
        return {"R": list(self.R), "stored_symbols": self.stored_symbols,
                "download_sizes": {str(j): s for j, s in self.download_sizes.items()},
                "budget": self.budget, "target": self.target, "equal": self.equal}


def canonical_R(spec: EavesdropperSpec, scheme: SchemeParams) -> tuple[int, ...]:
    size = scheme.k - len(spec.E1) - len(spec.E2)
    eligible = [j for j in range(1, scheme.n + 1) if j not in spec.E1 | spec.E2]
    if size < 0 or len(eligible) < size:
        raise NoValidR(f"cannot pick {size} nodes outside E1 and E2")
    return tuple(eligible[:size])


def entropy_budget(spec: EavesdropperSpec, scheme: SchemeParams) -> EntropyBudget:
    """(l1 + l2) alpha + sum_{j in R} |D_{j, E2}|, to be compared with M - Ms."""
    R = canonical_R(spec, scheme)
    alpha = scheme.code.alpha
    sizes = {j: download_set(scheme.code, j, spec.E2)[1] for j in R}
    stored = (len(spec.E1) + len(spec.E2)) * alpha
    return EntropyBudget(spec=spec, R=R, stored_symbols=stored, download_sizes=sizes,
                         budget=stored + sum(sizes.values()), target=scheme.pad_size)


@dataclass
class AuditVerdict:
    spec: EavesdropperSpec
    secure: bool
    rank_A: int
    rank_AB: int
    observed_symbol_count: int
    entropy_budget: EntropyBudget
    witness: dict | None = None
    seconds: float = 0.0

    def to_dict(self) -> dict:
        out = {**self.spec.to_dict(), "secure": self.secure, "rank_A": self.rank_A,
               "rank_AB": self.rank_AB, "observed_symbol_count": self.observed_symbol_count,
               "entropy_budget": self.entropy_budget.to_dict(),
               "seconds": round(self.seconds, 4)}
        if self.witness is not None:
            out["witness"] = {"secret_column": self.witness["secret_column"],
                              "support_rows": self.witness["support_rows"]}
        return out


def _leak_witness(scheme: SchemeParams, obs: ObservationMatrix) -> dict:
    """A row combination u with u A = 0 and u B != 0.

    u . observations = (u B) . secret is then computable by the eavesdropper.
    """
    tower = scheme.tower
    rows, pad = obs.rows, scheme.pad_size
    eye = tower.embed(np.eye(rows, dtype=np.uint8))
    R, pivots = ext_rref(tower, np.concatenate([obs.pad_part, obs.secret_part, eye], axis=1))
    for r in range(len(pivots)):
        if pad <= pivots[r] < scheme.M and not R[r, :pad].any():
            u = R[r, scheme.M:]
            return {"functional": u, "secret_functional": R[r, pad:scheme.M],
                    "secret_column": int(pivots[r] - pad),
                    "support_rows": [int(i) for i in np.flatnonzero(u.any(axis=-1))]}
    raise AssertionError("rank condition failed but no leaking functional found")


def is_secure(spec: EavesdropperSpec, scheme: SchemeParams, generator_transpose=None,
              with_witness: bool = True) -> AuditVerdict:
    start = time.perf_counter()
    obs = observation_matrix(spec, scheme, generator_transpose)
    _, pivots = ext_rref(scheme.tower, np.concatenate([obs.pad_part, obs.secret_part], axis=1))
    rank_AB = len(pivots)
    rank_A = sum(1 for p in pivots if p < scheme.pad_size)
    secure = rank_A == rank_AB
    witness = _leak_witness(scheme, obs) if (not secure and with_witness) else None
    return AuditVerdict(spec=spec, secure=secure, rank_A=rank_A, rank_AB=rank_AB,
                        observed_symbol_count=obs.rows,
                        entropy_budget=entropy_budget(spec, scheme), witness=witness,
                        seconds=time.perf_counter() - start)


def eavesdropper_placements(n: int, ell1: int, ell2: int):
    for E1 in itertools.combinations(range(1, n + 1), ell1):
        rest = [i for i in range(1, n + 1) if i not in E1]
        for E2 in itertools.combinations(rest, ell2):
            yield EavesdropperSpec(E1, E2)


@dataclass
class AuditReport:
    n: int
    k: int
    ell1: int
    ell2: int
    Ms: int
    M: int
    verdicts: list[AuditVerdict] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def secure(self) -> bool:
        # fails closed: an empty sweep is not a pass
        return bool(self.verdicts) and all(v.secure for v in self.verdicts)

    @property
    def insecure(self) -> list[AuditVerdict]:
        return [v for v in self.verdicts if not v.secure]

    def to_dict(self) -> dict:
        return {
            "n": self.n, "k": self.k, "ell1": self.ell1, "ell2": self.ell2,
            "M": self.M, "Ms": self.Ms,
            "pairs": len(self.verdicts),
            "secure_pairs": len(self.verdicts) - len(self.insecure),
            "insecure_pairs": len(self.insecure),
            "secure": self.secure,
            "budget_equal_all": all(v.entropy_budget.equal for v in self.verdicts),
            "note": "only disjoint (E1, E2) are swept; a node in both sets adds nothing, "
                    "since its stored block is a function of its repair downloads",
            "seconds": round(self.seconds, 3),
            "verdicts": [v.to_dict() for v in self.verdicts],
        }


def audit_sweep(ell1: int, ell2: int, scheme: SchemeParams, workers: int = 1) -> AuditReport:
    """Verdicts for every disjoint placement with |E1| = ell1, |E2| = ell2."""
    if ell1 < 0 or ell2 < 0 or ell1 + ell2 >= scheme.k:
        raise BudgetTooLarge(f"need 0 <= ell1, ell2 and ell1 + ell2 < k = {scheme.k}")
    start = time.perf_counter()
    specs = list(eavesdropper_placements(scheme.n, ell1, ell2))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            verdicts = list(pool.map(lambda s: is_secure(s, scheme), specs))
    else:
        verdicts = [is_secure(s, scheme) for s in specs]
    return AuditReport(n=scheme.n, k=scheme.k, ell1=ell1, ell2=ell2, Ms=scheme.Ms, M=scheme.M,
                       verdicts=verdicts, seconds=time.perf_counter() - start)


# --------------------------------------------------------------------------

def recover_pad(spec: EavesdropperSpec, scheme: SchemeParams, codeword, secret) -> np.ndarray:
    """Rebuild the pad from what the eavesdropper sees plus the secret.

    Uses the stored blocks of E1, the E2 blocks rebuilt from their repair
    downloads, and the downloads D_{j, E2} for j in the canonical R: exactly
    M - Ms evaluations of m_a at B-independent points.  Removing the secret's
    contribution leaves evaluations of m_r, which a truncated Moore solve
    inverts.
    """
    code, tower = scheme.code, scheme.tower
    c = np.asarray(codeword, dtype=np.uint8)
    seen = observe(spec, scheme, c)
    labels = observation_labels(spec, scheme)
    value = {}
    for o, v in zip(labels, seen):
        value[o.node, o.index] = v
    for i in sorted(spec.E2):
        plan = repair_plan(code, i)
        sent = {j: np.stack([value[j, int(a)] for a in plan.indices[j]]) for j in plan.helpers}
        block = repair(code, i, sent)
        for a in range(code.alpha):
            value[i, a] = block[a]
    keys = [(i, a) for i in sorted(spec.E1 | spec.E2) for a in range(code.alpha)]
    for j in canonical_R(spec, scheme):
        keys.extend((j, int(a)) for a in download_set(code, j, spec.E2)[0])
    if len(keys) != scheme.pad_size:
        raise NoValidR(f"{len(keys)} evaluations for a pad of {scheme.pad_size}")
    L = code.generator_transpose[[(i - 1) * code.alpha + a for i, a in keys]]
    points = base_matmul(tower, L, scheme.points)
    evals = np.stack([value[key] for key in keys])
    secret_cols = moore_matrix(tower, points, scheme.M)[:, scheme.pad_size:]
    evals = evals ^ ext_matvec(tower, secret_cols, np.asarray(secret, dtype=np.uint8))
    return invert_precode(tower, evals, points, num_coeffs=scheme.pad_size)
