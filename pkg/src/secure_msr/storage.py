"""Shard files: header format, byte chunking, and the encode/repair/decode pipeline.

Layout of one shard file (integers little-endian)::

    "SMSR" | version | n k ell1 ell2 node | w | base_modulus:u16 | Q:u16
    | ext_modulus (Q+1 bytes, constant term first) | stripe_count:u32
    | payload_byte_length:u64 | pad_seed_commitment (32 bytes)
    | stripe_count * alpha * Q payload bytes, stripe-major

Each node's shard lives in ``<out_dir>/node<i>/shard.smsr``.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import (
    CorruptShard,
    HeaderMismatch,
    InconsistentInput,
    MissingHelperShard,
    ParamError,
    TooFewShards,
)
from .field_tower import FieldTower, build_field_tower
from .msr import decode_erasures, repair, repair_plan
from .scheme import SchemeParams, default_tower, recover_message, scheme_params, secure_encode

MAGIC = b"SMSR"
VERSION = 1
SHARD_NAME = "shard.smsr"
STRIPE_BATCH = 256

_PREFIX = struct.Struct("<4sB5BBHH")
_SUFFIX = struct.Struct("<IQ32s")


@dataclass(frozen=True)
class ShardHeader:
    n: int
    k: int
    ell1: int
    ell2: int
    node_index: int
    w: int
    base_modulus: int
    Q: int
    ext_modulus: tuple[int, ...]
    stripe_count: int
    payload_byte_length: int
    pad_seed_commitment: bytes = bytes(32)

    @property
    def size(self) -> int:
        return _PREFIX.size + self.Q + 1 + _SUFFIX.size

    def pack(self) -> bytes:
        return (_PREFIX.pack(MAGIC, VERSION, self.n, self.k, self.ell1, self.ell2,
                             self.node_index, self.w, self.base_modulus, self.Q)
                + bytes(self.ext_modulus)
                + _SUFFIX.pack(self.stripe_count, self.payload_byte_length,
                               self.pad_seed_commitment))

    @classmethod
    def read(cls, stream) -> "ShardHeader":
        head = stream.read(_PREFIX.size)
        if len(head) != _PREFIX.size:
            raise CorruptShard("file too short for a shard header")
        magic, version, n, k, l1, l2, node, w, bmod, Q = _PREFIX.unpack(head)
        if magic != MAGIC:
            raise CorruptShard(f"bad magic {magic!r}")
        if version != VERSION:
            raise CorruptShard(f"unsupported shard version {version}")
        rest = stream.read(Q + 1 + _SUFFIX.size)
        if len(rest) != Q + 1 + _SUFFIX.size:
            raise CorruptShard("truncated shard header")
        ext = tuple(rest[:Q + 1])
        stripes, length, commit = _SUFFIX.unpack(rest[Q + 1:])
        if not 1 <= node <= n:
            raise CorruptShard(f"node index {node} outside 1..{n}")
        return cls(n, k, l1, l2, node, w, bmod, Q, ext, stripes, length, commit)

    def shared(self) -> "ShardHeader":
        """Everything that must agree across the shards of one file."""
        return replace(self, node_index=0)


def shard_path(out_dir, node: int) -> Path:
    return Path(out_dir) / f"node{node}" / SHARD_NAME


def seed_commitment(seed: int | None) -> bytes:
    if seed is None:
        return bytes(32)
    return hashlib.sha256(str(int(seed)).encode()).digest()


# --------------------------------------------------------------------------
# chunking

def symbol_payload_bytes(tower: FieldTower) -> int:
    return (tower.Q * tower.w) // 8


def stripe_capacity(scheme: SchemeParams) -> int:
    return scheme.Ms * symbol_payload_bytes(scheme.tower)


def chunk_file(data: bytes, scheme: SchemeParams) -> np.ndarray:
    """Secret stripes (S, Ms, Q); at least one stripe, the last zero-padded."""
    tower = scheme.tower
    per_sym = symbol_payload_bytes(tower)
    if per_sym == 0:
        raise ParamError(f"Q * w = {tower.Q * tower.w} bits cannot carry a payload byte")
    cap = stripe_capacity(scheme)
    stripes = max(1, -(-len(data) // cap))
    buf = np.zeros(stripes * cap, dtype=np.uint8)
    buf[:len(data)] = np.frombuffer(data, dtype=np.uint8)
    bits = np.unpackbits(buf.reshape(stripes, scheme.Ms, per_sym), axis=-1, bitorder="little")
    full = np.zeros((stripes, scheme.Ms, tower.Q * tower.w), dtype=np.uint8)
    full[..., :bits.shape[-1]] = bits
    full = full.reshape(stripes, scheme.Ms, tower.Q, tower.w)
    weights = (1 << np.arange(tower.w)).astype(np.uint8)
    return (full * weights).sum(axis=-1, dtype=np.uint8)


def unchunk(stripes, length: int, scheme: SchemeParams) -> bytes:
    tower = scheme.tower
    per_sym = symbol_payload_bytes(tower)
    s = np.asarray(stripes, dtype=np.uint8)
    bits = (s[..., None] >> np.arange(tower.w, dtype=np.uint8)) & 1
    bits = bits.reshape(s.shape[:-1] + (tower.Q * tower.w,))[..., :8 * per_sym]
    data = np.packbits(bits, axis=-1, bitorder="little").tobytes()
    if length > len(data):
        raise CorruptShard(f"header claims {length} bytes, stripes hold {len(data)}")
    return data[:length]


# --------------------------------------------------------------------------
# reading shards

def scheme_from_header(h: ShardHeader) -> SchemeParams:
    tower = build_field_tower(h.w, h.Q, base_modulus=h.base_modulus, ext_modulus=h.ext_modulus)
    return scheme_params(h.n, h.k, h.ell1, h.ell2, tower)


@dataclass
class ShardSet:
    header: ShardHeader            # node_index zeroed
    scheme: SchemeParams
    paths: dict[int, Path]
    root: Path

    def payload(self, node: int) -> np.ndarray:
        """Read-only view (stripes, alpha, Q) of one shard's payload."""
        h = self.header
        return np.memmap(self.paths[node], dtype=np.uint8, mode="r", offset=h.size,
                         shape=(h.stripe_count, self.scheme.code.alpha, h.Q))


def read_shards(shard_dir) -> ShardSet:
    root = Path(shard_dir)
    files = sorted(root.rglob("*.smsr"))
    if not files:
        raise TooFewShards(f"no shard files under {root}")
    headers = {}
    for path in files:
        with open(path, "rb") as fh:
            h = ShardHeader.read(fh)
        if h.node_index in headers:
            raise HeaderMismatch(f"node {h.node_index} appears twice: {headers[h.node_index][1]}"
                                 f" and {path}")
        headers[h.node_index] = (h, path)
    shared = {h.shared() for h, _ in headers.values()}
    if len(shared) != 1:
        raise HeaderMismatch("shards disagree on file parameters")
    common = shared.pop()
    try:
        scheme = scheme_from_header(common)
    except Exception as exc:
        raise CorruptShard(f"header parameters do not describe a valid scheme: {exc}") from exc
    expected = common.size + common.stripe_count * scheme.code.alpha * common.Q
    for node, (h, path) in headers.items():
        actual = path.stat().st_size
        if actual != expected:
            raise CorruptShard(f"shard {node} is {actual} bytes, expected {expected}")
    return ShardSet(common, scheme, {node: p for node, (_, p) in headers.items()}, root)


def _check_symbols(shards: ShardSet, node: int, block: np.ndarray) -> np.ndarray:
    if int(block.max(initial=0)) >= shards.scheme.tower.base_order:
        raise CorruptShard(f"shard {node} holds a byte outside the base field")
    return np.asarray(block)


# --------------------------------------------------------------------------
# pipeline

def _random_source(seed):
    if seed is None:
        return None            # secure_encode falls back to OS entropy
    return np.random.default_rng(seed)


def encode_file(path, out_dir, n: int, k: int, ell1: int, ell2: int, *, w: int | None = None,
                Q: int | None = None, seed: int | None = None,
                batch: int = STRIPE_BATCH) -> list[Path]:
    """Write one shard per node; returns the shard paths in node order."""
    data = Path(path).read_bytes()
    scheme = scheme_params(n, k, ell1, ell2, default_tower(n, k, w, Q))
    tower = scheme.tower
    secrets = chunk_file(data, scheme)
    header = ShardHeader(
        n=n, k=k, ell1=ell1, ell2=ell2, node_index=1, w=tower.w,
        base_modulus=tower.base_modulus, Q=tower.Q, ext_modulus=tuple(tower.ext_modulus),
        stripe_count=len(secrets), payload_byte_length=len(data),
        pad_seed_commitment=seed_commitment(seed))
    paths = [shard_path(out_dir, i) for i in range(1, n + 1)]
    source = _random_source(seed)
    handles = []
    try:
        for i, p in enumerate(paths, start=1):
            p.parent.mkdir(parents=True, exist_ok=True)
            fh = open(p, "wb")
            handles.append(fh)
            fh.write(replace(header, node_index=i).pack())
        for lo in range(0, len(secrets), batch):
            cw = secure_encode(scheme, secrets[lo:lo + batch], source)
            for i, fh in enumerate(handles):
                fh.write(np.ascontiguousarray(cw[:, i]).tobytes())
    finally:
        for fh in handles:
            fh.close()
    return paths


def decode_file(shard_dir, out_path, nodes=None, batch: int = STRIPE_BATCH) -> bytes:
    """Rebuild the original file from the shards present (or the subset ``nodes``)."""
    shards = read_shards(shard_dir)
    scheme, h = shards.scheme, shards.header
    use = sorted(shards.paths) if nodes is None else sorted(set(nodes))
    absent = [i for i in use if i not in shards.paths]
    if absent:
        raise TooFewShards(f"requested node(s) {absent} have no shard")
    if len(use) < scheme.k:
        raise TooFewShards(f"{len(use)} shard(s) available, need k = {scheme.k}")
    views = {i: shards.payload(i) for i in use}
    out = []
    for lo in range(0, h.stripe_count, batch):
        known = {i: _check_symbols(shards, i, v[lo:lo + batch]) for i, v in views.items()}
        try:
            codeword = decode_erasures(scheme.code, known)
        except InconsistentInput as exc:
            raise CorruptShard(f"parity violated in stripes {lo}..: {exc}") from exc
        out.append(recover_message(scheme, codeword)[..., scheme.pad_size:, :])
    data = unchunk(np.concatenate(out), h.payload_byte_length, scheme)
    if out_path is not None:
        Path(out_path).write_bytes(data)
    return data


@dataclass
class RepairReport:
    failed: int
    path: str
    stripe_count: int
    helpers: list[int]
    beta: int
    alpha: int
    k: int
    symbols_per_stripe: int
    symbols_transferred: int
    bytes_transferred: int
    ratio_to_node: Fraction
    ratio_to_file: Fraction
    optimal: bool

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["ratio_to_node"] = str(self.ratio_to_node)
        d["ratio_to_file"] = str(self.ratio_to_file)
        return d


def repair_shard(shard_dir, failed: int, out_path=None, batch: int = STRIPE_BATCH) -> RepairReport:
    """Rebuild the shard of ``failed`` from beta symbols of each surviving shard.

    Any existing shard for ``failed`` is ignored and overwritten.
    """
    shards = read_shards(shard_dir)
    scheme, h = shards.scheme, shards.header
    code = scheme.code
    if not 1 <= failed <= code.n:
        raise ParamError(f"node ids must be in 1..{code.n}")
    plan = repair_plan(code, failed)
    missing = [j for j in plan.helpers if j not in shards.paths]
    if missing:
        raise MissingHelperShard(f"repair of node {failed} needs shards {missing}")
    if out_path is None:
        out_path = shard_path(shards.root, failed)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    views = {j: shards.payload(j) for j in plan.helpers}
    moved = 0
    tmp = out_path.with_suffix(out_path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(replace(h, node_index=failed).pack())
        for lo in range(0, h.stripe_count, batch):
            # only the planned positions are read from each helper
            sent = {j: _check_symbols(shards, j, v[lo:lo + batch][:, plan.indices[j]])
                    for j, v in views.items()}
            moved += sum(s.shape[0] * s.shape[1] for s in sent.values())
            fh.write(np.ascontiguousarray(repair(code, failed, sent)).tobytes())
    os.replace(tmp, out_path)
    per_stripe = plan.total_symbols
    return RepairReport(
        failed=failed, path=str(out_path), stripe_count=h.stripe_count,
        helpers=list(plan.helpers), beta=code.beta, alpha=code.alpha, k=code.k,
        symbols_per_stripe=per_stripe, symbols_transferred=moved, bytes_transferred=moved * h.Q,
        ratio_to_node=Fraction(per_stripe, code.alpha),
        ratio_to_file=Fraction(per_stripe, code.k * code.alpha),
        optimal=per_stripe == (code.n - 1) * code.beta == code.repair_bandwidth)
