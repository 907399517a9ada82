"""secure-msr: shard files with a secure MSR code, repair, decode, and audit secrecy.

Exit status: 0 on success, 1 when a verification fails (insecure audit,
corrupt or inconsistent shards), 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .audit import audit_sweep
from .errors import ParamError, SecureMSRError
from .scheme import bounds, default_tower, scheme_params
from .storage import decode_file, encode_file, repair_shard

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _scheme_args(p: argparse.ArgumentParser, secret_size: bool = False) -> None:
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--ell1", type=int, default=0)
    p.add_argument("--ell2", type=int, default=0)
    p.add_argument("--base-w", type=int, default=None,
                   help="base field GF(2^w); default: smallest w with 2^w >= n + 1")
    p.add_argument("--q", type=int, default=None, help="extension degree; default M")
    if secret_size:
        p.add_argument("--secret-size", type=int, default=None,
                       help="override Ms (negative control: shrinks the pad)")


def _emit(args, payload: dict, text: str) -> None:
    if getattr(args, "json", False):
        print(json.dumps(payload, indent=2, default=str))
    else:
        print(text)


def _parse_nodes(spec: str | None):
    if spec is None:
        return None
    try:
        return [int(x) for x in spec.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--nodes expects a comma-separated list of integers, got {spec!r}")


def _build_scheme(args, secret_size=None):
    tower = default_tower(args.n, args.k, args.base_w, args.q)
    return scheme_params(args.n, args.k, args.ell1, args.ell2, tower, secret_size=secret_size)


def cmd_params(args) -> int:
    s = _build_scheme(args)
    info = s.summary()
    text = "\n".join(f"{key:>16}: {val}" for key, val in info.items())
    _emit(args, info, text)
    return EXIT_OK


def cmd_encode(args) -> int:
    if args.out_dir is None:
        raise UsageError("encode needs --out-dir")
    paths = encode_file(args.input, args.out_dir, args.n, args.k, args.ell1, args.ell2,
                        w=args.base_w, Q=args.q, seed=args.seed)
    _emit(args, {"shards": [str(p) for p in paths]}, "\n".join(str(p) for p in paths))
    return EXIT_OK


def cmd_decode(args) -> int:
    data = decode_file(args.shard_dir, args.out, nodes=_parse_nodes(args.nodes))
    _emit(args, {"out": args.out, "bytes": len(data)}, f"wrote {len(data)} bytes to {args.out}")
    return EXIT_OK


def cmd_repair(args) -> int:
    rep = repair_shard(args.shard_dir, args.node)
    text = (f"rebuilt node {rep.failed} -> {rep.path}\n"
            f"  {rep.symbols_per_stripe} symbols/stripe ({rep.beta} from each of "
            f"{len(rep.helpers)} helpers), {rep.symbols_transferred} symbols total\n"
            f"  {rep.ratio_to_node} of one node, {rep.ratio_to_file} of the file")
    _emit(args, rep.to_dict(), text)
    return EXIT_OK if rep.optimal else EXIT_FAIL


def cmd_audit(args) -> int:
    scheme = _build_scheme(args, args.secret_size)
    report = audit_sweep(args.ell1, args.ell2, scheme, workers=args.workers)
    doc = report.to_dict()
    doc["tampered"] = scheme.tampered
    if args.report:
        Path(args.report).write_text(json.dumps(doc, indent=2))
    lines = [f"(n, k) = ({report.n}, {report.k}), (l1, l2) = ({report.ell1}, {report.ell2}), "
             f"M = {report.M}, Ms = {report.Ms}"]
    for v in report.verdicts:
        lines.append(f"  E1={sorted(v.spec.E1)} E2={sorted(v.spec.E2)}: "
                     f"{'SECURE' if v.secure else 'INSECURE'} rank A={v.rank_A} [A|B]={v.rank_AB}")
    lines.append(f"{len(report.verdicts) - len(report.insecure)}/{len(report.verdicts)} secure"
                 f" in {report.seconds:.2f} s")
    _emit(args, doc, "\n".join(lines))
    return EXIT_OK if report.secure else EXIT_FAIL


def cmd_bounds(args) -> int:
    s = _build_scheme(args)
    c = s.code
    d = c.d if args.d is None else args.d
    rep = bounds(c.n, c.k, d, s.ell1, s.ell2, c.alpha, c.beta)
    info = rep.to_dict()
    _emit(args, info, "\n".join(f"{key:>30}: {val}" for key, val in info.items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="secure-msr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="derived sizes of a scheme")
    _scheme_args(p)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("encode", help="shard a file across n node directories")
    p.add_argument("input")
    _scheme_args(p)
    p.add_argument("--seed", type=int, default=None,
                   help="test mode: seeded pad, commitment stored in headers")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="rebuild the file from any k shards")
    p.add_argument("--shard-dir", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--nodes", default=None, help="comma-separated subset of nodes to use")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("repair", help="rebuild one shard from the other n - 1")
    p.add_argument("--shard-dir", required=True)
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("audit", help="exhaustive secrecy sweep")
    _scheme_args(p, secret_size=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report", default=None, help="write the JSON report here")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("bounds", help="secrecy capacity bounds next to the construction")
    _scheme_args(p)
    p.add_argument("--d", type=int, default=None, help="helper count for the general-d bound")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_bounds)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ParamError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SecureMSRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
