"""Command-line front end.

Exit status: 0 on success, 1 on invalid input (bad flags, missing or
malformed files, size caps), 2 on a numeric failure such as an identity
residual above tolerance.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import identities, region, serialize, simulate
from .errors import NumericFailure, ValidationError
from .probkit import Channel, Dist, DistEntropies, _names
from .quantkit import DensityMatrix, QuantumEntropies

THREADS_ENV = "WIRETAP_THREADS"

CSV_CONTRACTS = """\
output contracts:
  entropy       CSV  quantity,value
  verify        JSONL one report per line: name, lhs, rhs, residual, passed,
                tolerance, kind, seed, backend, note
  region        CSV  sample,i_diff,i_v,i_yu,i_zu,ell   (--vertices: r_e,r_s,r_t)
  capacity      JSON {"C_s", "units", "restart_values", "model"}
  simulate      CSV  n,trials,p_err,ci_lo,ci_hi   (--jsonl: one trial per line)
  equivocation  CSV  n,n_s,n_t,equivocation

Information values are in nats; --bits divides displayed values by ln 2.
Rates given on the command line are always in nats.  The default thread
count comes from the WIRETAP_THREADS environment variable (default 1).
"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError:
        raise ValidationError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if value < 1:
        raise ValidationError(f"{THREADS_ENV} must be at least 1")
    return value


def _fmt(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else str(x)


class _Output:
    """Collects text for stdout or a file; written once at the end."""

    def __init__(self, path):
        self.path = path
        self.buf = io.StringIO()

    def csv(self, header, rows):
        w = csv.writer(self.buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)

    def close(self):
        text = self.buf.getvalue()
        if self.path in (None, "-"):
            sys.stdout.write(text)
        else:
            Path(self.path).write_text(text)


def _scale(args) -> float:
    return 1 / math.log(2) if args.bits else 1.0


def _load_wiretap(path):
    obj = serialize.load(path)
    if not isinstance(obj, Channel):
        raise ValidationError(f"{path}: expected a channel document")
    return region.wiretap_kernel(obj)


def _load_aux(path):
    obj = serialize.load(path)
    if not isinstance(obj, region.AuxiliaryModel):
        raise ValidationError(f"{path}: expected an auxiliary document")
    return obj


def cmd_entropy(args, out):
    state = serialize.load(args.state)
    if isinstance(state, Dist):
        tab = DistEntropies(state)
    elif isinstance(state, DensityMatrix):
        tab = QuantumEntropies(state)
    else:
        raise ValidationError("entropy needs a dist or density_matrix document")
    a, given = _names(args.a.split(",")), _names(args.given.split(",")) if args.given else ()
    if args.b:
        b = _names(args.b.split(","))
        label = f"I({','.join(a)}:{','.join(b)}" + (f"|{','.join(given)})" if given else ")")
        value = tab.mi(a, b, given)
    else:
        label = f"H({','.join(a)}" + (f"|{','.join(given)})" if given else ")")
        value = tab.cond(a, given)
    out.csv(["quantity", "value"], [[label, _fmt(value * _scale(args))]])


def cmd_verify(args, out):
    reports = identities.run_suite(args.seed, args.cases, args.backend, args.workers or _threads())
    for line in identities.to_jsonl(reports):
        out.buf.write(line + "\n")
    failed = [r for r in reports if not r.passed]
    if failed:
        out.close()
        raise NumericFailure(f"{len(failed)} of {len(reports)} checks failed; first: {failed[0].name} "
                             f"(residual {failed[0].residual:.3g}, seed {failed[0].seed})")


def cmd_region(args, out):
    k = _load_wiretap(args.channel)
    cfg = region.SamplerConfig(args.samples, args.alpha_u, args.alpha_v, args.alpha_x)
    sample = region.sample_region(k, args.nu, args.nv, cfg, args.seed)
    sc = _scale(args)
    rows = [[i] + [_fmt(v * sc) for v in (c.i_diff, c.i_v, c.i_yu, c.i_zu, c.ell)]
            for i, c in enumerate(sample.constraints)]
    out.csv(["sample", "i_diff", "i_v", "i_yu", "i_zu", "ell"], rows)
    if args.vertices:
        vout = _Output(args.vertices)
        verts = sample.hull.vertices if sample.hull is not None else np.zeros((0, 3))
        order = np.lexsort(verts.T[::-1]) if len(verts) else []
        vout.csv(["r_e", "r_s", "r_t"], [[_fmt(v * sc) for v in verts[i]] for i in order])
        vout.close()


def cmd_capacity(args, out):
    k = _load_wiretap(args.channel)
    cfg = region.OptimizerConfig(restarts=args.restarts, seed=args.seed, workers=args.workers or _threads())
    res = region.secrecy_capacity(k, args.nu, args.nv, cfg)
    sc = _scale(args)
    doc = {"C_s": res.value * sc, "units": "bits" if args.bits else "nats",
           "restart_values": [v * sc for v in res.restart_values],
           "model": serialize.auxiliary_to_json(res.model)}
    out.buf.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _ints(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v]
    except ValueError:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from None
    if not values or min(values) < 1:
        raise ValidationError("block lengths must be positive integers")
    return values


def cmd_simulate(args, out):
    k = _load_wiretap(args.channel)
    aux = _load_aux(args.aux)
    rate = region.RatePoint(args.re, args.rs, args.rt)
    if not rate.is_valid():
        raise ValidationError("rates need 0 <= r_e <= r_s and r_t >= 0")
    records = [] if args.jsonl else None
    rows = []
    for n in _ints(args.n):
        recs = [] if records is not None else None
        est = simulate.estimate_error(k, aux, rate, n, args.trials, args.seed, n_s=args.ns, n_t=args.nt,
                                      fixed_codebook=args.fixed_codebook,
                                      include_equivocation=not args.no_equivocation,
                                      workers=args.workers or _threads(), records=recs)
        rows.append([n, est.trials, _fmt(est.p_err), _fmt(est.ci_lo), _fmt(est.ci_hi)])
        if records is not None:
            records += [{"n": n, **json.loads(r.to_json())} for r in recs]
    out.csv(["n", "trials", "p_err", "ci_lo", "ci_hi"], rows)
    if records is not None:
        Path(args.jsonl).write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records))


def cmd_equivocation(args, out):
    k = _load_wiretap(args.channel)
    aux = _load_aux(args.aux)
    cb = simulate.build_codebook(aux, args.n, args.ns, args.nt, args.seed)
    value = simulate.exact_equivocation(cb, k)
    out.csv(["n", "n_s", "n_t", "equivocation"], [[args.n, args.ns, args.nt, _fmt(value * _scale(args))]])


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wiretap", description="Wiretap channel regions, capacities and coding experiments.",
                epilog=CSV_CONTRACTS, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--bits", action="store_true", help="display informations in bits")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_, description=help_, epilog=CSV_CONTRACTS,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(func=fn)
        sp.add_argument("--out", default="-", help="output path (default stdout)")
        return sp

    sp = add("entropy", cmd_entropy, "entropy or (conditional) mutual information of a state file")
    sp.add_argument("state", help="dist or density_matrix JSON")
    sp.add_argument("--a", required=True, help="comma-separated variables")
    sp.add_argument("--b", help="second group; gives I(a:b|given) instead of H(a|given)")
    sp.add_argument("--given", help="comma-separated conditioning variables")

    sp = add("verify", cmd_verify, "run the chain-rule identity suite on random models")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--cases", type=int, default=20)
    sp.add_argument("--backend", choices=["classical", "quantum", "both"], default="both")
    sp.add_argument("--workers", type=int, default=0, help="threads (0: from WIRETAP_THREADS)")

    sp = add("region", cmd_region, "sample auxiliaries and report region constraints")
    sp.add_argument("--channel", required=True)
    sp.add_argument("--nu", type=int)
    sp.add_argument("--nv", type=int)
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--alpha-u", type=float, default=1.0)
    sp.add_argument("--alpha-v", type=float, default=1.0)
    sp.add_argument("--alpha-x", type=float, default=1.0)
    sp.add_argument("--vertices", help="write hull vertices CSV here")

    sp = add("capacity", cmd_capacity, "secrecy capacity by multi-start optimization")
    sp.add_argument("--channel", required=True)
    sp.add_argument("--nu", type=int)
    sp.add_argument("--nv", type=int)
    sp.add_argument("--restarts", type=int, default=64)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=int, default=0)

    sp = add("simulate", cmd_simulate, "Monte Carlo error rate of the random wiretap code")
    sp.add_argument("--channel", required=True)
    sp.add_argument("--aux", required=True)
    sp.add_argument("--re", type=float, default=0.0)
    sp.add_argument("--rs", type=float, default=0.0)
    sp.add_argument("--rt", type=float, default=0.0)
    sp.add_argument("--n", default="25,50,100", help="comma-separated block lengths")
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--ns", type=int, help="override N_s")
    sp.add_argument("--nt", type=int, help="override N_t")
    sp.add_argument("--fixed-codebook", action="store_true")
    sp.add_argument("--no-equivocation", action="store_true", help="drop the mu = 1 test from decoding")
    sp.add_argument("--jsonl", help="per-trial records")
    sp.add_argument("--workers", type=int, default=0)

    sp = add("equivocation", cmd_equivocation, "exact H(S|Z^n)/n of one random codebook")
    sp.add_argument("--channel", required=True)
    sp.add_argument("--aux", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--ns", type=int, default=2)
    sp.add_argument("--nt", type=int, default=2)
    sp.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = _Output(args.out)
    try:
        args.func(args, out)
    except NumericFailure as exc:
        sys.stderr.write(f"wiretap: numeric failure: {exc}\n")
        return 2
    except ValidationError as exc:
        sys.stderr.write(f"wiretap: error: {exc}\n")
        return 1
    out.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
