"""Command-line front end.

Every command writes ``report.json`` to the output directory; experiments
also write ``samples.csv`` (``n,value_re,value_im``) and ``hist.csv``
(``bin_lo,bin_hi,count``). Exit status is 0 on success, 1 on invalid input
and 2 when the requested analysis does not apply.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import _exact as ex
from ._json import dumps, encode
from .coboundary import NotEigenfunctionError, classify_discrepancy, solve_coboundary
from .fluctuations import (
    ExperimentError,
    RefusedError,
    blowup_experiment,
    cantor_limit_experiment,
    clt_experiment,
    coupling_decay_experiment,
    markov_clt_harness,
    typical_orbit_experiment,
)
from .measures import drift, markov_model
from .path_space import PathError, prefix_sums_table
from .spectral import DEFAULT_TOL, EigenClass, NotPrimitiveError, RootFindingError, spectral_report
from .substitution import (
    Substitution,
    SubstitutionError,
    SubstitutionSyntaxError,
    find_seed,
    is_primitive,
    parse_substitution,
    parse_substitution_file,
    theta_matrix,
)

EXIT_OK, EXIT_INVALID, EXIT_REFUSED = 0, 1, 2

COMMANDS = ("analyze", "measures", "cobound", "classify", "clt", "cantor", "blowup", "typical", "coupling", "mclt")

DEFAULTS = {
    "clt": {"n": 3**13},
    "cantor": {"n": 10**6, "mc": 10**5},
    "blowup": {"mc": 10**5, "ell": "8..10"},
    "typical": {"n": 3**12},
    "coupling": {"n": 3**8, "r": "1..6"},
    "mclt": {"n": 10**4, "mc": 10**4},
}


class ValidationError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with the validation status."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(json.dumps({"error": "usage", "message": message}) + "\n")
        sys.exit(EXIT_INVALID)


@dataclass
class RunConfig:
    """Validated command configuration; recorded verbatim in every report."""

    command: str
    rules: str
    n: int | None = None
    mc: int | None = None
    seed: int = 0
    tol: float = DEFAULT_TOL
    threads: int = 1
    f: list | None = None
    lambda_f: object = None
    ell: list[int] = field(default_factory=list)
    r: list[int] = field(default_factory=list)
    mode: str = "martingale"
    out: str = "."


def _int_range(text: str) -> list[int]:
    text = text.strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",") if x.strip()]


def _scalars(text: str) -> list:
    try:
        return [ex.parse_scalar(x) for x in text.split(",")]
    except ValueError as err:
        raise ValidationError(f"cannot parse values {text!r}") from err


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="subfluct", description="Birkhoff-sum fluctuations along substitution fixed points.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "analyze": "θ-matrix, primitivity and spectral report",
        "measures": "lifted PF data, limit kernels, invariant measure and drifts",
        "cobound": "coboundary certificates for all modulus-one eigenfunctions",
        "classify": "bounded-discrepancy verdict",
        "clt": "exhaustive CLT experiment (|λ_f| = 1)",
        "cantor": "Cantor-limit experiment (|λ_f| < 1)",
        "blowup": "blow-up experiment (1 < |λ_f| < λ)",
        "typical": "typical-orbit CLT along a sampled point",
        "coupling": "exact coupling-decay table",
        "mclt": "Markov-chain CLT harness on the path chain",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("rules_text", nargs="?", help="substitution such as 'a=aab;b=bba'")
        p.add_argument("--rules", help="substitution text")
        p.add_argument("--rules-file", help="file with one rule per line")
        p.add_argument("--out", default=os.environ.get("SUBFLUCT_OUT", "."), help="output directory (env SUBFLUCT_OUT)")
        p.add_argument("--tol", type=float, default=DEFAULT_TOL, help="eigenvalue tolerance")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=int(os.environ.get("SUBFLUCT_THREADS", "1")), help="worker threads (env SUBFLUCT_THREADS)")
        p.add_argument("--n", type=int, help="number of positions N")
        p.add_argument("--mc", type=int, help="Monte Carlo samples or trials")
        p.add_argument("--f", help="eigenfunction values, comma separated (fractions allowed)")
        p.add_argument("--lambda-f", dest="lambda_f", help="eigenvalue of f (inferred when omitted)")
        p.add_argument("--ell", help="levels for blowup, e.g. 8..10")
        p.add_argument("--r", help="coupling offsets, e.g. 1..6")
        p.add_argument("--mode", choices=("martingale", "coboundary"), default="martingale", help="mclt: g from f, or a coboundary-type g")
    return parser


def _load_substitution(args) -> Substitution:
    given = [x for x in (args.rules_text, args.rules, args.rules_file) if x]
    if len(given) != 1:
        raise ValidationError("give exactly one of RULES, --rules or --rules-file")
    s = parse_substitution_file(args.rules_file) if args.rules_file else parse_substitution(args.rules or args.rules_text)
    primitive, _k = is_primitive(theta_matrix(s))
    if not primitive:
        raise ValidationError("substitution is not primitive")
    try:
        find_seed(s)
    except SubstitutionError as err:
        raise ValidationError("substitution is not growing: no letter expands into a fixed point") from err
    return s


def make_config(args) -> tuple[RunConfig, Substitution]:
    s = _load_substitution(args)
    d = DEFAULTS.get(args.command, {})
    n = args.n if args.n is not None else d.get("n")
    mc = args.mc if args.mc is not None else d.get("mc")
    for name, val in (("--n", n), ("--mc", mc)):
        if val is not None and val < 1:
            raise ValidationError(f"{name} must be positive")
    if args.threads < 1:
        raise ValidationError("--threads must be positive")
    cfg = RunConfig(
        command=args.command,
        rules=s.to_text(),
        n=n,
        mc=mc,
        seed=args.seed,
        tol=args.tol,
        threads=args.threads,
        f=_scalars(args.f) if args.f else None,
        lambda_f=ex.parse_scalar(args.lambda_f) if args.lambda_f else None,
        ell=_int_range(args.ell or d.get("ell", "")) if (args.ell or "ell" in d) else [],
        r=_int_range(args.r or d.get("r", "")) if (args.r or "r" in d) else [],
        mode=args.mode,
        out=args.out,
    )
    if cfg.f is not None and len(cfg.f) != s.size:
        raise ValidationError(f"--f needs {s.size} values")
    return cfg, s


def _infer_lambda(s: Substitution, f: list):
    """Eigenvalue of the left eigenvector ``f`` (exact when ``f`` is rational)."""
    M = theta_matrix(s)
    fM = [sum(f[a] * int(M[a, b]) for a in range(s.size)) for b in range(s.size)]
    i = max(range(s.size), key=lambda j: abs(complex(f[j])))
    if f[i] == 0:
        raise ValidationError("f must be nonzero")
    lam = (ex.to_fraction(fM[i]) / ex.to_fraction(f[i])) if ex.all_rational(f) else fM[i] / f[i]
    if ex.is_rational(lam) and lam.denominator == 1:
        lam = int(lam)
    return lam


def _pick_eigenfunction(s: Substitution, cfg: RunConfig, wanted: set[EigenClass], need_noncoboundary: bool = False):
    if cfg.f is not None:
        if cfg.lambda_f is None:
            cfg.lambda_f = _infer_lambda(s, cfg.f)
        return list(cfg.f), cfg.lambda_f
    rep = spectral_report(s, cfg.tol)
    model = None
    for pair, cls in zip(rep.eigenpairs, rep.classes):
        if cls not in wanted or pair.value == 0:
            continue
        for v in pair.left:
            v = list(v)
            if not any(v):
                continue
            if need_noncoboundary:
                model = model or markov_model(s, rep.pf)
                if solve_coboundary(s, v, pair.value, model=model).is_coboundary:
                    continue
            cfg.f, cfg.lambda_f = v, pair.value
            return v, pair.value
    raise RefusedError("no eigenfunction of the required kind; pass --f")


# --- commands --------------------------------------------------------------

def cmd_analyze(s, cfg):
    return spectral_report(s, cfg.tol).to_dict(), None


def cmd_measures(s, cfg):
    rep = spectral_report(s, cfg.tol)
    model = markov_model(s, rep.pf)
    drifts = []
    for pair in rep.eigenpairs:
        for v in pair.left:
            drifts.append({
                "eigenvalue": pair.value,
                "f": list(v),
                "f_check": [[list(x), val] for x, val in prefix_sums_table(s, list(v)).items()],
                "drift": drift(s, list(v), model.lifted),
            })
    return {"model": model.to_dict(), "drift_table": drifts}, None


def cmd_cobound(s, cfg):
    rep = spectral_report(s, cfg.tol)
    model = markov_model(s, rep.pf)
    certs = []
    for pair, cls in zip(rep.eigenpairs, rep.classes):
        if cls not in (EigenClass.EQ1_REAL1, EigenClass.EQ1_OTHER):
            continue
        for v in pair.left:
            cert = solve_coboundary(s, list(v), pair.value, model=model)
            certs.append({"eigenvalue": pair.value, "f": list(v), "certificate": cert.to_dict(), "birkhoff_bound": cert.birkhoff_bound()})
    return {"certificates": certs}, None


def cmd_classify(s, cfg):
    return classify_discrepancy(s, cfg.tol, cfg.seed).to_dict(), None


def cmd_clt(s, cfg):
    f, lam = _pick_eigenfunction(s, cfg, {EigenClass.EQ1_REAL1, EigenClass.EQ1_OTHER}, need_noncoboundary=True)
    res = clt_experiment(s, f, lam, cfg.n)
    return res.report, res.samples


def cmd_cantor(s, cfg):
    f, lam = _pick_eigenfunction(s, cfg, {EigenClass.LT1})
    res = cantor_limit_experiment(s, f, lam, cfg.n, cfg.mc, cfg.seed, cfg.threads)
    return res.report, res.samples


def cmd_blowup(s, cfg):
    f, lam = _pick_eigenfunction(s, cfg, {EigenClass.GT1})
    res = blowup_experiment(s, f, lam, cfg.ell, cfg.mc, cfg.seed, cfg.threads)
    return res.report, res.samples


def cmd_typical(s, cfg):
    f, lam = _pick_eigenfunction(s, cfg, {EigenClass.EQ1_REAL1, EigenClass.EQ1_OTHER}, need_noncoboundary=True)
    res = typical_orbit_experiment(s, f, lam, cfg.n, cfg.seed)
    return res.report, res.samples


def cmd_coupling(s, cfg):
    a, _k = find_seed(s)
    res = coupling_decay_experiment(s, a, cfg.n, cfg.r)
    return res.report, None


def cmd_mclt(s, cfg):
    model = markov_model(s)
    P = np.array(model.p.as_array(), dtype=float)
    pi = np.array([float(x) for x in model.m])
    if cfg.mode == "coboundary":
        # h(b, k) depends only on the letter θ(b)_k; then P*Ph = h
        phi = np.array([complex(x) for x in (cfg.f or _default_phi(s, model))])
        h = np.array([phi[s.rules[b][k - 1]] for b, k in model.states])
        h = h - np.dot(pi, h)
        if np.all(h.imag == 0):
            h = h.real
        lam = complex(cfg.lambda_f) if cfg.lambda_f is not None else 1.0
        lamv = lam.real if isinstance(lam, complex) and lam.imag == 0 else lam
        g = h - lamv * (P @ h)
        res = markov_clt_harness(P, pi, g, lamv, cfg.n, cfg.mc, cfg.seed, h=h, threads=cfg.threads)
    else:
        f, lam = _pick_eigenfunction(s, cfg, {EigenClass.EQ1_REAL1, EigenClass.EQ1_OTHER}, need_noncoboundary=True)
        fc = prefix_sums_table(s, f)
        d = drift(s, f, model.lifted)
        g = np.array([complex(fc[x] - d) for x in model.states])
        if np.all(g.imag == 0):
            g = g.real
        lamc = complex(lam)
        res = markov_clt_harness(P, pi, g, lamc.real if lamc.imag == 0 else lamc, cfg.n, cfg.mc, cfg.seed, threads=cfg.threads)
        res.report["f"] = f
    return res.report, res.samples


def _default_phi(s, model):
    return [1] + [-1] * (s.size - 1)


HANDLERS = {
    "analyze": cmd_analyze,
    "measures": cmd_measures,
    "cobound": cmd_cobound,
    "classify": cmd_classify,
    "clt": cmd_clt,
    "cantor": cmd_cantor,
    "blowup": cmd_blowup,
    "typical": cmd_typical,
    "coupling": cmd_coupling,
    "mclt": cmd_mclt,
}


def _write_outputs(out: Path, report: dict, samples) -> list[str]:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps(report) + "\n")
    written = ["report.json"]
    if samples is not None:
        with open(out / "samples.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "value_re", "value_im"])
            for i, (re_, im_) in enumerate(zip(samples.real, samples.imag), start=1):
                w.writerow([i, repr(float(re_)), repr(float(im_))])
        with open(out / "hist.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_lo", "bin_hi", "count"])
            for row in samples.histogram():
                w.writerow([repr(row[0]), repr(row[1]), row[2]])
        written += ["samples.csv", "hist.csv"]
    return written


def _error(code: str, message: str, status: int) -> int:
    sys.stderr.write(json.dumps({"error": code, "message": message}) + "\n")
    return status


def run_command(cfg: RunConfig, s: Substitution) -> tuple[dict, object]:
    report, samples = HANDLERS[cfg.command](s, cfg)
    full = {"config": encode(asdict(cfg)), "version": __version__, "result": report}
    # output location and worker count do not change the result
    full["config"].pop("out", None)
    full["config"].pop("threads", None)
    return full, samples


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg, s = make_config(args)
        report, samples = run_command(cfg, s)
    except RefusedError as err:
        return _error("refused", str(err), EXIT_REFUSED)
    except SubstitutionSyntaxError as err:
        return _error("syntax", str(err), EXIT_INVALID)
    except (ValidationError, SubstitutionError, NotPrimitiveError) as err:
        return _error("invalid_substitution" if not isinstance(err, ValidationError) or "substitution" in str(err) else "invalid_argument", str(err), EXIT_INVALID)
    except (NotEigenfunctionError, ExperimentError, PathError) as err:
        return _error("invalid_argument", str(err), EXIT_INVALID)
    except (RootFindingError, OSError) as err:
        return _error("failure", str(err), EXIT_INVALID)
    written = _write_outputs(Path(cfg.out), report, samples)
    sys.stdout.write(json.dumps({"status": "ok", "command": cfg.command, "out": str(cfg.out), "files": written}) + "\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
