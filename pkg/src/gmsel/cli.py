"""Command line interface: ``gmsel select | simulate | penalty-curve | dkhi``."""

from __future__ import annotations

import argparse
import csv
import io
import math
import re
import sys
from dataclasses import dataclass

import numpy as np

from .dkhi_fish import dkhi, edkhi, efish, fish
from .errors import (
    BudgetExceededError,
    DataFormatError,
    DivergenceError,
    DomainError,
    HypothesisError,
    NoSolutionError,
    SaturatedFitError,
)
from .families import FAMILIES, CollectionSpec
from .kullback import select_kullback
from .penalties import CLASSICAL_KINDS, PenaltyRule
from .selectors import SelectionOutcome, select_in_collection
from .simulate import STUDIES, SimConfig, emit_penalty_curve, run_study

SELECT_FAMILIES = tuple(f for f in FAMILIES if f != "dyadic")
PENALTIES = ("kl",) + CLASSICAL_KINDS + ("kullback",)


@dataclass
class DataSet:
    """Parsed input: response, optional design columns and design points."""

    y: np.ndarray
    X: np.ndarray | None
    points: np.ndarray | None


def _numbered(names, prefix):
    pat = re.compile(rf"^{prefix}(\d+)$")
    found = {}
    for pos, name in enumerate(names):
        m = pat.match(name)
        if m:
            found[int(m.group(1))] = pos
    if not found:
        return []
    expected = list(range(1, len(found) + 1))
    if sorted(found) != expected:
        raise DataFormatError(f"columns {prefix}1..{prefix}{len(found)} must be numbered without gaps", 1)
    return [found[i] for i in expected]


def read_data(text: str) -> DataSet:
    """Parse CSV text with a header holding ``y`` and optionally ``x1..xN``, ``t1..td``.

    Raises
    ------
    DataFormatError
        On a missing ``y`` column, a ragged row or a non-numeric cell; the
        message names the offending line.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError("empty input", 1) from None
    names = [h.strip() for h in header]
    if "y" not in names:
        raise DataFormatError("header has no 'y' column", 1)
    iy = names.index("y")
    ix = _numbered(names, "x")
    it = _numbered(names, "t")
    ys, xs, ts = [], [], []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(names):
            raise DataFormatError(f"expected {len(names)} fields, found {len(row)}", line)
        try:
            vals = [float(c) for c in row]
        except ValueError:
            bad = next(c for c in row if not _is_float(c))
            raise DataFormatError(f"cannot parse {bad.strip()!r} as a number", line) from None
        if not all(math.isfinite(v) for v in vals):
            raise DataFormatError("non-finite value", line)
        ys.append(vals[iy])
        xs.append([vals[i] for i in ix])
        ts.append([vals[i] for i in it])
    if not ys:
        raise DataFormatError("no observations", 2)
    X = np.array(xs) if ix else None
    T = np.array(ts) if it else None
    return DataSet(np.array(ys), X, T)


def _is_float(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def _rule(args) -> PenaltyRule:
    if args.penalty == "kl":
        return PenaltyRule.kl(args.K)
    if args.penalty == "kullback":
        return PenaltyRule.kullback(args.K1, args.K2)
    return PenaltyRule.classical(args.penalty)


def fit_file(text: str, family: str, rule: PenaltyRule, p: int | None = None, *,
             d: int | None = None, r_max: int = 2, budget: int = 10_000_000,
             weights: str = "canonical") -> SelectionOutcome:
    """Run the selector of ``family`` on parsed CSV text."""
    data = read_data(text)
    n = data.y.shape[0]
    design = None
    N = None
    if family in ("ordered", "complete"):
        if data.X is None:
            raise DataFormatError(f"the {family} family needs design columns x1..xN", 1)
        design = data.X
        N = design.shape[1]
    if family == "partition":
        if data.points is None:
            raise DataFormatError("the partition family needs design points t1..td", 1)
        design = data.points
        d = design.shape[1] if d is None else d
        if d != design.shape[1]:
            raise DomainError(f"--d {d} does not match the {design.shape[1]} point columns")
    if p is None:
        p = {
            "nonzero": max(0, int(n / math.log(n))) if n > 2 else 0,
            "ordered": min(N or 0, n - 2),
            "complete": min(N or 0, n - 2, 8),
            "changepoint": min(n - 3, 5),
            "partition": 0,
        }[family]
    spec = CollectionSpec(family, n=n, p=p, N=N, d=d or 1, r_max=r_max, budget=budget, weights=weights)
    if rule.kind == "kullback":
        return select_kullback(data.y, spec, rule.K1, rule.K2, design).outcome
    return select_in_collection(data.y, spec, rule, design)


def format_outcome(out: SelectionOutcome, y: np.ndarray, markdown: bool = False) -> str:
    buf = io.StringIO()
    if markdown:
        buf.write(f"selected model: {out.m_hat}\n\n")
        buf.write(f"dimension: {out.dim}  sigma2_hat: {out.sigma2_hat:.6g}  "
                  f"criterion ({out.criterion}): {out.criterion_value:.6g}\n\n")
        buf.write("| D | rss | penalty | criterion |\n|---|---|---|---|\n")
        for t in out.trace:
            crit = "saturated" if t.criterion is None else f"{t.criterion:.6g}"
            buf.write(f"| {t.D} | {t.rss:.6g} | {t.penalty:.6g} | {crit} |\n")
        return buf.getvalue()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["selected", str(out.m_hat)])
    w.writerow(["dimension", out.dim])
    w.writerow(["sigma2_hat", f"{out.sigma2_hat:.10g}"])
    w.writerow(["criterion", out.criterion])
    w.writerow(["criterion_value", f"{out.criterion_value:.10g}"])
    w.writerow([])
    w.writerow(["D", "rss", "penalty", "criterion"])
    for t in out.trace:
        crit = "" if t.criterion is None else f"{t.criterion:.10g}"
        w.writerow([t.D, f"{t.rss:.10g}", f"{t.penalty:.10g}", crit])
    w.writerow([])
    w.writerow(["i", "y", "mu_hat"])
    for i, (yi, mi) in enumerate(zip(y, out.fit.mu_hat)):
        w.writerow([i, f"{yi:.10g}", f"{mi:.10g}"])
    return buf.getvalue()


def _read_text(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _cmd_select(args) -> int:
    text = _read_text(args.data)
    if args.design:
        text = _merge_design(text, _read_text(args.design))
    out = fit_file(text, args.family, _rule(args), args.p, d=args.d, r_max=args.r_max,
                   budget=args.budget, weights=args.weights)
    y = read_data(text).y
    sys.stdout.write(format_outcome(out, y, args.markdown))
    return 0


def _merge_design(data_text: str, design_text: str) -> str:
    """Join a response file and a design file of equal length column-wise."""
    a = list(csv.reader(io.StringIO(data_text)))
    b = list(csv.reader(io.StringIO(design_text)))
    a = [r for r in a if r]
    b = [r for r in b if r]
    if len(a) != len(b):
        raise DataFormatError(f"data has {len(a) - 1} rows but design has {len(b) - 1}", min(len(a), len(b)) + 1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for ra, rb in zip(a, b):
        w.writerow(ra + rb)
    return buf.getvalue()


def _cmd_simulate(args) -> int:
    kw = {"study": args.study, "reps": args.reps, "master_seed": args.seed}
    for flag, name in (("n", "n_list"), ("k", "k_list"), ("s", "s_list"), ("sigma", "sigma_list"),
                       ("K", "K_list"), ("designs", "designs"), ("p", "varsel_p")):
        value = getattr(args, flag)
        if value is not None:
            kw[name] = value
    cfg = SimConfig(**kw)
    report = run_study(cfg)
    text = report.to_markdown() if args.markdown else report.to_csv()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_penalty_curve(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["D", "pen_amdl", f"pen_kl_K{args.K:g}"])
    for D, amdl, kl in emit_penalty_curve(args.n, args.K, args.p):
        w.writerow([D, f"{amdl:.10g}", f"{kl:.10g}"])
    return 0


def _cmd_dkhi(args) -> int:
    if (args.x is None) == (args.q is None and args.log_q is None):
        raise DomainError("give exactly one of --x or --q/--log-q")
    if args.x is not None:
        val = (fish if args.fish else dkhi)(args.D, args.N, args.x)
    else:
        inv = efish if args.fish else edkhi
        val = inv(args.D, args.N, args.q, log_q=args.log_q)
    sys.stdout.write(f"{val:.15g}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmsel", description="Penalized model selection with unknown variance.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("select", help="select a model for a data file")
    sp.add_argument("--family", choices=SELECT_FAMILIES, required=True)
    sp.add_argument("--penalty", choices=PENALTIES, default="kl")
    sp.add_argument("--K", type=float, default=1.1)
    sp.add_argument("--K1", type=float, default=1.1)
    sp.add_argument("--K2", type=float, default=None)
    sp.add_argument("--p", type=int, default=None, help="largest model size")
    sp.add_argument("--d", type=int, default=None, help="dimension of partition design points")
    sp.add_argument("--r-max", dest="r_max", type=int, default=2)
    sp.add_argument("--weights", choices=("canonical", "uniform", "mixed"), default="canonical")
    sp.add_argument("--budget", type=int, default=10_000_000)
    sp.add_argument("--data", required=True, help="CSV with a 'y' column, or - for stdin")
    sp.add_argument("--design", default=None, help="optional CSV with x1..xN or t1..td columns")
    sp.add_argument("--markdown", action="store_true")
    sp.set_defaults(func=_cmd_select)

    ss = sub.add_parser("simulate", help="run a simulation study")
    ss.add_argument("--study", choices=STUDIES, default="nonzero")
    ss.add_argument("--reps", type=int, default=None)
    ss.add_argument("--seed", type=int, default=SimConfig.master_seed)
    ss.add_argument("--n", type=int, nargs="+")
    ss.add_argument("--k", type=int, nargs="+")
    ss.add_argument("--s", type=float, nargs="+")
    ss.add_argument("--sigma", type=float, nargs="+")
    ss.add_argument("--K", type=float, nargs="+")
    ss.add_argument("--designs", type=int, default=None)
    ss.add_argument("--p", type=int, default=None, help="largest subset size in variable selection")
    ss.add_argument("--out", default=None)
    ss.add_argument("--markdown", action="store_true")
    ss.set_defaults(func=_cmd_simulate)

    sc = sub.add_parser("penalty-curve", help="tabulate AMDL and data-driven penalties")
    sc.add_argument("--n", type=int, required=True)
    sc.add_argument("--K", type=float, default=1.1)
    sc.add_argument("--p", type=int, required=True)
    sc.set_defaults(func=_cmd_penalty_curve)

    sd = sub.add_parser("dkhi", help="evaluate Dkhi / Fish or their inverses")
    sd.add_argument("--D", type=float, required=True)
    sd.add_argument("--N", type=float, required=True)
    sd.add_argument("--x", type=float, default=None)
    sd.add_argument("--q", type=float, default=None)
    sd.add_argument("--log-q", dest="log_q", type=float, default=None)
    sd.add_argument("--fish", action="store_true")
    sd.set_defaults(func=_cmd_dkhi)
    return parser


_HANDLED = (
    BudgetExceededError,
    DataFormatError,
    DivergenceError,
    DomainError,
    HypothesisError,
    NoSolutionError,
    SaturatedFitError,
    OSError,
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _HANDLED as exc:
        sys.stderr.write(f"gmsel: error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
