"""Command line: ``partition``, ``verify`` and ``figures``.

Exit codes: 0 success, 2 a budget or threshold was missed, 3 a precision tie
aborted the run, 4 malformed input or an invalid specification.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from . import analysis
from .avdonin import (AvdoninCertificate, CertificateError, FrequencyMap, check_riesz_hypothesis,
                      measure_discrepancy, riesz_threshold)
from .compose import (PartitionResult, PartitionSpec, SpecError, build_partition, combine_union, naive_composition)
from .lattice import Window
from .numerics import (DEFAULT_GUARD, DEFAULT_PRECISION, ExactScalar, NumericsError, RangeError,
                       TieError, parse_scalar)
from .rearrange import BudgetError, WindowTooSmall

EXIT_OK, EXIT_BUDGET, EXIT_TIE, EXIT_INPUT = 0, 2, 3, 4

DEFAULT_WINDOW = "-100:100"
DEFAULT_TRUNCATIONS = (64, 128, 256, 512)
# verify thresholds, relative to the interval length
GRAM_FLOOR = 1e-3
MAX_MEDIAN_DROP = 0.05
RESIDUAL_TOL = 0.05
DENSITY_SLACK = 2.0

FIGURES = {
    "1": {"lengths": ["sqrt2inv", "1-sqrt2inv"], "colors": ["yellow", "blue"],
          "window": "-6:25"},
    "2": {"lengths": ["1-sqrt2inv", "1/5", "sqrt2inv-1/5"],
          "colors": ["blue", "green", "red"], "window": "-6:25"},
}

class InputError(ValueError):
    """Malformed command-line or file input."""

@dataclass
class RunConfig:
    command: str = ""
    lengths: List[str] = field(default_factory=list)
    window: Optional[str] = None
    budget_K: int = 1
    guard: float = DEFAULT_GUARD
    precision: int = DEFAULT_PRECISION
    out: Optional[str] = None
    unions: Optional[str] = None
    truncations: List[int] = field(default_factory=lambda: list(DEFAULT_TRUNCATIONS))
    expect_fail: bool = False
    input: Optional[str] = None
    figure: Optional[str] = None
    tail: bool = False

    @classmethod
    def from_sources(cls, args: argparse.Namespace) -> "RunConfig":
        """File values first, then every flag that was given on the command line."""
        values = {}
        if getattr(args, "config", None):
            try:
                with open(args.config) as fh:
                    values.update(json.load(fh))
            except (OSError, json.JSONDecodeError) as exc:
                raise InputError(f"cannot read config {args.config}: {exc}") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise InputError(f"unknown config keys: {sorted(unknown)}")
        for name in known:
            v = getattr(args, name, None)
            if v is not None and v is not False:
                values[name] = v
        cfg = cls(**values)
        if isinstance(cfg.lengths, str):
            cfg.lengths = _split_list(cfg.lengths)
        if isinstance(cfg.truncations, str):
            cfg.truncations = [int(t) for t in _split_list(cfg.truncations)]
        return cfg

def _split_list(text: str) -> List[str]:
    return [t.strip() for t in text.split(",") if t.strip()]

def parse_window(text: str, guard: float, prec: int) -> Window:
    try:
        lo, hi = text.split(":")
        return Window(parse_scalar(lo, guard, prec), parse_scalar(hi, guard, prec))
    except ValueError as exc:
        raise InputError(f"bad window {text!r}; expected lo:hi") from exc

def parse_unions(text, n: int):
    """``"all"``, ``"none"`` or ``"1,2;1,3"``; None keeps the driver default."""
    if text is None:
        return None
    if isinstance(text, list):
        out = [tuple(int(j) for j in J) for J in text]
    else:
        text = text.strip()
        if text == "none":
            return []
        if text == "all":
            return [J for size in range(2, n + 1)
                    for J in itertools.combinations(range(1, n + 1), size)]
        try:
            out = [tuple(int(j) for j in part.split(",")) for part in text.split(";")
                   if part.strip()]
        except ValueError as exc:
            raise InputError(f"bad union list {text!r}") from exc
    for J in out:
        if len(set(J)) != len(J) or any(not 1 <= j <= n for j in J):
            raise InputError(f"union {J} must list distinct sets among 1..{n}")
    return out

def _spec(cfg: RunConfig) -> PartitionSpec:
    if not cfg.lengths:
        raise InputError("--lengths is required")
    try:
        lengths = tuple(parse_scalar(t, cfg.guard, cfg.precision) for t in cfg.lengths)
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(str(exc)) from exc
    return PartitionSpec(lengths, int(cfg.budget_K), bool(cfg.tail))

def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)

def _emit(obj, cfg: RunConfig):
    text = dumps(obj) + "\n"
    if cfg.out and cfg.out != "-":
        with open(cfg.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)

# -- partition ----------------------------------------------------------------------

def partition_status(result: PartitionResult) -> dict:
    delta = result.spec.delta
    sets_ok = all(m.certificate is not None and m.certificate.epsilon_hat <= delta
                  and check_riesz_hypothesis(m, b).passed
                  for m, b in zip(result.maps, result.lengths))
    unions_ok = all(u.passed and check_riesz_hypothesis(u.certificate, u.length).passed
                    for u in result.unions)
    cover_ok, msg = result.check_partition()
    if result.spec.tail:
        cover_ok, msg = True, "tail interval absorbs the remainder"
    return {"sets": sets_ok, "unions": unions_ok, "cover": cover_ok, "cover_message": msg,
            "pass": bool(sets_ok and unions_ok and cover_ok)}

def cmd_partition(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    window = parse_window(cfg.window or DEFAULT_WINDOW, cfg.guard, cfg.precision)
    unions = parse_unions(cfg.unions, len(spec.effective_lengths))
    result = build_partition(spec, window, unions=unions)
    out = result.to_json()
    out["status"] = partition_status(result)
    _emit(out, cfg)
    return EXIT_OK if out["status"]["pass"] else EXIT_BUDGET

# -- verify --------------------------------------------------------------------------------

def _trend_truncations(n: int, requested: Sequence[int]) -> List[int]:
    ns = [t for t in requested if 2 <= t <= n]
    if len(ns) < 2 and n >= 4:
        ns = [n // 2, n]
    return ns

def verify_set(freqs: np.ndarray, length: float, truncations: Sequence[int],
               support=None) -> dict:
    """Gram trend, completeness residual and densities of one set against ``length``."""
    freqs = np.sort(np.asarray(freqs, dtype=np.float64))
    ns = _trend_truncations(len(freqs), truncations)
    if not ns:
        raise InputError(f"need at least 4 frequencies, got {len(freqs)}")
    trend = analysis.gram_trend(freqs, length, ns)
    mins = [g.lambda_min for g in trend]
    drops = [(a - b) / a for a, b in zip(mins, mins[1:]) if a > 0]
    median_drop = float(np.median(drops)) if drops else 0.0
    # below the smallest standard truncation the drop is dominated by boundary effects
    trend_checked = ns[0] >= min(DEFAULT_TRUNCATIONS)
    gram_ok = min(mins) >= GRAM_FLOOR * length and (
        not trend_checked or median_drop <= MAX_MEDIAN_DROP)
    one = analysis.Polynomial((1.0,))
    residuals = [analysis.completeness_residual(freqs, length, one, n) for n in ns]
    # the residual of a complete system decays like 1/n, so small sets get slack
    residual_ok = residuals[-1] <= max(RESIDUAL_TOL, 1 / ns[-1]) * length

    if support is None:
        support = (float(freqs[0]), float(freqs[-1]) + 1e-9)
    span = support[1] - support[0]
    radii = [span / 4, span / 2]
    dens = analysis.beurling_density(freqs, radii, support)
    r = radii[-1]
    density_ok = (dens.inf_counts[-1] >= length * r - DENSITY_SLACK
                  and dens.sup_counts[-1] <= length * r + DENSITY_SLACK)
    return {"n": len(freqs), "gram": [g.to_json() for g in trend], "median_drop": median_drop,
            "trend_checked": bool(trend_checked),
            "gram_ok": bool(gram_ok),
            "residual_f1": [{"n": n, "residual": float(x)} for n, x in zip(ns, residuals)],
            "residual_ok": bool(residual_ok), "density": dens.to_json(),
            "density_ok": bool(density_ok),
            "pass": bool(gram_ok and residual_ok and density_ok)}

def _remeasure(m: FrequencyMap, stored: dict, length) -> dict:
    cert = AvdoninCertificate.from_json(stored)
    fresh = measure_discrepancy(m, cert.R, cert.window, min_blocks=1)
    riesz = check_riesz_hypothesis(fresh, length)
    return {"certificate": fresh.to_json(riesz_threshold(length)),
            "identical": fresh.epsilon_hat.value == cert.epsilon_hat.value
            and fresh.blocks_checked == cert.blocks_checked,
            "riesz": riesz.to_json()}

def _load(path: Optional[str]):
    try:
        if path is None or path == "-":
            return json.load(sys.stdin)
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read input: {exc}") from exc

def verify_document(doc: dict, truncations: Sequence[int]) -> dict:
    if not isinstance(doc, dict) or not isinstance(doc.get("sets"), list) or not doc["sets"]:
        raise InputError("input must be an object with a nonempty 'sets' list")
    support = None
    if "log" in doc and "covered_window" in doc.get("log", {}):
        support = tuple(doc["log"]["covered_window"])
    elif "window" in doc:
        w = doc["window"]
        support = (float(ExactScalar.from_json(w[0])), float(ExactScalar.from_json(w[1])))
    reports, maps, lengths = [], [], []
    for entry in doc["sets"]:
        try:
            length = ExactScalar.from_json(entry["length"]) if isinstance(entry["length"], dict) \
                else parse_scalar(str(entry["length"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"set without a valid length: {exc}") from exc
        rep = {"label": entry.get("label", "")}
        m = None
        if entry.get("map") is not None:
            try:
                m = FrequencyMap.from_json(entry["map"])
                if entry.get("certificate"):
                    m = m.with_certificate(AvdoninCertificate.from_json(entry["certificate"]))
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"bad map for {rep['label']}: {exc}") from exc
            freqs = m.target_values()
            set_support = support if "log" in doc else None
        else:
            try:
                freqs = np.asarray(entry["frequencies"], dtype=np.float64)
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"set {rep['label']} has no frequencies") from exc
            set_support = support
        if len(np.unique(freqs)) != len(freqs):
            raise InputError(f"set {rep['label']} repeats a frequency")
        rep.update(verify_set(freqs, float(length), truncations, set_support))
        if m is not None and entry.get("certificate"):
            rep.update(_remeasure(m, entry["certificate"], length))
            rep["pass"] = bool(rep["pass"] and rep["identical"] and rep["riesz"]["pass"])
        reports.append(rep)
        maps.append(m)
        lengths.append(length)
    unions = []
    for u in doc.get("unions", []):
        J = tuple(int(j) for j in u["J"])
        if any(maps[j - 1] is None for j in J):
            continue
        rho = combine_union([maps[j - 1] for j in J], [lengths[j - 1] for j in J],
                            epsilon=Fraction(*doc["spec"]["delta"]))
        stored = u["certificate"]
        total = sum((lengths[j - 1] for j in J), ExactScalar(Fraction(0)))
        riesz = check_riesz_hypothesis(rho, total)
        same = rho.certificate.epsilon_hat.value == ExactScalar.from_json(
            stored["epsilon_hat"]).value
        unions.append({"J": list(J), "certificate": rho.certificate.to_json(riesz_threshold(total)),
                       "identical": bool(same), "riesz": riesz.to_json(),
                       "pass": bool(same and riesz.passed)})
    disjoint = True
    all_vals = np.concatenate([np.asarray(r_vals, dtype=np.float64) for r_vals in
                               (e.get("frequencies", []) for e in doc["sets"])])
    if len(all_vals):
        disjoint = len(np.unique(all_vals)) == len(all_vals)
    ok = disjoint and all(r["pass"] for r in reports) and all(u["pass"] for u in unions)
    return {"sets": reports, "unions": unions, "disjoint": bool(disjoint), "pass": bool(ok)}

def cmd_verify(cfg: RunConfig) -> int:
    report = verify_document(_load(cfg.input), cfg.truncations)
    report["expect_fail"] = bool(cfg.expect_fail)
    if cfg.expect_fail:
        report["expected_negative"] = not report["pass"]
    _emit(report, cfg)
    if cfg.expect_fail:
        return EXIT_OK if not report["pass"] else EXIT_BUDGET
    return EXIT_OK if report["pass"] else EXIT_BUDGET

# -- figures -------------------------------------------------------------------------

def _indices_in(m: FrequencyMap, window: Window) -> List[int]:
    """Target indices (frequency minus 1/2) inside the window."""
    vals = np.sort(m.targets)
    lo = (window.lo - Fraction(1, 2)).ceil(strict=False)
    hi = (window.hi - Fraction(1, 2)).ceil(strict=False)
    return vals[(vals >= lo) & (vals < hi)].tolist()

def figure_data(lengths: Sequence[str], window: str, colors=None, K: int = 1,
                guard: float = DEFAULT_GUARD, prec: int = DEFAULT_PRECISION) -> dict:
    """Point sets of a partition on a small window, plus the unbalanced assignment per stage.

    Sets are reported as integer indices ``m`` standing for ``m + 1/2``.
    """
    spec = PartitionSpec(tuple(parse_scalar(t, guard, prec) for t in lengths), K)
    win = parse_window(window, guard, prec)
    result = build_partition(spec, win, unions=[])
    colors = list(colors) if colors else [None] * len(result.maps)
    sets = []
    for j, (m, b, label) in enumerate(zip(result.maps, result.lengths, result.labels)):
        idx = _indices_in(m, win)
        sets.append({"label": label, "color": colors[j], "length": b.to_json(),
                     "indices": idx, "frequencies": [i + 0.5 for i in idx]})
    stages = []
    for j in range(2, len(result.maps)):
        outer = _indices_in(result.outer_maps[j - 2], win)
        naive_a, naive_b = naive_composition(result, j)
        na, nb = _indices_in(naive_a, win), _indices_in(naive_b, win)
        fa = set(_indices_in(result.maps[j - 1], win))
        switched = sorted(set(na) ^ fa)
        stages.append({"stage": j, "outer": outer, "naive_first": na, "naive_rest": nb,
                       "switched": switched})
    return {"lengths": list(lengths), "window": win.to_json(), "sets": sets,
            "stages": stages}

def cmd_figures(cfg: RunConfig) -> int:
    which = cfg.figure or ("custom" if cfg.lengths else "all")
    out = {}
    if which in ("1", "all"):
        f = FIGURES["1"]
        out["figure1"] = figure_data(f["lengths"], cfg.window or f["window"], f["colors"],
                                     guard=cfg.guard, prec=cfg.precision)
    if which in ("2", "all"):
        f = FIGURES["2"]
        data = figure_data(f["lengths"], cfg.window or f["window"], f["colors"],
                           guard=cfg.guard, prec=cfg.precision)
        # stage 2 splits the yellow set into green and red
        data["stages"][0]["outer_color"] = "yellow"
        out["figure2"] = data
    if which == "custom":
        out["custom"] = figure_data(cfg.lengths, cfg.window or DEFAULT_WINDOW,
                                    K=int(cfg.budget_K), guard=cfg.guard, prec=cfg.precision)
    if not out:
        raise InputError(f"unknown figure {which!r}")
    if len(out) == 1:
        out = next(iter(out.values()))
    _emit(out, cfg)
    return EXIT_OK

# -- entry point ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--lengths", help="comma-separated lengths: p/q, irr:<decimal>, "
                        "sqrt2inv, golden, invpi, or sums/differences of these")
    common.add_argument("--window", help="lo:hi")
    common.add_argument("--budget-K", dest="budget_K", type=int)
    common.add_argument("--guard", type=float)
    common.add_argument("--precision", type=int)
    common.add_argument("--unions", help='"all", "none" or e.g. "1,2;1,3"')
    common.add_argument("--truncations", help="comma-separated Gram truncation sizes")
    common.add_argument("--expect-fail", dest="expect_fail", action="store_true", default=None)
    common.add_argument("--tail", action="store_true", default=None,
                        help="lengths sum below 1; the remainder is one extra set")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rieszsplit",
                                     description="Partition Z+1/2 into exponential Riesz bases.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("partition", parents=[common], help="build and certify a partition")
    p = sub.add_parser("verify", parents=[common], help="re-check stored frequency sets")
    p.add_argument("input", nargs="?", help="JSON file (default stdin)")
    p = sub.add_parser("figures", parents=[common], help="emit small-window point sets")
    p.add_argument("--figure", choices=["1", "2", "all", "custom"])
    return parser

COMMANDS = {"partition": cmd_partition, "verify": cmd_verify, "figures": cmd_figures}

def _join_negative_values(argv: Sequence[str]) -> List[str]:
    """``--window -100:100`` would read as a flag; glue such values to their option."""
    out, it = [], iter(argv)
    for tok in it:
        if tok in ("--window", "--lengths"):
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(_join_negative_values(sys.argv[1:] if argv is None else argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.from_sources(args)
        return COMMANDS[args.command](cfg)
    except (BudgetError, WindowTooSmall) as exc:
        _report_error(exc, "budget", getattr(exc, "certificates", None))
        return EXIT_BUDGET
    except (TieError, RangeError) as exc:
        _report_error(exc, "precision")
        return EXIT_TIE
    except (InputError, SpecError, KeyError, TypeError, ValueError, CertificateError) as exc:
        _report_error(exc, "input")
        return EXIT_INPUT
    except NumericsError as exc:
        _report_error(exc, "numerics")
        return EXIT_BUDGET

def _report_error(exc: Exception, kind: str, details=None):
    payload = {"error": str(exc), "kind": kind}
    if details:
        payload["details"] = details
    sys.stderr.write(dumps(payload) + "\n")

if __name__ == "__main__":
    sys.exit(main())
