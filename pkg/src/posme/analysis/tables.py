"""Aligned text tables and JSON views of analysis results."""

from __future__ import annotations

import dataclasses
import math
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

from .bounds import CascadeTable
from .mixing import MixingReport
from .simulate import TmtoReport


def round_half_up(x: float, places: int = 0) -> Decimal:
    q = Decimal(1).scaleb(-places)
    return Decimal(repr(x)).quantize(q, rounding=ROUND_HALF_UP)


def format_count(x: float) -> str:
    return str(round_half_up(x))


def format_ratio(x: float) -> str:
    """Integers from 100 up, otherwise three significant figures with
    trailing zeros dropped (74.03 -> 74, 11.625 -> 11.6, 1.09375 -> 1.09)."""
    if not math.isfinite(x):
        return str(x)
    if abs(x) >= 100:
        return format_count(x)
    if x == 0:
        return "0"
    places = 2 - math.floor(math.log10(abs(x)))
    s = str(round_half_up(x, places))
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s


def format_alpha(a: float) -> str:
    f = Fraction(a).limit_denominator(8)
    if abs(float(f) - a) < 1e-12 and f.denominator > 1:
        return f"{f.numerator}/{f.denominator}"
    return f"{a:g}"


def _render(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join(lines)


def cascade_rows(table: CascadeTable) -> list[dict[str, str]]:
    return [{
        "alpha": format_alpha(r.alpha),
        "branching": format_ratio(r.branching),
        "W": format_count(r.W),
        "ST/K^2": format_ratio(r.st_over_k2),
        "regime": r.regime,
    } for r in table.rows]


def strengthened_rows(table: CascadeTable) -> list[dict[str, str]]:
    return [{
        "alpha": format_alpha(r.alpha),
        "W": format_count(r.W),
        "W*": format_count(r.W_star),
        "ST/K^2": format_ratio(r.st_over_k2),
        "ST*/K^2": format_ratio(r.st_star_over_k2),
        "gain": format_ratio(r.gain),
    } for r in table.strengthened]


def format_cascade_table(table: CascadeTable) -> str:
    rows = cascade_rows(table)
    return _render(list(rows[0]) if rows else ["alpha"], [list(r.values()) for r in rows])


def format_strengthened_table(table: CascadeTable) -> str:
    rows = strengthened_rows(table)
    return _render(list(rows[0]) if rows else ["alpha"], [list(r.values()) for r in rows])


def mixing_rows(r: MixingReport) -> list[tuple[str, str, str]]:
    e = r.expected()
    return [
        ("Read chi2/df", f"{r.read_chi2_per_df:.6f}", f"{e['read_chi2_per_df']:.6f}"),
        ("Write chi2/df", f"{r.write_chi2_per_df:.6f}", f"{e['write_chi2_per_df']:.6f}"),
        ("Read sigma", f"{r.read_sigma:.4f}", f"{e['read_sigma']:.4f}"),
        ("Write sigma", f"{r.write_sigma:.4f}", f"{e['write_sigma']:.4f}"),
        ("Unwritten frac.", f"{100 * r.unwritten_fraction:.4f}%", f"{100 * e['unwritten_fraction']:.4f}%"),
        ("Max read/mean", f"{r.max_read_over_mean:.4f}", "-"),
        ("Max write/mean", f"{r.max_write_over_mean:.4f}", "-"),
    ]


def format_mixing(r: MixingReport) -> str:
    head = f"N = {r.N}  K = {r.K}  d = {r.d}  rho = {format_ratio(r.rho)}"
    body = _render(["Metric", "Measured", "Theory"], [list(x) for x in mixing_rows(r)])
    return head + "\n" + body


def format_tmto(r: TmtoReport) -> str:
    rows = [
        ["honest cost (Kd)", str(r.honest_cost)],
        ["simulated cost", str(r.simulated_cost)],
        ["simulated ratio", f"{r.penalty_ratio:.4f}"],
        ["analytic bound", format_count(r.analytic_bound)],
        ["analytic ratio", f"{r.analytic_ratio:.4f}"],
        ["mid-run expected ratio", f"{r.midrun_ratio:.4f}"],
        ["misses", str(r.misses)],
        ["mean miss cost", f"{r.mean_miss_cost:.4f}"],
        ["mid-run miss cost", f"{r.midrun_miss_cost:.4f}"],
        ["end-of-run miss cost", f"{r.endrun_miss_cost:.4f}"],
    ]
    head = f"alpha = {r.alpha:g}  rho = {format_ratio(r.rho)}  d = {r.d}  K = {r.K}"
    return head + "\n" + _render(["quantity", "value"], rows)


def to_jsonable(obj):
    """Dataclasses and tuples to plain JSON types; non-finite floats to None."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, bytes):
        return obj.hex()
    if hasattr(obj, "item"):
        return obj.item()
    return obj
