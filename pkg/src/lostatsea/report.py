"""Deterministic CSV/JSON output for computed tables."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Mapping

from . import __version__
from .analytics import AlignmentReport, CohortTables
from .stats import TestResult


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.6f}" if abs(x) != float("inf") else ("inf" if x > 0 else "-inf")
    return str(x)


def _p(test: TestResult | None) -> str:
    return _num(test.p_value) if test is not None else ""


def _alignment_rows(rep: AlignmentReport):
    for r in (rep,) + rep.stratified:
        yield [
            rep.label,
            "all" if r is rep else r.label,
            r.n_groups,
            r.exact_matches,
            r.gender_matches,
            _num(r.exact_rate),
            _num(r.gender_rate),
            _num(r.baseline),
            _p(r.exact_test),
        ]


def table_rows(tables: CohortTables) -> dict[str, tuple[list[str], list[list]]]:
    return {
        "gap_table": (
            ["condition", "n_groups", "delta_self", "delta_peer", "delta_total", "p_self", "p_peer", "p_total"],
            [
                [r.condition, r.n_groups, _num(r.delta_self), _num(r.delta_peer), _num(r.delta_total),
                 _p(r.tests.get("delta_self")), _p(r.tests.get("delta_peer")), _p(r.tests.get("delta_total"))]
                for r in tables.gap_rows
            ],
        ),
        "nomination_table": (
            ["condition", "n_male", "n_non_male", "mean_male", "sd_male", "mean_non_male", "sd_non_male",
             "gap", "t", "df", "p_value"],
            [
                [r.condition, r.n_male, r.n_non_male, _num(r.mean_male), _num(r.sd_male), _num(r.mean_non_male),
                 _num(r.sd_non_male), _num(r.gap), _num(r.test.statistic if r.test else None),
                 _num(r.test.degrees_of_freedom if r.test else None), _p(r.test)]
                for r in tables.nomination_rows
            ],
        ),
        "score_table": (
            ["condition", "n_male", "n_non_male", "mean_male", "sd_male", "mean_non_male", "sd_non_male",
             "gap", "t", "df", "p_value"],
            [
                [r.condition, r.n_male, r.n_non_male, _num(r.mean_male), _num(r.sd_male), _num(r.mean_non_male),
                 _num(r.sd_non_male), _num(r.gap), _num(r.test.statistic if r.test else None),
                 _num(r.test.degrees_of_freedom if r.test else None), _p(r.test)]
                for r in tables.score_rows
            ],
        ),
        "stage_ratio_table": (
            ["condition", "stage", "n_groups", "mixed", "male_only", "non_male_only", "mixed_fraction",
             "male_fraction", "male_ratio", "p_male"],
            [
                [r.condition, r.stage, r.n_groups, r.mixed, r.male_only, r.non_male_only, _num(r.mixed_fraction),
                 _num(r.male_fraction), f"{r.male_only}:{r.single_gender}", _p(r.male_test)]
                for r in tables.stage_ratio_rows
            ],
        ),
        "alignment": (
            ["condition", "stratum", "n_groups", "exact_matches", "gender_matches", "exact_rate", "gender_rate",
             "baseline", "p_value"],
            [row for rep in tables.alignment for row in _alignment_rows(rep)],
        ),
    }


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def emit_report(
    tables: CohortTables,
    out_dir: str | Path,
    manifest: Mapping | None = None,
    fmt: str = "csv",
) -> list[Path]:
    """Write one file per table plus ``report_manifest.json``.

    Output depends only on the arguments, so identical inputs give
    byte-identical files.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown report format {fmt!r}")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    written = []
    rows = table_rows(tables)
    if fmt == "csv":
        for name, (header, body) in rows.items():
            path = out / f"{name}.csv"
            path.write_bytes(_csv_text(header, body).encode("utf-8"))
            written.append(path)
    else:
        doc = {name: [dict(zip(header, map(str, r))) for r in body] for name, (header, body) in rows.items()}
        path = out / "tables.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(path)
    doc = {"package_version": __version__, "format": fmt, "files": [p.name for p in written]}
    doc.update(manifest or {})
    mpath = out / "report_manifest.json"
    mpath.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return written + [mpath]
