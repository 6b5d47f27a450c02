"""Report rendering: one CSV per table plus a Markdown document.

Numbers are rounded for presentation (1 decimal for descriptives, 3 for test
statistics, scientific notation for p < .001) and p-values carry significance
stars. Full-precision values go to ``results.json``.
"""

from __future__ import annotations

import csv
import json
import math
import os
from pathlib import Path
from typing import Any

from .analysis import AnalysisEntry, AnalysisReport
from .measurements import MEASURES
from .survey import QUESTIONS, DescriptiveStats

FOOTNOTE = "* p<.05, ** p<.01, *** p<.001"
NA = "n/a"

SURVEY_ROWS = ("Valid", "Missing", "Mean", "Median", "Stdev", "Skewness", "StderrSkew")
MEASURE_ROWS = ("Valid", "Missing", "Mean", "Median", "Stdev", "Variance", "Skewness", "Std. Error Skewness")

# file name, title, has p-value footnote
TABLES: tuple[tuple[str, str, bool], ...] = (
    ("table2_survey_descriptives.csv", "Table 2. Survey responses per claim (1 = strongly agree, 5 = strongly disagree)", False),
    ("table3_friedman.csv", "Table 3. Change of ratings across sprints (Friedman)", True),
    ("table3_posthoc.csv", "Table 3a. Sprint-pair Wilcoxon signed-rank tests, Bonferroni-adjusted", True),
    ("table4_value_associations.csv", "Table 4. Practice claims vs. agile-values claim (Kendall)", True),
    ("table5_role_effects.csv", "Table 5. Role effects on ratings (Kruskal-Wallis)", True),
    ("table5_dunn.csv", "Table 5a. Role-pair Dunn tests, Bonferroni-adjusted", True),
    ("table5_missing_by_role.csv", "Table 5b. Missing ratings per role", False),
    ("table6_team_agreement.csv", "Table 6. Within-team agreement (Krippendorff's alpha, ordinal)", False),
    ("table6_team_agreement_alt.csv", "Table 6a. Within-team agreement, alternate Product Owner scope", False),
    ("table6_role_agreement.csv", "Table 6b. Agreement within each role across teams", False),
    ("table7_measurement_descriptives.csv", "Table 7. Development data measurements", False),
    ("table7_histograms.csv", "Table 7a. Histogram bin counts per measurement", False),
    ("table8_survey_measurement.csv", "Table 8. Survey claims vs. development data (Kendall)", True),
)


def stars(p: float | None) -> str:
    if p is None:
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def fmt_p(p: float | None) -> str:
    if p is None:
        return NA
    if p < 0.001:
        mantissa, exp = f"{p:.1e}".split("e")
        text = f"{mantissa}e{int(exp)}"
    else:
        text = f"{p:.3f}"
    return text + stars(p)


def fmt3(v: float | None) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return NA
    text = f"{v:.3f}"
    return "0.000" if text == "-0.000" else text


def fmt1(v: float | None) -> str:
    if v is None:
        return ""
    text = f"{v:.1f}"
    return "0.0" if text == "-0.0" else text


def _survey_row(name: str, s: DescriptiveStats) -> str:
    return {
        "Valid": str(s.valid),
        "Missing": str(s.missing),
        "Mean": fmt1(s.mean),
        "Median": fmt1(s.median),
        "Stdev": fmt1(s.stdev),
        "Skewness": fmt1(s.skewness),
        "StderrSkew": fmt1(s.stderr_skewness),
    }[name]


def _measure_row(name: str, s: DescriptiveStats) -> str:
    return {
        "Valid": fmt1(float(s.valid)),
        "Missing": fmt1(float(s.missing)),
        "Mean": fmt1(s.mean),
        "Median": fmt1(s.median),
        "Stdev": fmt1(s.stdev),
        "Variance": fmt1(s.variance),
        "Skewness": fmt1(s.skewness),
        "Std. Error Skewness": fmt1(s.stderr_skewness),
    }[name]


def _chi_rows(entries: list[AnalysisEntry]) -> list[list[str]]:
    rows = []
    for e in entries:
        if e.result is None:
            rows.append([e.label, NA, NA])
        else:
            rows.append([e.label, fmt3(e.result.statistic), fmt_p(e.result.p_value)])
    return rows


def _tau_rows(entries: list[AnalysisEntry]) -> list[list[str]]:
    rows = []
    for e in entries:
        if e.result is None:
            rows.append([e.label, NA, NA, NA])
        else:
            rows.append([e.label, fmt3(e.result.statistic), fmt3(e.result.extras["z"]), fmt_p(e.result.p_value)])
    return rows


def _posthoc_rows(entries: list[AnalysisEntry]) -> list[list[str]]:
    rows = []
    for e in entries:
        if e.result is None:
            continue
        for p in e.result.posthoc:
            rows.append([e.label, p.group_a, p.group_b, fmt3(p.z), fmt_p(p.p_adjusted)])
    return rows


def _alpha_table(entries: list[AnalysisEntry], first: str) -> list[list[str]]:
    header = [first] + [e.label for e in entries]
    values = ["α"] + [NA if e.result is None else fmt3(e.result.statistic) for e in entries]
    return [header, values]


def build_tables(report: AnalysisReport) -> dict[str, list[list[str]]]:
    """All report tables as lists of rows (first row is the header)."""
    t: dict[str, list[list[str]]] = {}
    sd = report.survey_descriptives
    t["table2_survey_descriptives.csv"] = [[""] + [q.value for q in QUESTIONS]] + [
        [name] + [_survey_row(name, sd[q]) for q in QUESTIONS] for name in SURVEY_ROWS
    ]
    t["table3_friedman.csv"] = [["Question", "χ²", "p-value"]] + _chi_rows(report.perception_change)
    t["table3_posthoc.csv"] = [["Question", "Sprint A", "Sprint B", "Z", "p-value"]] + _posthoc_rows(
        report.perception_change
    )
    t["table4_value_associations.csv"] = [["Relationship", "τ", "Z", "p-value"]] + _tau_rows(report.value_associations)
    t["table5_role_effects.csv"] = [["Question", "χ²", "p-value"]] + _chi_rows(report.role_effects)
    t["table5_dunn.csv"] = [["Question", "Role A", "Role B", "Z", "p-value"]] + _posthoc_rows(report.role_effects)
    roles = ["ProductOwner", "ScrumMaster", "Developer"]
    t["table5_missing_by_role.csv"] = [["Question"] + roles] + [
        [e.label] + [str(e.info["missing_by_role"][r]) for r in roles] for e in report.role_effects
    ]
    t["table6_team_agreement.csv"] = _alpha_table(report.team_agreement, "Team")
    t["table6_team_agreement_alt.csv"] = _alpha_table(report.team_agreement_alt, "Team")
    t["table6_role_agreement.csv"] = _alpha_table(report.role_agreement, "Role")
    if report.measurement_descriptives is not None:
        md = report.measurement_descriptives
        t["table7_measurement_descriptives.csv"] = [[""] + [m.value for m in MEASURES]] + [
            [name] + [_measure_row(name, md[m]) for m in MEASURES] for name in MEASURE_ROWS
        ]
        hist_rows = [["Measure", "Bin", "Lower", "Upper", "Count"]]
        for m in MEASURES:
            edges, counts = report.measurement_histograms[m]
            for i, c in enumerate(counts):
                hist_rows.append([m.value, str(i + 1), f"{edges[i]:.6g}", f"{edges[i + 1]:.6g}", str(c)])
        t["table7_histograms.csv"] = hist_rows
    if report.survey_measurement_associations is not None:
        t["table8_survey_measurement.csv"] = [["Relationship", "Kendall's-τ", "Z", "p-value"]] + _tau_rows(
            report.survey_measurement_associations
        )
    return t


def _entry_json(e: AnalysisEntry) -> dict[str, Any]:
    return {
        "label": e.label,
        "n": e.n,
        "reason": e.reason,
        "info": e.info,
        "result": None if e.result is None else e.result.to_dict(),
    }


def _stats_json(s: DescriptiveStats) -> dict[str, Any]:
    return dict(s.__dict__)


def results_json(report: AnalysisReport) -> dict[str, Any]:
    out: dict[str, Any] = {
        "metadata": report.metadata,
        "config": report.config.canonical(),
        "survey_descriptives": {q.value: _stats_json(s) for q, s in report.survey_descriptives.items()},
        "perception_change": [_entry_json(e) for e in report.perception_change],
        "value_associations": [_entry_json(e) for e in report.value_associations],
        "role_effects": [_entry_json(e) for e in report.role_effects],
        "team_agreement": [_entry_json(e) for e in report.team_agreement],
        "team_agreement_alt": [_entry_json(e) for e in report.team_agreement_alt],
        "role_agreement": [_entry_json(e) for e in report.role_agreement],
    }
    if report.measurement_descriptives is not None:
        out["measurement_descriptives"] = {m.value: _stats_json(s) for m, s in report.measurement_descriptives.items()}
    if report.survey_measurement_associations is not None:
        out["survey_measurement_associations"] = [_entry_json(e) for e in report.survey_measurement_associations]
    return out


def _write_csv(path: Path, rows: list[list[str]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def write_report(report: AnalysisReport, out_dir: str | os.PathLike) -> Path:
    """Write every table CSV, ``results.json``, ``metadata.json`` and ``report.md`` into ``out_dir``."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    for name, rows in build_tables(report).items():
        _write_csv(root / name, rows)
    with open(root / "results.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(results_json(report), fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    with open(root / "metadata.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump({**report.metadata, "config": report.config.canonical()}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_document(root)
    return root


def _markdown_table(rows: list[list[str]]) -> list[str]:
    header, body = rows[0], rows[1:]
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in body]
    return lines


def render_document(report_dir: str | os.PathLike) -> str:
    """Render the Markdown report from the table CSVs in ``report_dir``."""
    root = Path(report_dir)
    lines = ["# Agile practice analysis report", ""]
    meta_path = root / "metadata.json"
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        for key in ("dataset_id", "config_hash", "timestamp"):
            lines.append(f"- {key}: {meta.get(key, NA)}")
        lines.append("")
    for name, title, footnote in TABLES:
        path = root / name
        if not path.exists():
            continue
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
        lines += [f"## {title}", ""]
        if len(rows) <= 1:
            lines += ["(no rows)", ""]
            continue
        lines += _markdown_table(rows)
        if footnote:
            lines += ["", FOOTNOTE]
        lines.append("")
    return "\n".join(lines)


def write_document(report_dir: str | os.PathLike) -> Path:
    path = Path(report_dir) / "report.md"
    path.write_text(render_document(report_dir), encoding="utf-8", newline="\n")
    return path
