"""Report files: metric tables, prediction dumps, curve points, calendar maps.

CSV outputs follow the ingestion convention (format-version comment line,
then header). The calendar map is a standalone SVG with one cell per test
day, colored by outcome class at the report origin.
"""

from __future__ import annotations

import csv
from datetime import date, timedelta
from pathlib import Path
from typing import Mapping, Sequence
from xml.etree import ElementTree as ET

from .backtest import DayOutcome, EvalReport, PredictionRecord
from .dataio import FORMAT_VERSION_LINE
from .explain import GroupImportance
from .metrics import curve_points
from .series import Section
from .synthgen import CalibrationReport

SECTION_TITLES = {
    Section.BEDOCCUPYING: "Bedoccupying",
    Section.MEDICAL: "Medical",
    Section.SURGICAL: "Surgical",
    Section.CRITICAL: "Critical",
}

METRICS_HEADER = [
    "target", "origin", "F1", "TPR", "TNR", "PPV", "NPV", "FPR", "FNR", "ACC",
    "AUROC (CI)", "PRAUC (CI)",
]

#: Outcome-class fill colors: dark green TP, dark red FP, light green TN,
#: light red FN.
DEFAULT_OUTCOME_COLORS = {
    "TP": "#1a7f37",
    "FP": "#b91c1c",
    "TN": "#aceebb",
    "FN": "#fecaca",
}


def _fmt(value: float) -> str:
    if value != value:  # NaN
        return "NA"
    return f"{value:.4f}"


def _fmt_ci(metric) -> str:
    if metric is None:
        return "NA"
    return f"{metric.point:.4f} ({metric.ci_low:.4f}-{metric.ci_high:.4f})"


def _open_csv(path: str | Path):
    fh = Path(path).open("w", newline="")
    fh.write(FORMAT_VERSION_LINE + "\n")
    return fh


def write_metrics_csv(report: EvalReport, path: str | Path) -> None:
    """Metric table: one row per (target section, origin), 12 columns."""
    with _open_csv(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for cell in report.cells:
            r = cell.rates
            writer.writerow([
                SECTION_TITLES[cell.section],
                cell.origin_hour,
                _fmt(r.f1), _fmt(r.tpr), _fmt(r.tnr), _fmt(r.ppv), _fmt(r.npv),
                _fmt(r.fpr), _fmt(r.fnr), _fmt(r.acc),
                _fmt_ci(cell.auroc), _fmt_ci(cell.auprc),
            ])


def write_predictions_csv(records: Sequence[PredictionRecord], path: str | Path) -> None:
    with _open_csv(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "section", "origin", "probability", "true_label"])
        for r in records:
            writer.writerow([
                r.date.isoformat(), r.section.value, r.origin_hour,
                repr(r.probability), r.true_label,
            ])


def write_outcomes_csv(report: EvalReport, path: str | Path) -> None:
    with _open_csv(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "section", "probability", "true_label", "outcome"])
        for o in report.outcomes:
            writer.writerow([
                o.date.isoformat(), o.section.value, repr(o.probability),
                o.true_label, o.outcome,
            ])


def write_curve_points_csv(records: Sequence[PredictionRecord], path: str | Path) -> None:
    """ROC / precision-recall operating points for every (section, origin)."""
    cells: dict[tuple[str, int], list[PredictionRecord]] = {}
    for r in records:
        cells.setdefault((r.section.value, r.origin_hour), []).append(r)
    with _open_csv(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["section", "origin", "threshold", "tpr", "fpr", "precision", "recall"])
        for (section, origin) in sorted(cells):
            for p in curve_points(cells[(section, origin)]):
                writer.writerow([
                    section, origin, repr(p.threshold),
                    _fmt(p.tpr), _fmt(p.fpr), _fmt(p.precision), _fmt(p.recall),
                ])


def write_shap_groups_csv(importance: GroupImportance, path: str | Path) -> None:
    with _open_csv(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "mean_abs_shap", "rank"])
        for rank, (group, value) in enumerate(importance.ranked(), start=1):
            writer.writerow([group, repr(value), rank])


def write_calibration_csv(report: CalibrationReport, path: str | Path) -> None:
    def flag(value) -> str:
        if value is None:
            return "NA"
        return "true" if value else "false"

    with _open_csv(path) as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "section", "n_days", "prevalence", "target", "prevalence_ok",
            "morning_max_incidence", "morning_zero_ok", "peak_hour", "peak_ok",
            "weekday_prevalence", "weekend_prevalence", "weekend_ok", "ok",
        ])
        for r in report.rows:
            writer.writerow([
                r.section.value, r.n_days, _fmt(r.prevalence),
                _fmt(r.target) if r.target is not None else "NA",
                flag(r.prevalence_ok), _fmt(r.morning_max_incidence),
                flag(r.morning_zero_ok), r.peak_hour, flag(r.peak_ok),
                _fmt(r.weekday_prevalence), _fmt(r.weekend_prevalence),
                flag(r.weekend_ok), flag(r.ok),
            ])


_MONTHS = ("Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec")
_WEEKDAYS = ("Mon", "", "Wed", "", "Fri", "", "Sun")
_CELL = 13
_GAP = 2
_LEFT = 34
_TOP = 30


def write_calendar_svg(
    outcomes: Sequence[DayOutcome],
    section: Section,
    path: str | Path,
    colors: Mapping[str, str] | None = None,
) -> None:
    """Calendar heatmap of per-day outcome classes for one section.

    Weeks run left to right, weekdays top to bottom (Monday first); each
    test day is one cell filled with its outcome-class color.
    """
    colors = dict(DEFAULT_OUTCOME_COLORS if colors is None else colors)
    days = sorted((o for o in outcomes if o.section == section), key=lambda o: o.date)
    if not days:
        raise ValueError(f"no outcomes for section {section.value}")
    first, last = days[0].date, days[-1].date
    grid_start = first - timedelta(days=first.weekday())  # back to Monday
    n_weeks = (last - grid_start).days // 7 + 1

    width = _LEFT + n_weeks * (_CELL + _GAP) + 10
    height = _TOP + 7 * (_CELL + _GAP) + 40
    svg = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        width=str(width),
        height=str(height),
        viewBox=f"0 0 {width} {height}",
    )
    title = ET.SubElement(svg, "text", x="4", y="14")
    title.set("font-family", "sans-serif")
    title.set("font-size", "12")
    title.text = (
        f"{SECTION_TITLES[section]}: daily outcomes "
        f"({first.isoformat()} to {last.isoformat()})"
    )

    for i, name in enumerate(_WEEKDAYS):
        if not name:
            continue
        lbl = ET.SubElement(
            svg, "text", x="2", y=str(_TOP + i * (_CELL + _GAP) + _CELL - 3)
        )
        lbl.set("font-family", "sans-serif")
        lbl.set("font-size", "9")
        lbl.text = name

    seen_months: set[tuple[int, int]] = set()
    for o in days:
        week = (o.date - grid_start).days // 7
        row = o.date.weekday()
        x = _LEFT + week * (_CELL + _GAP)
        y = _TOP + row * (_CELL + _GAP)
        rect = ET.SubElement(
            svg, "rect", x=str(x), y=str(y), width=str(_CELL), height=str(_CELL),
            fill=colors[o.outcome],
        )
        rect.set("shape-rendering", "crispEdges")
        cell_title = ET.SubElement(rect, "title")
        cell_title.text = f"{o.date.isoformat()}: {o.outcome} (p={o.probability:.3f})"
        month_key = (o.date.year, o.date.month)
        if month_key not in seen_months and o.date.day <= 7:
            seen_months.add(month_key)
            lbl = ET.SubElement(svg, "text", x=str(x), y=str(_TOP - 6))
            lbl.set("font-family", "sans-serif")
            lbl.set("font-size", "9")
            lbl.text = _MONTHS[o.date.month - 1]

    legend_y = _TOP + 7 * (_CELL + _GAP) + 16
    x = _LEFT
    for outcome in ("TP", "FP", "TN", "FN"):
        ET.SubElement(
            svg, "rect", x=str(x), y=str(legend_y), width=str(_CELL),
            height=str(_CELL), fill=colors[outcome],
        )
        lbl = ET.SubElement(svg, "text", x=str(x + _CELL + 3), y=str(legend_y + _CELL - 3))
        lbl.set("font-family", "sans-serif")
        lbl.set("font-size", "9")
        lbl.text = outcome
        x += 58

    ET.ElementTree(svg).write(path, xml_declaration=True, encoding="unicode")
