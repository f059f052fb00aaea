"""Growth-opportunity reports built from calibrated sector rates."""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from html import escape
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .calibration import DEFAULT_PSF_CODES, BdsRecord, CalibratedSector
from .params import Regime, RegimeKind
from .tables import export_table

AGGREGATE_CODE = "PSF"

# 4-digit NAICS titles used for labels; unknown codes are shown bare.
NAICS_TITLES = {
    "5411": "Legal services",
    "5412": "Accounting, tax preparation, bookkeeping, and payroll services",
    "5413": "Architectural, engineering, and related services",
    "5414": "Specialized design services",
    "5415": "Computer systems design and related services",
    "5416": "Management, scientific, and technical consulting services",
    "5417": "Scientific research and development services",
    "5418": "Advertising, public relations, and related services",
    "5419": "Other professional, scientific, and technical services",
    "4922": "Local messengers and local delivery",
    "3121": "Beverage manufacturing",
    "4861": "Pipeline transportation of crude oil",
    "3362": "Motor vehicle body and trailer manufacturing",
    "4882": "Support activities for rail transportation",
    "3361": "Motor vehicle manufacturing",
    "4541": "Electronic shopping and mail-order houses",
    "7131": "Amusement parks and arcades",
    "5179": "Other telecommunications",
    "5613": "Employment services",
}


class ReportNotice(UserWarning):
    """Non-fatal reporting condition (short ranking, excluded rows...)."""


def _usable(rows: Iterable[CalibratedSector]) -> list[CalibratedSector]:
    return [r for r in rows if r.usable and r.net_growth is not None]


def _growth_order(rows):
    return sorted(rows, key=lambda r: (-r.net_growth, r.sector_code))


def rank_sectors(
    calibrated: Iterable[CalibratedSector], k: int = 10, exclude: Iterable[str] = ()
) -> list[CalibratedSector]:
    """Top ``k`` usable sectors by descending net growth, ties by code."""
    if k < 1:
        raise ValueError("k must be >= 1")
    exclude = set(exclude)
    pool = [r for r in _usable(calibrated) if r.sector_code not in exclude]
    if k > len(pool):
        warnings.warn(f"only {len(pool)} usable sectors for k={k}", ReportNotice, stacklevel=2)
    return _growth_order(pool)[:k]


@dataclass(frozen=True, eq=False)
class OpportunityMatrix:
    """Customer sectors (rows) by expertises (columns).

    ``margins[i, j] = g_i - 2 * phi_j``; a cell is Growth iff its margin is
    strictly positive.
    """

    rows: tuple[str, ...]
    columns: tuple[str, ...]
    row_growth: np.ndarray
    col_speed: np.ndarray
    margins: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.columns)

    def regime(self, i: int, j: int) -> Regime:
        return Regime.from_margin(float(self.margins[i, j]))

    def verdicts(self) -> list[list[RegimeKind]]:
        return [[self.regime(i, j).kind for j in range(len(self.columns))]
                for i in range(len(self.rows))]

    def cells(self):
        """``(row, column, verdict, margin)`` per cell, row-major."""
        for i, r in enumerate(self.rows):
            for j, c in enumerate(self.columns):
                reg = self.regime(i, j)
                yield {"row": r, "column": c, "verdict": reg.kind.value, "margin": reg.margin}


MATRIX_COLUMNS = ("row", "column", "verdict", "margin")


def opportunity_matrix(
    customers: Iterable[CalibratedSector], expertises: Iterable[CalibratedSector]
) -> OpportunityMatrix:
    """Growth/Consolidation verdict for every (customer, expertise) pair."""
    customers, expertises = list(customers), list(expertises)
    not_psf = [e.sector_code for e in expertises if not e.is_psf]
    if not_psf:
        raise ValueError(f"expertise rows must be professional services: {not_psf}")
    rows, cols = _usable(customers), _usable(expertises)
    dropped = len(customers) - len(rows) + len(expertises) - len(cols)
    if dropped:
        warnings.warn(f"{dropped} unusable calibration rows excluded", ReportNotice, stacklevel=2)
    if not rows:
        raise ValueError("no usable customer sectors")
    rows = _growth_order(rows)
    cols = sorted(cols, key=lambda r: r.sector_code)
    g = np.array([r.net_growth for r in rows], dtype=float)
    phi = np.array([c.net_growth for c in cols], dtype=float)
    margins = g[:, None] - 2.0 * phi[None, :]
    return OpportunityMatrix(
        rows=tuple(r.sector_code for r in rows),
        columns=tuple(c.sector_code for c in cols),
        row_growth=g,
        col_speed=phi,
        margins=margins.reshape(len(rows), len(cols)),
    )


def export_matrix(matrix: OpportunityMatrix, path, format: str = "csv") -> Path:
    return export_table(list(matrix.cells()), path, format=format, columns=MATRIX_COLUMNS)


# --------------------------------------------------------------------------
# heatmap
# --------------------------------------------------------------------------

GROWTH_FILL = "#2e9e44"
CONSOLIDATION_FILL = "#d23c3c"


def _label(code: str, titles: Mapping[str, str]) -> str:
    title = titles.get(code)
    return f"{code} {title}" if title else code


def _wrap(text: str, width: int) -> list[str]:
    words, lines, cur = text.split(), [], ""
    for w in words:
        if cur and len(cur) + 1 + len(w) > width:
            lines.append(cur)
            cur = w
        else:
            cur = f"{cur} {w}" if cur else w
    if cur:
        lines.append(cur)
    return lines or [""]


def heatmap_svg(matrix: OpportunityMatrix, titles: Mapping[str, str] = NAICS_TITLES) -> str:
    """SVG document for ``matrix``; a pure function of its input."""
    cell, pad, label_w, font = 44, 10, 330, 11
    col_lines = [_wrap(_label(c, titles), 16) for c in matrix.columns]
    head_h = 14 * max((len(x) for x in col_lines), default=1) + pad
    n_rows, n_cols = matrix.shape
    width = pad + label_w + n_cols * cell + pad
    height = pad + head_h + n_rows * cell + 2 * pad + 16
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="{font}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    x0, y0 = pad + label_w, pad + head_h
    for j, lines in enumerate(col_lines):
        cx = x0 + j * cell + cell // 2
        out.append(f'<text class="col-label" x="{cx}" y="{pad}" text-anchor="middle">')
        for k, line in enumerate(lines):
            out.append(f'<tspan x="{cx}" dy="{14 if k else 10}">{escape(line)}</tspan>')
        out.append("</text>")
    for i, code in enumerate(matrix.rows):
        cy = y0 + i * cell + cell // 2 + font // 3
        out.append(f'<text class="row-label" x="{x0 - 6}" y="{cy}" text-anchor="end">'
                   f"{escape(_label(code, titles))}</text>")
        for j, col in enumerate(matrix.columns):
            reg = matrix.regime(i, j)
            fill = GROWTH_FILL if reg.is_growth else CONSOLIDATION_FILL
            out.append(
                f'<rect class="cell" data-row="{escape(code)}" data-col="{escape(col)}" '
                f'data-verdict="{reg.kind.value}" x="{x0 + j * cell}" y="{y0 + i * cell}" '
                f'width="{cell - 2}" height="{cell - 2}" fill="{fill}">'
                f"<title>{escape(code)} x {escape(col)}: {reg.kind.value}, "
                f"margin {reg.margin:+.4%} per year</title></rect>"
            )
    ly = y0 + n_rows * cell + pad + 12
    out.append(f'<rect x="{pad}" y="{ly - 10}" width="12" height="12" fill="{GROWTH_FILL}"/>')
    out.append(f'<text x="{pad + 16}" y="{ly}">Growth (g &gt; 2 phi)</text>')
    out.append(f'<rect x="{pad + 150}" y="{ly - 10}" width="12" height="12" fill="{CONSOLIDATION_FILL}"/>')
    out.append(f'<text x="{pad + 166}" y="{ly}">Consolidation</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_heatmap(matrix: OpportunityMatrix, path, titles: Mapping[str, str] = NAICS_TITLES) -> Path:
    if 0 in matrix.shape:
        raise ValueError("cannot render an empty matrix")
    path = Path(path)
    path.write_bytes(heatmap_svg(matrix, titles).encode("utf-8"))
    return path


# --------------------------------------------------------------------------
# practice count series
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesPoint:
    year: int
    sector_code: str
    firm_count: int


SERIES_COLUMNS = ("year", "sector_code", "firm_count")


def psf_count_series(
    records: Iterable[BdsRecord], psf_codes: Iterable[str] = DEFAULT_PSF_CODES
) -> list[SeriesPoint]:
    """Firm counts per (year, PSF code) plus an all-PSF ``"PSF"`` aggregate."""
    psf_codes = set(psf_codes)
    points, agg = [], defaultdict(int)
    for r in records:
        if r.sector_code in psf_codes:
            points.append(SeriesPoint(r.year, r.sector_code, r.num_firms))
            agg[r.year] += r.num_firms
    points.extend(SeriesPoint(y, AGGREGATE_CODE, n) for y, n in agg.items())
    return sorted(points, key=lambda p: (p.sector_code == AGGREGATE_CODE, p.sector_code, p.year))


@dataclass(frozen=True)
class SeriesSlope:
    sector_code: str
    start_year: int
    end_year: int
    slope: float  # d ln(count) / d year
    stderr: float
    points: int


def series_slope(points: Iterable[SeriesPoint], start: int, end: int,
                 code: str = AGGREGATE_CODE) -> SeriesSlope:
    """Log-linear trend of one series over ``[start, end]``."""
    sel = sorted((p.year, p.firm_count) for p in points
                 if p.sector_code == code and start <= p.year <= end and p.firm_count > 0)
    if len(sel) < 3:
        raise ValueError(f"need >= 3 points of {code} in {start}-{end}, got {len(sel)}")
    years, counts = np.array(sel, dtype=float).T
    res = stats.linregress(years, np.log(counts))
    return SeriesSlope(code, start, end, float(res.slope), float(res.stderr), len(sel))


def decade_slopes(points: Sequence[SeriesPoint], code: str = AGGREGATE_CODE,
                  early_end: int = 2000) -> list[SeriesSlope]:
    """Trend over the final decade of a series and over its years up to ``early_end``."""
    years = sorted({p.year for p in points if p.sector_code == code})
    if not years:
        return []
    last = years[-1]
    out = [series_slope(points, last - 10, last, code)]
    if years[0] < early_end:
        try:
            out.append(series_slope(points, years[0], early_end, code))
        except ValueError:
            pass
    return out


SLOPE_COLUMNS = ("sector_code", "start_year", "end_year", "slope", "stderr", "points")


def matrix_is_coherent(matrix: OpportunityMatrix) -> bool:
    """No cell may claim Growth with a non-positive margin."""
    return all(
        (v is RegimeKind.GROWTH) == (matrix.margins[i, j] > 0)
        for i, row in enumerate(matrix.verdicts())
        for j, v in enumerate(row)
    ) and all(math.isfinite(m) for m in matrix.margins.ravel())
