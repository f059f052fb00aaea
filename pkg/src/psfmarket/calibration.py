"""Calibration of sector rates from Business Dynamics Statistics tables.

Every estimator is a mean of per-year ratios of integer counts.  Means are
computed in exact rational arithmetic and rounded once, so results do not
depend on row order and are bit-reproducible.
"""

from __future__ import annotations

import csv
import io
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .errors import DataFormatError, InsufficientDataError
from .tables import export_table, optional, parse_bool, read_table

DEFAULT_PSF_CODES = frozenset(
    {"5411", "5412", "5413", "5414", "5415", "5416", "5417", "5418", "5419"}
)
DEFAULT_SUPPRESSION = ("", "(D)", "(S)", "N")
MIN_OBSERVATIONS = 3
LITERAL_LABEL = "literal (dimensionally suspect)"


class DataWarning(UserWarning):
    """An observation was skipped or looks inconsistent."""


@dataclass(frozen=True)
class BdsRecord:
    year: int
    sector_code: str
    num_firms: int
    num_entrants: int
    num_exits: int
    employment: int


@dataclass(frozen=True)
class ColumnMap:
    """Source column names for each record field.

    Defaults follow the Census BDS 4-digit sector table: firm counts,
    establishment entries, firm deaths and employment.
    """

    year: str = "year"
    sector_code: str = "vcnaics4"
    num_firms: str = "firms"
    num_entrants: str = "estabs_entry"
    num_exits: str = "firmdeath_firms"
    employment: str = "emp"

    def items(self):
        return [(f, getattr(self, f)) for f in
                ("year", "sector_code", "num_firms", "num_entrants", "num_exits", "employment")]


@dataclass
class ParseSummary:
    rows_read: int = 0
    records: int = 0
    dropped: int = 0
    dropped_by_column: Counter = field(default_factory=Counter)
    exits_exceed_firms: list = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"rows read: {self.rows_read}", f"records: {self.records}",
               f"rows dropped (suppressed/missing): {self.dropped}"]
        for col, n in sorted(self.dropped_by_column.items()):
            out.append(f"  missing {col}: {n}")
        for code, year in self.exits_exceed_firms:
            out.append(f"flag: exits exceed firms in {code} {year}")
        return out


def _int_cell(text: str, column: str, line: int) -> int:
    try:
        value = int(text)
    except ValueError:
        try:
            f = float(text)
        except ValueError:
            raise DataFormatError(f"line {line}: column {column!r}: not a number: {text!r}") from None
        if not f.is_integer():
            raise DataFormatError(f"line {line}: column {column!r}: not a count: {text!r}")
        value = int(f)
    if value < 0:
        raise DataFormatError(f"line {line}: column {column!r}: negative count {value}")
    return value


def parse_bds(
    source,
    column_map: ColumnMap | None = None,
    delimiter: str = ",",
    suppression: Sequence[str] = DEFAULT_SUPPRESSION,
) -> tuple[list[BdsRecord], ParseSummary]:
    """Read sector-year rows from a delimited text stream or path.

    Rows with a suppressed or missing value in any mapped column are
    dropped and tallied in the returned summary.

    Raises
    ------
    DataFormatError
        Missing mapped column, unparseable year or count, or a duplicate
        (sector, year) pair.
    """
    cmap = column_map or ColumnMap()
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8-sig") as fh:
            return parse_bds(fh, cmap, delimiter, suppression)
    if isinstance(source, bytes):
        source = io.StringIO(source.decode("utf-8-sig"))
    markers = {m.strip() for m in suppression}
    reader = csv.reader(source, delimiter=delimiter)
    header = next(reader, None)
    if header is None:
        raise DataFormatError("empty input: header row missing")
    header = [h.strip().lstrip("\ufeff") for h in header]
    index = {}
    for fld, col in cmap.items():
        if col not in header:
            raise DataFormatError(f"missing mapped column {col!r} (for {fld})")
        index[fld] = header.index(col)

    summary = ParseSummary()
    records: list[BdsRecord] = []
    seen = set()
    for line, raw in enumerate(reader, start=2):
        if not raw or all(not c.strip() for c in raw):
            continue
        summary.rows_read += 1
        cells = {f: (raw[i].strip() if i < len(raw) else "") for f, i in index.items()}
        missing = [f for f, v in cells.items() if v in markers]
        if missing:
            summary.dropped += 1
            for f in missing:
                summary.dropped_by_column[getattr(cmap, f)] += 1
            continue
        try:
            year = int(cells["year"])
        except ValueError:
            raise DataFormatError(f"line {line}: unparseable year {cells['year']!r}") from None
        code = cells["sector_code"]
        key = (code, year)
        if key in seen:
            raise DataFormatError(f"line {line}: duplicate sector {code} year {year}")
        seen.add(key)
        rec = BdsRecord(
            year=year,
            sector_code=code,
            **{f: _int_cell(cells[f], getattr(cmap, f), line)
               for f in ("num_firms", "num_entrants", "num_exits", "employment")},
        )
        if rec.num_exits > rec.num_firms:
            summary.exits_exceed_firms.append(key)
        records.append(rec)
    summary.records = len(records)
    return records, summary


@dataclass(frozen=True)
class CalibrationWindow:
    """Inclusive range of calendar years used by the estimators."""

    start_year: int = 2008
    end_year: int = 2018

    def __post_init__(self):
        if self.end_year < self.start_year:
            raise ValueError("end_year must be >= start_year")

    @property
    def length(self) -> int:
        return self.end_year - self.start_year + 1

    def __contains__(self, year) -> bool:
        return self.start_year <= year <= self.end_year

    @classmethod
    def parse(cls, text: str) -> "CalibrationWindow":
        try:
            a, b = text.split(":")
            return cls(int(a), int(b))
        except ValueError:
            raise ValueError(f"window must look like START:END, got {text!r}") from None


def _by_year(records: Iterable[BdsRecord], window: CalibrationWindow) -> dict[int, BdsRecord]:
    out = {}
    codes = set()
    for r in records:
        codes.add(r.sector_code)
        if r.year in window:
            out[r.year] = r
    if len(codes) > 1:
        raise ValueError(f"records span several sectors: {sorted(codes)}")
    return out


def _mean(values: list[Fraction], what: str, minimum: int = MIN_OBSERVATIONS) -> float:
    if len(values) < minimum:
        raise InsufficientDataError(f"{what}: {len(values)} usable observations, need {minimum}")
    return float(sum(values, Fraction(0)) / len(values))


def _ratio_obs(records, window, numerator: str) -> list[Fraction]:
    obs = []
    for year, r in sorted(_by_year(records, window).items()):
        if r.num_firms == 0:
            warnings.warn(f"{r.sector_code} {year}: zero firms, year skipped", DataWarning, stacklevel=3)
            continue
        obs.append(Fraction(getattr(r, numerator), r.num_firms))
    return obs


def _growth_obs(records, window) -> list[Fraction]:
    years = _by_year(records, window)
    obs = []
    for year in sorted(years):
        nxt = years.get(year + 1)
        if nxt is None:
            continue
        e0 = years[year].employment
        if e0 == 0:
            warnings.warn(f"{nxt.sector_code} {year}: zero employment, pair skipped",
                          DataWarning, stacklevel=3)
            continue
        obs.append(Fraction(nxt.employment - e0, e0))
    return obs


def estimate_exit_rate(records: Iterable[BdsRecord], window: CalibrationWindow) -> float:
    """Mean yearly share of firms exiting (failure rate)."""
    return _mean(_ratio_obs(list(records), window, "num_exits"), "exit rate")


def estimate_entry_rate(records: Iterable[BdsRecord], window: CalibrationWindow) -> float:
    """Mean yearly ratio of entrants to existing firms."""
    return _mean(_ratio_obs(list(records), window, "num_entrants"), "entry rate")


def estimate_net_growth(records: Iterable[BdsRecord], window: CalibrationWindow) -> float:
    """Mean yearly employment growth over consecutive year pairs in the window.

    Proxy for ``alpha*psi - mu`` on customer sectors and for the training
    speed ``phi`` on professional-services sectors.
    """
    return _mean(_growth_obs(list(records), window), "net growth")


class LiteralEstimate(NamedTuple):
    value: float
    label: str = LITERAL_LABEL


def estimate_training_speed_literal(records: Iterable[BdsRecord], window: CalibrationWindow) -> LiteralEstimate:
    """Training speed from the literal growth-plus-turnover expression, kept for comparison only.

    Mean over year pairs of ``dE/E * N_entry/N + N_exit/N_entry``.  The
    second term is of order one, so the result is on a different scale
    from ``estimate_net_growth``.
    """
    years = _by_year(list(records), window)
    obs = []
    for year in sorted(years):
        r, nxt = years[year], years.get(year + 1)
        if nxt is None or r.employment == 0 or r.num_firms == 0:
            continue
        if r.num_entrants == 0:
            raise InsufficientDataError(f"{r.sector_code} {year}: zero entrants")
        obs.append(
            Fraction(nxt.employment - r.employment, r.employment) * Fraction(r.num_entrants, r.num_firms)
            + Fraction(r.num_exits, r.num_entrants)
        )
    return LiteralEstimate(_mean(obs, "literal training speed"))


@dataclass(frozen=True)
class CalibratedSector:
    """Calibrated rates of one sector.

    ``net_growth`` is the employment-growth proxy: ``g`` for customer
    sectors, the training speed ``phi`` for professional-services sectors.
    Rates are ``None`` when they could not be estimated.
    """

    sector_code: str
    is_psf: bool
    usable: bool
    years_used: int
    window_start: int
    window_end: int
    exit_rate: float | None
    entry_rate: float | None
    net_growth: float | None
    note: str = ""


CALIBRATION_COLUMNS = tuple(f for f in CalibratedSector.__dataclass_fields__)


def calibrate_sector(records: Sequence[BdsRecord], window: CalibrationWindow, is_psf: bool) -> CalibratedSector:
    code = records[0].sector_code
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DataWarning)
        exit_obs = _ratio_obs(records, window, "num_exits")
        entry_obs = _ratio_obs(records, window, "num_entrants")
        growth_obs = _growth_obs(records, window)
    notes = sorted({str(w.message) for w in caught})

    def mean_or_none(obs, what):
        try:
            return _mean(obs, what)
        except InsufficientDataError as err:
            notes.append(str(err))
            return None

    exit_rate = mean_or_none(exit_obs, "exit rate")
    entry_rate = mean_or_none(entry_obs, "entry rate")
    growth = mean_or_none(growth_obs, "net growth")
    usable = None not in (exit_rate, entry_rate, growth)
    return CalibratedSector(
        sector_code=code,
        is_psf=is_psf,
        usable=usable,
        years_used=len(exit_obs),
        window_start=window.start_year,
        window_end=window.end_year,
        exit_rate=exit_rate,
        entry_rate=entry_rate,
        net_growth=growth,
        note="; ".join(notes),
    )


def group_by_sector(records: Iterable[BdsRecord]) -> dict[str, list[BdsRecord]]:
    groups = defaultdict(list)
    for r in records:
        groups[r.sector_code].append(r)
    return {code: sorted(rs, key=lambda r: r.year) for code, rs in sorted(groups.items())}


def calibrate_all(
    records: Iterable[BdsRecord],
    window: CalibrationWindow | None = None,
    psf_codes: Iterable[str] = DEFAULT_PSF_CODES,
) -> list[CalibratedSector]:
    """One calibrated row per sector, ordered by sector code.

    Sectors lacking data are kept but flagged ``usable=False``.
    """
    window = window or CalibrationWindow()
    psf_codes = set(psf_codes)
    return [calibrate_sector(rs, window, code in psf_codes)
            for code, rs in group_by_sector(records).items()]


def aggregate_records(records: Iterable[BdsRecord], code: str = "ALL",
                      exclude: Iterable[str] = ()) -> list[BdsRecord]:
    """Economy-wide records: per-year sums over sectors."""
    exclude = set(exclude)
    sums = defaultdict(lambda: [0, 0, 0, 0])
    for r in records:
        if r.sector_code in exclude:
            continue
        acc = sums[r.year]
        acc[0] += r.num_firms
        acc[1] += r.num_entrants
        acc[2] += r.num_exits
        acc[3] += r.employment
    return [BdsRecord(y, code, *v) for y, v in sorted(sums.items())]


_CALIBRATION_TYPES = {
    "is_psf": parse_bool,
    "usable": parse_bool,
    "years_used": int,
    "window_start": int,
    "window_end": int,
    "exit_rate": optional(float),
    "entry_rate": optional(float),
    "net_growth": optional(float),
}


def write_calibration(rows: Sequence[CalibratedSector], path, format: str = "csv", delimiter: str = ","):
    return export_table(rows, path, format=format, columns=CALIBRATION_COLUMNS, delimiter=delimiter)


def read_calibration(path, format: str = "csv", delimiter: str = ",") -> list[CalibratedSector]:
    """Inverse of ``write_calibration``.

    Delimited tables may omit optional columns (``usable``, ``years_used``,
    window, ``note``) so hand-written parameter tables load too.
    """
    columns, rows = read_table(path, format=format, types=_CALIBRATION_TYPES, delimiter=delimiter)
    for needed in ("sector_code", "net_growth"):
        if needed not in columns:
            raise DataFormatError(f"calibration table lacks column {needed!r}")
    out = []
    for r in rows:
        code = str(r["sector_code"])
        out.append(CalibratedSector(
            sector_code=code,
            is_psf=bool(r.get("is_psf", code in DEFAULT_PSF_CODES)),
            usable=bool(r.get("usable", r.get("net_growth") is not None)),
            years_used=int(r.get("years_used", 0) or 0),
            window_start=int(r.get("window_start", 0) or 0),
            window_end=int(r.get("window_end", 0) or 0),
            exit_rate=r.get("exit_rate"),
            entry_rate=r.get("entry_rate"),
            net_growth=r.get("net_growth"),
            note=r.get("note") or "",
        ))
    return out
