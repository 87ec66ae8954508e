"""Alert ingestion: parse canonical alert logs, validate records, deduplicate.

The canonical on-disk formats are CSV (header
``timestamp,src_ip,src_port,dst_ip,dst_port,signature,category``, RFC-3339
timestamps, empty port field = no port) and JSONL (one object per line,
same field names, ``null``/missing = no port).  A converter from Snort's
"fast" alert format is included as an optional extra; the core pipeline
only ever sees canonical files.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .errors import MalformedLineError

CSV_HEADER = ("timestamp", "src_ip", "src_port", "dst_ip", "dst_port", "signature", "category")

FORMAT_CSV = "canonical-csv"
FORMAT_JSONL = "canonical-jsonl"
FORMATS = (FORMAT_CSV, FORMAT_JSONL)

_IPV4_RE = re.compile(r"^(\d{1,3})\.(\d{1,3})\.(\d{1,3})\.(\d{1,3})$", re.ASCII)


def _check_ipv4(value: str, field: str) -> None:
    m = _IPV4_RE.match(value)
    if m is None:
        raise ValueError(f"{field} {value!r} is not a dotted-quad IPv4 address")
    for octet in m.groups():
        if int(octet) > 255:
            raise ValueError(f"{field} {value!r} has octet {octet} out of range 0-255")


def _check_port(value: int | None, field: str) -> None:
    if value is None:
        return
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= 65535:
        raise ValueError(f"{field} {value!r} is not an integer in 0-65535")


@dataclass(frozen=True)
class Alert:
    """One normalized IDS alert.

    The seven fields are exactly the attributes used to identify duplicate
    alerts; two alerts compare equal iff all seven match.  Ports are None
    for portless protocols (e.g. ICMP) and absent ports compare equal.
    """

    timestamp: datetime
    src_ip: str
    dst_ip: str
    signature: str
    category: str
    src_port: int | None = None
    dst_port: int | None = None

    def __post_init__(self) -> None:
        _check_ipv4(self.src_ip, "src_ip")
        _check_ipv4(self.dst_ip, "dst_ip")
        _check_port(self.src_port, "src_port")
        _check_port(self.dst_port, "dst_port")
        if not self.signature:
            raise ValueError("signature must be non-empty")
        if not self.category:
            raise ValueError("category must be non-empty")

    @property
    def key(self) -> tuple:
        """The 7-attribute duplicate-identification tuple."""
        return (
            self.timestamp,
            self.src_ip,
            self.src_port,
            self.dst_ip,
            self.dst_port,
            self.signature,
            self.category,
        )


@dataclass(frozen=True)
class AlertLog:
    """An immutable list of alerts with non-decreasing timestamps."""

    alerts: tuple[Alert, ...]

    def __post_init__(self) -> None:
        for prev, cur in zip(self.alerts, self.alerts[1:]):
            if cur.timestamp < prev.timestamp:
                raise ValueError("alert timestamps must be non-decreasing")

    @classmethod
    def from_alerts(cls, alerts: Iterable[Alert]) -> "AlertLog":
        """Build a log from alerts in any order; stable-sorts by timestamp."""
        return cls(tuple(sorted(alerts, key=lambda a: a.timestamp)))

    def __len__(self) -> int:
        return len(self.alerts)

    def __iter__(self) -> Iterator[Alert]:
        return iter(self.alerts)

    def __getitem__(self, i: int) -> Alert:
        return self.alerts[i]


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC-3339 timestamp; naive values are taken as UTC."""
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        ts = datetime.fromisoformat(s)
    except ValueError:
        raise ValueError(f"bad timestamp {text!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def format_timestamp(ts: datetime) -> str:
    """Render a timestamp as RFC-3339 UTC with a Z suffix."""
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    ts = ts.astimezone(timezone.utc)
    base = ts.strftime("%Y-%m-%dT%H:%M:%S")
    if ts.microsecond:
        base += f".{ts.microsecond:06d}"
    return base + "Z"


def _parse_port_field(text: str | None) -> int | None:
    if text is None:
        return None
    s = text.strip()
    if not s:
        return None
    try:
        return int(s)
    except ValueError:
        raise ValueError(f"bad port {text!r}") from None


def infer_format(path: str | Path) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return FORMAT_CSV
    if suffix in (".jsonl", ".json", ".ndjson"):
        return FORMAT_JSONL
    raise ValueError(f"cannot infer alert file format from {path!r}; pass format explicitly")


def parse_alert_file(path: str | Path, format: str | None = None) -> AlertLog:
    """Parse a canonical alert file into an AlertLog sorted by timestamp.

    An empty file yields an empty log.  Any malformed line raises
    MalformedLineError carrying the line number and reason.
    """
    fmt = format or infer_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    if fmt == FORMAT_CSV:
        alerts = _parse_csv(Path(path))
    else:
        alerts = _parse_jsonl(Path(path))
    return AlertLog.from_alerts(alerts)


def _parse_csv(path: Path) -> list[Alert]:
    alerts: list[Alert] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for row_idx, row in enumerate(reader):
            line_no = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if row_idx == 0 and tuple(f.strip() for f in row) == CSV_HEADER:
                continue
            if len(row) != len(CSV_HEADER):
                raise MalformedLineError(
                    str(path), line_no, f"expected {len(CSV_HEADER)} fields, got {len(row)}"
                )
            try:
                alerts.append(
                    Alert(
                        timestamp=parse_timestamp(row[0]),
                        src_ip=row[1].strip(),
                        src_port=_parse_port_field(row[2]),
                        dst_ip=row[3].strip(),
                        dst_port=_parse_port_field(row[4]),
                        signature=row[5].strip(),
                        category=row[6].strip(),
                    )
                )
            except ValueError as exc:
                raise MalformedLineError(str(path), line_no, str(exc)) from None
    return alerts


def _parse_jsonl(path: Path) -> list[Alert]:
    alerts: list[Alert] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(str(path), line_no, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise MalformedLineError(str(path), line_no, "expected a JSON object")
            try:
                alerts.append(_alert_from_obj(obj))
            except (ValueError, TypeError, KeyError) as exc:
                raise MalformedLineError(str(path), line_no, str(exc)) from None
    return alerts


def _alert_from_obj(obj: dict) -> Alert:
    for field in ("timestamp", "src_ip", "dst_ip", "signature", "category"):
        if field not in obj:
            raise ValueError(f"missing field {field!r}")

    def port(field: str) -> int | None:
        value = obj.get(field)
        if value is None:
            return None
        if isinstance(value, str):
            return _parse_port_field(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ValueError(f"bad port {value!r}")
        return value

    return Alert(
        timestamp=parse_timestamp(str(obj["timestamp"])),
        src_ip=str(obj["src_ip"]),
        src_port=port("src_port"),
        dst_ip=str(obj["dst_ip"]),
        dst_port=port("dst_port"),
        signature=str(obj["signature"]),
        category=str(obj["category"]),
    )


def write_alert_file(log: AlertLog, path: str | Path, format: str | None = None) -> None:
    """Write a log in a canonical format (inferred from the extension by default)."""
    fmt = format or infer_format(path)
    if fmt == FORMAT_CSV:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for a in log:
                writer.writerow(
                    [
                        format_timestamp(a.timestamp),
                        a.src_ip,
                        "" if a.src_port is None else a.src_port,
                        a.dst_ip,
                        "" if a.dst_port is None else a.dst_port,
                        a.signature,
                        a.category,
                    ]
                )
    elif fmt == FORMAT_JSONL:
        with open(path, "w", encoding="utf-8") as fh:
            for a in log:
                fh.write(
                    json.dumps(
                        {
                            "timestamp": format_timestamp(a.timestamp),
                            "src_ip": a.src_ip,
                            "src_port": a.src_port,
                            "dst_ip": a.dst_ip,
                            "dst_port": a.dst_port,
                            "signature": a.signature,
                            "category": a.category,
                        }
                    )
                    + "\n"
                )
    else:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def deduplicate(log: AlertLog) -> AlertLog:
    """Drop repeat alerts, keeping the first occurrence of each 7-tuple."""
    seen: set[tuple] = set()
    kept: list[Alert] = []
    for alert in log:
        if alert.key not in seen:
            seen.add(alert.key)
            kept.append(alert)
    return AlertLog(tuple(kept))


# --- optional extra: Snort "fast" alert format converter ---------------------

_SNORT_FAST_RE = re.compile(
    r"(?P<ts>\d{2}/\d{2}(?:/\d{2,4})?-\d{2}:\d{2}:\d{2}\.\d+)\s+"
    r"\[\*\*\]\s+\[(?P<gid>\d+):(?P<sid>\d+):(?P<rev>\d+)\]\s+"
    r"(?P<msg>.*?)\s+\[\*\*\]\s+"
    r"(?:\[Classification:\s*(?P<class>[^\]]+)\]\s+)?"
    r"\[Priority:\s*\d+\]\s+"
    r"\{(?P<proto>[^}]+)\}\s+"
    r"(?P<src>[\d.]+)(?::(?P<sport>\d+))?\s+->\s+"
    r"(?P<dst>[\d.]+)(?::(?P<dport>\d+))?"
)


def parse_snort_fast(path: str | Path, year: int = 2000) -> AlertLog:
    """Convert a Snort "fast" alert file to an AlertLog (optional extra).

    Fast-format timestamps carry no year unless Snort was configured for it;
    `year` supplies one for the MM/DD form.  The SID is used as the
    signature identifier and the Classification text as the category
    ("unknown" when absent).
    """
    alerts: list[Alert] = []
    with open(path, encoding="utf-8", errors="replace") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            m = _SNORT_FAST_RE.search(line)
            if m is None:
                raise MalformedLineError(str(path), line_no, "unrecognized snort fast line")
            ts_text = m.group("ts")
            date_part, time_part = ts_text.split("-", 1)
            pieces = date_part.split("/")
            if len(pieces) == 2:
                month, day = pieces
                yr = year
            else:
                month, day, yr_text = pieces
                yr = int(yr_text) if len(yr_text) == 4 else 2000 + int(yr_text)
            ts = parse_timestamp(f"{yr:04d}-{month}-{day}T{time_part}Z")
            try:
                alerts.append(
                    Alert(
                        timestamp=ts,
                        src_ip=m.group("src"),
                        src_port=int(m.group("sport")) if m.group("sport") else None,
                        dst_ip=m.group("dst"),
                        dst_port=int(m.group("dport")) if m.group("dport") else None,
                        signature=m.group("sid"),
                        category=(m.group("class") or "unknown").strip(),
                    )
                )
            except ValueError as exc:
                raise MalformedLineError(str(path), line_no, str(exc)) from None
    return AlertLog.from_alerts(alerts)
