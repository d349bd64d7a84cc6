"""CSV and report file formats.

All numeric output uses 9 significant digits, ``\\n`` line endings and a
fixed header. These headers are part of the file contract.
"""

import csv
import math

from .interferometer import SpectrumRecord

FIG2_HEADER = ("u", "r_sc", "phase_deg")
FIG3_HEADER = ("detuning_mhz", "phase_deg", "transmission")
FIG3_CONVOLVED = ("phase_conv_deg", "transmission_conv")
RECORDS_HEADER = ("detuning_mhz", "counts_c", "counts_d", "duration_ms", "atom_present")
PHASE_PRED_HEADER = ("detuning_mhz", "phase_deg", "transmission_fit")
SPECTRUM_HEADER = ("detuning_mhz", "transmission", "transmission_err")
SPECTRUM_PHASE = ("phase_deg", "phase_err")


class RecordsFormatError(ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        where = f"{path or '<records>'}:{line}: " if line is not None else ""
        super().__init__(where + message)


def fmt(x):
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".9g")


def write_table(path, header, rows):
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_records(path, records):
    write_table(path, RECORDS_HEADER,
                ((r.detuning, r.counts_c, r.counts_d, r.duration, bool(r.atom_present))
                 for r in records))


def read_records(path):
    """Parse ``records.csv``; errors carry the 1-based line number."""
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RecordsFormatError("empty file", 1, path) from None
        if tuple(h.strip() for h in header) != RECORDS_HEADER:
            raise RecordsFormatError(
                f"bad header {','.join(header)!r}, expected {','.join(RECORDS_HEADER)!r}", 1, path)
        records = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(RECORDS_HEADER):
                raise RecordsFormatError(f"expected {len(RECORDS_HEADER)} fields, got {len(row)}",
                                         lineno, path)
            try:
                det = float(row[0])
                cc, cd = int(row[1]), int(row[2])
                dur = float(row[3])
                flag = row[4].strip()
                if flag not in ("0", "1"):
                    raise ValueError(f"atom_present must be 0 or 1, got {flag!r}")
                if not (math.isfinite(det) and math.isfinite(dur)):
                    raise ValueError("non-finite value")
                records.append(SpectrumRecord(det, cc, cd, dur, flag == "1"))
            except ValueError as exc:
                raise RecordsFormatError(str(exc), lineno, path) from None
    return records


def write_report(path, items, footer=()):
    with open(path, "w", newline="", encoding="ascii") as fh:
        for key, value in items:
            fh.write(f"{key} = {fmt(value)}\n")
        for line in footer:
            fh.write(f"# {line}\n")


def read_report(path):
    out = {}
    with open(path, encoding="ascii") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                k, v = (s.strip() for s in line.split("=", 1))
                out[k] = v
    return out
