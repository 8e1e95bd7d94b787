"""File formats: CSV/JSON/GeoJSON readers and writers plus the binary matrix cache.

Readers are strict. The header must match exactly, numbers must be plain
decimal literals (no NaN, Inf, digit separators), and every error carries the
1-based line number of the offending row (the header is line 1).

Writers emit shortest round-trip float text, so ``parse(write(x)) == x``.
Result files may start with ``#`` comment lines carrying run metadata;
readers skip them.
"""
from __future__ import annotations

import contextlib
import csv
import hashlib
import io as _io
import json
import math
import os
import re
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .access import AccessibilityResult
from .equity import SEDI_FACTORS, ImprovementPotential, SediFactors, SediTable
from .errors import (
    BadFieldCount,
    BadValue,
    DuplicateZone,
    MissingHeader,
    NegativeCount,
    ParseError,
    UnparsableNumber,
)
from .impedance import FitResult, ImpedanceParams, ParamsRegistry, TripTable
from .model import DEFAULT_KINDS, DEFAULT_MAX_THRESHOLD, CostMatrix, Mode, OpportunityTable, Zone

ZONES_HEADER = ("zone_id", "lat", "lon", "population", "workers")
OPPORTUNITIES_HEADER = ("zone_id", "kind", "count")
MATRIX_HEADER = ("origin_id", "destination_id", "minutes")
TRIPS_HEADER = ("mode", "purpose", "duration_min")
TRIPS_HEADER_WEIGHTED = TRIPS_HEADER + ("weight",)
DEMOGRAPHICS_HEADER = ("zone_id",) + SEDI_FACTORS
RESULTS_HEADER = ("zone_id", "kind", "mode", "tau", "value")
SEDI_HEADER = ("zone_id", "sedi")
IMPROVEMENT_HEADER = ("zone_id", "gradient", "rank", "weighting")
RANK_SHIFT_HEADER = ("zone_id", "rank_shift")

BINARY_MAGIC = b"GCAT01"
_MODE_CODES = {Mode.DRIVE: 0, Mode.WALK: 1, Mode.BIKE: 2}
_CODE_MODES = {v: k for k, v in _MODE_CODES.items()}

_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def fmt(x) -> str:
    """Shortest text that parses back to the same float; integral values lose the ``.0``."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x!r}")
    s = repr(x)
    if s.endswith(".0"):
        s = s[:-2]
    if s == "-0":
        s = "0"
    return s


@contextlib.contextmanager
def _reader(src):
    if isinstance(src, (str, os.PathLike)):
        with open(src, "r", encoding="utf-8", newline="") as fh:
            yield fh, str(src)
    else:
        yield src, getattr(src, "name", None)


@contextlib.contextmanager
def _writer(dst):
    if isinstance(dst, (str, os.PathLike)):
        with open(dst, "w", encoding="utf-8", newline="") as fh:
            yield fh
    else:
        yield dst


def _number(text, line, column, source):
    if not _NUMBER.fullmatch(text):
        raise UnparsableNumber(f"cannot parse {text!r} as a number", line, column, source)
    return float(text)


def _count(text, line, column, source):
    v = _number(text, line, column, source)
    if v < 0:
        raise NegativeCount(f"{column} must be >= 0, got {text}", line, column, source)
    return v


def _id(text, line, column, source):
    if text == "" or text != text.strip():
        raise BadValue(f"{column} must be a non-empty identifier without surrounding spaces", line, column, source)
    return text


def _mode(text, line, column, source):
    try:
        return Mode.parse(text)
    except ValueError as exc:
        raise BadValue(str(exc), line, column, source) from None


def _rows(fh, header: Sequence[str], source, alternatives: Sequence[Sequence[str]] = ()):
    """Yield ``(line_number, fields)`` after validating the header.

    Leading ``#`` lines are skipped. Returns the matched header as the first
    yielded item.
    """
    reader = csv.reader(fh)
    first = None
    for row in reader:
        if row and row[0].startswith("#"):
            continue
        first = row
        break
    if first is None:
        raise MissingHeader(f"empty file; expected header {','.join(header)}", 1, None, source)
    if first and first[0].startswith("﻿"):
        first[0] = first[0][1:]
    candidates = [tuple(header)] + [tuple(a) for a in alternatives]
    if tuple(first) not in candidates:
        raise MissingHeader(
            f"expected header {','.join(header)!r}, found {','.join(first)!r}", reader.line_num, None, source)
    matched = tuple(first)
    yield matched
    width = len(matched)
    for row in reader:
        if not row or (len(row) == 1 and row[0] == ""):
            continue
        if len(row) != width:
            raise BadFieldCount(f"expected {width} fields, found {len(row)}", reader.line_num, None, source)
        yield reader.line_num, row


def _write_csv(dst, header, rows: Iterable[Sequence[str]], metadata=None):
    with _writer(dst) as fh:
        if metadata:
            for line in _metadata_lines(metadata):
                fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def _metadata_lines(metadata):
    return ["# " + json.dumps({k: metadata[k]}, sort_keys=True, separators=(",", ":")) for k in sorted(metadata)]


def read_metadata(src) -> dict:
    """Collect the ``# {...}`` metadata lines at the top of a result file."""
    out = {}
    with _reader(src) as (fh, _):
        for line in fh:
            if not line.startswith("#"):
                break
            out.update(json.loads(line[1:].strip()))
    return out


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


# ---------------------------------------------------------------------------
# zones
# ---------------------------------------------------------------------------


def parse_zones(src) -> list:
    with _reader(src) as (fh, source):
        rows = _rows(fh, ZONES_HEADER, source)
        next(rows)
        zones, seen = [], {}
        for line, (zid, lat, lon, pop, wrk) in rows:
            zid = _id(zid, line, "zone_id", source)
            if zid in seen:
                raise DuplicateZone(f"zone {zid!r} already defined on line {seen[zid]}", line, "zone_id", source)
            seen[zid] = line
            la = _number(lat, line, "lat", source)
            lo = _number(lon, line, "lon", source)
            if not -90 <= la <= 90:
                raise BadValue(f"latitude {lat} outside [-90, 90]", line, "lat", source)
            if not -180 <= lo <= 180:
                raise BadValue(f"longitude {lon} outside [-180, 180]", line, "lon", source)
            p = _count(pop, line, "population", source)
            w = _count(wrk, line, "workers", source)
            zones.append(Zone(zid, la, lo, p, w))
        return zones


def write_zones(zones, dst):
    _write_csv(dst, ZONES_HEADER, (
        (z.id, fmt(z.centroid_lat), fmt(z.centroid_lon), fmt(z.population), fmt(z.workers)) for z in zones))


# ---------------------------------------------------------------------------
# opportunities
# ---------------------------------------------------------------------------


def parse_opportunities(src, kinds: Sequence[str] = DEFAULT_KINDS) -> OpportunityTable:
    """Unknown kinds found in the file are registered after ``kinds``."""
    table = OpportunityTable(kinds=kinds)
    seen = {}
    with _reader(src) as (fh, source):
        rows = _rows(fh, OPPORTUNITIES_HEADER, source)
        next(rows)
        for line, (zid, kind, count) in rows:
            zid = _id(zid, line, "zone_id", source)
            kind = _id(kind, line, "kind", source)
            v = _count(count, line, "count", source)
            key = (zid, kind)
            if key in seen:
                raise BadValue(f"duplicate entry for zone {zid!r}, kind {kind!r} (first on line {seen[key]})",
                               line, "zone_id", source)
            seen[key] = line
            table.register(kind)
            table.set(zid, kind, v)
    return table


def write_opportunities(table: OpportunityTable, dst):
    _write_csv(dst, OPPORTUNITIES_HEADER, ((z, k, fmt(v)) for z, k, v in table.items()))


# ---------------------------------------------------------------------------
# matrix
# ---------------------------------------------------------------------------


def parse_matrix(src, mode, max_threshold: float = DEFAULT_MAX_THRESHOLD, zone_ids=None) -> CostMatrix:
    """Read ``origin_id,destination_id,minutes``; pairs above ``max_threshold`` are pruned.

    ``zone_ids`` fixes the zone universe (unknown ids become errors and every
    listed zone gets its implicit self pair); otherwise the universe is the
    set of ids in the file. Files on disk go through a vectorised reader
    first; anything it cannot vouch for is re-read by the strict line parser,
    which produces the error.
    """
    mode = Mode.parse(mode)
    if isinstance(src, (str, os.PathLike)):
        fast = _parse_matrix_fast(src)
        if fast is not None:
            o, d, t = fast
            try:
                return _matrix_from_columns(mode, o, d, t, max_threshold, zone_ids, str(src))
            except ParseError:
                pass  # re-read strictly for exact line numbers
    return _parse_matrix_strict(src, mode, max_threshold, zone_ids)


def _parse_matrix_fast(path):
    import pyarrow as pa  # deferred: only the bulk matrix reader needs it
    import pyarrow.csv as pacsv

    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            head = fh.readline()
        if head.lstrip("\ufeff").rstrip("\r\n") != ",".join(MATRIX_HEADER):
            return None
        ids = pa.dictionary(pa.int32(), pa.string())
        table = pacsv.read_csv(
            path,
            convert_options=pacsv.ConvertOptions(
                column_types={"origin_id": ids, "destination_id": ids, "minutes": pa.float64()},
                strings_can_be_null=False, quoted_strings_can_be_null=False, null_values=[]),
        )
    except Exception:
        return None
    if tuple(table.column_names) != MATRIX_HEADER:
        return None
    cols = []
    for name in ("origin_id", "destination_id"):
        col = table.column(name).unify_dictionaries().combine_chunks()
        labels = np.array(col.dictionary.to_pylist(), dtype=object)
        cols.append((labels, col.indices.to_numpy(zero_copy_only=False).astype(np.int64)))
    t = table.column("minutes").to_numpy()
    if t.size and (not np.all(np.isfinite(t)) or t.min() < 0):
        return None
    if any(np.any(lab == "") or any(z != z.strip() for z in lab) for lab, _ in cols):
        return None
    return cols[0], cols[1], t


def _parse_matrix_strict(src, mode, max_threshold, zone_ids):
    o, d, t, lines = [], [], [], []
    with _reader(src) as (fh, source):
        rows = _rows(fh, MATRIX_HEADER, source)
        next(rows)
        for line, (a, b, m) in rows:
            o.append(_id(a, line, "origin_id", source))
            d.append(_id(b, line, "destination_id", source))
            t.append(_count(m, line, "minutes", source))
            lines.append(line)
    return _matrix_from_columns(mode, _encode(o), _encode(d), np.array(t, dtype=np.float64),
                                max_threshold, zone_ids, source, lines)


def _encode(values):
    labels, codes = np.unique(np.array(values, dtype=object).astype(str), return_inverse=True)
    return labels.astype(object), codes.astype(np.int64)


def _matrix_from_columns(mode, o, d, t, max_threshold, zone_ids, source, lines=None):
    """Build a matrix from dictionary-encoded id columns ``(labels, codes)``."""
    (o_lab, o_code), (d_lab, d_code) = o, d
    if zone_ids is None:
        universe = sorted(set(o_lab.tolist()) | set(d_lab.tolist()))
    else:
        universe = list(zone_ids)
    pos = {z: i for i, z in enumerate(universe)}
    mapped = []
    for col, lab, code in (("origin_id", o_lab, o_code), ("destination_id", d_lab, d_code)):
        lut = np.array([pos.get(z, -1) for z in lab.tolist()], dtype=np.int64)
        idx = lut[code] if code.size else code
        bad = np.flatnonzero(idx < 0)
        if bad.size:
            k = int(bad[0])
            line = lines[k] if lines else k + 2
            raise BadValue(f"unknown zone {lab[code[k]]!r}", line, col, source)
        mapped.append(idx)
    oi, di = mapped
    n = len(universe)
    key = oi * max(n, 1) + di
    order = np.argsort(key, kind="stable")
    sk = key[order]
    dup = np.flatnonzero(sk[1:] == sk[:-1])
    if dup.size:
        # stable sort: order[i + 1] is the later row of each repeated pair
        k = int(order[dup + 1].min())
        line = lines[k] if lines else k + 2
        raise BadValue(f"duplicate pair ({universe[oi[k]]}, {universe[di[k]]})", line, "origin_id", source)
    return CostMatrix.from_arrays(mode, universe, oi, di, t, max_threshold)


def write_matrix(matrix: CostMatrix, dst):
    ids = matrix.zone_ids
    with _writer(dst) as fh:
        fh.write(",".join(MATRIX_HEADER) + "\n")
        origins = matrix.origins()
        buf = []
        for i, j, m in zip(origins.tolist(), matrix.indices.tolist(), matrix.minutes.tolist()):
            buf.append(f"{ids[i]},{ids[j]},{fmt(m)}\n")
            if len(buf) >= 65536:
                fh.write("".join(buf))
                buf.clear()
        fh.write("".join(buf))


def write_matrix_binary(matrix: CostMatrix, dst):
    """Binary cache; layout documented in docs/binary_matrix.md."""
    out = _io.BytesIO()
    out.write(BINARY_MAGIC)
    out.write(struct.pack("<BBdI", _MODE_CODES[matrix.mode], 0, matrix.max_threshold, matrix.n_zones))
    for z in matrix.zone_ids:
        b = z.encode("utf-8")
        if len(b) > 0xFFFF:
            raise ValueError(f"zone id too long for the binary cache: {z[:20]!r}...")
        out.write(struct.pack("<H", len(b)))
        out.write(b)
    for i in range(matrix.n_zones):
        lo, hi = matrix.indptr[i], matrix.indptr[i + 1]
        out.write(struct.pack("<I", hi - lo))
        out.write(matrix.indices[lo:hi].astype("<u4").tobytes())
        out.write(matrix.minutes[lo:hi].astype("<f8").tobytes())
    data = out.getvalue()
    if isinstance(dst, (str, os.PathLike)):
        Path(dst).write_bytes(data)
    else:
        dst.write(data)


def parse_matrix_binary(src) -> CostMatrix:
    if isinstance(src, (str, os.PathLike)):
        data = Path(src).read_bytes()
        source = str(src)
    else:
        data = src.read()
        source = getattr(src, "name", None)
    if data[:6] != BINARY_MAGIC:
        raise MissingHeader("not a binary matrix cache (bad magic bytes)", None, None, source)
    try:
        code, _, max_threshold, n = struct.unpack_from("<BBdI", data, 6)
        off = 6 + struct.calcsize("<BBdI")
        ids = []
        for _ in range(n):
            (k,) = struct.unpack_from("<H", data, off)
            off += 2
            ids.append(data[off:off + k].decode("utf-8"))
            off += k
        indptr = np.zeros(n + 1, dtype=np.int64)
        idx_parts, t_parts = [], []
        for i in range(n):
            (c,) = struct.unpack_from("<I", data, off)
            off += 4
            idx_parts.append(np.frombuffer(data, dtype="<u4", count=c, offset=off))
            off += 4 * c
            t_parts.append(np.frombuffer(data, dtype="<f8", count=c, offset=off))
            off += 8 * c
            indptr[i + 1] = indptr[i] + c
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise BadValue(f"truncated or corrupt binary matrix: {exc}", None, None, source) from None
    if off != len(data):
        raise BadValue(f"{len(data) - off} trailing bytes after the last origin block", None, None, source)
    if code not in _CODE_MODES:
        raise BadValue(f"unknown mode code {code}", None, None, source)
    idx = np.concatenate(idx_parts).astype(np.int64) if idx_parts else np.zeros(0, np.int64)
    t = np.concatenate(t_parts).astype(np.float64) if t_parts else np.zeros(0)
    if list(ids) != sorted(ids) or len(set(ids)) != len(ids):
        raise BadValue("zone ids in a binary matrix must be unique and ascending", None, None, source)
    if idx.size and idx.max() >= n:
        raise BadValue("destination index out of range", None, None, source)
    if t.size and (not np.all(np.isfinite(t)) or t.min() < 0 or t.max() > max_threshold):
        raise BadValue("travel times must be finite and within [0, max_threshold]", None, None, source)
    return CostMatrix(_CODE_MODES[code], ids, indptr, idx, t, max_threshold)


def load_matrix(path, mode, max_threshold=DEFAULT_MAX_THRESHOLD, zone_ids=None) -> CostMatrix:
    """Read a CSV matrix, or a ``.gcat`` binary cache (which carries its own mode and bound)."""
    if str(path).endswith(".gcat"):
        m = parse_matrix_binary(path)
        if m.mode != Mode.parse(mode):
            raise BadValue(f"binary matrix is for {m.mode.value}, expected {Mode.parse(mode).value}",
                           None, None, str(path))
        return m
    return parse_matrix(path, mode, max_threshold, zone_ids)


# ---------------------------------------------------------------------------
# trips and parameters
# ---------------------------------------------------------------------------


def parse_trips(src) -> TripTable:
    modes, purposes, durations, weights = [], [], [], []
    with _reader(src) as (fh, source):
        rows = _rows(fh, TRIPS_HEADER, source, alternatives=[TRIPS_HEADER_WEIGHTED])
        header = next(rows)
        weighted = len(header) == 4
        for line, row in rows:
            modes.append(_mode(row[0], line, "mode", source).value)
            purposes.append(_id(row[1], line, "purpose", source))
            dur = _count(row[2], line, "duration_min", source)
            if dur <= 0:
                raise BadValue("duration_min must be > 0", line, "duration_min", source)
            durations.append(dur)
            if weighted:
                weights.append(_count(row[3], line, "weight", source))
    return TripTable(modes, purposes, durations, weights if weighted else None)


def write_trips(trips: TripTable, dst):
    weighted = trips.weight is not None
    header = TRIPS_HEADER_WEIGHTED if weighted else TRIPS_HEADER
    w = trips.weight if weighted else [None] * len(trips)

    def rows():
        for m, p, d, x in zip(trips.mode, trips.purpose, trips.duration, w):
            yield (m, p, fmt(d)) + ((fmt(x),) if weighted else ())

    _write_csv(dst, header, rows())


_PARAM_KEYS = ("purpose", "mode", "alpha", "beta", "r2", "n_trips")


def parse_params(src) -> ParamsRegistry:
    with _reader(src) as (fh, source):
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BadValue(f"invalid JSON: {exc.msg}", exc.lineno, None, source) from None
    if not isinstance(data, list):
        raise BadValue("params file must hold a JSON array", 1, None, source)
    reg = ParamsRegistry()
    for k, entry in enumerate(data):
        where = f"entry {k}"
        if not isinstance(entry, dict) or set(entry) != set(_PARAM_KEYS):
            raise BadValue(f"{where}: expected keys {', '.join(_PARAM_KEYS)}", None, None, source)
        try:
            mode = Mode.parse(entry["mode"])
            for f in ("alpha", "beta"):
                if isinstance(entry[f], bool) or not isinstance(entry[f], (int, float)):
                    raise ValueError(f"{f} must be a number")
            params = ImpedanceParams(float(entry["alpha"]), float(entry["beta"]), str(entry["purpose"]), mode)
            r2 = float("nan") if entry["r2"] is None else float(entry["r2"])
            n_trips = int(entry["n_trips"])
        except (ValueError, TypeError) as exc:
            raise BadValue(f"{where}: {exc}", None, None, source) from None
        reg.add(FitResult(params, r2, 0, n_trips))
    return reg


def write_params(registry: ParamsRegistry | Iterable[FitResult | ImpedanceParams], dst):
    if not isinstance(registry, ParamsRegistry):
        registry = ParamsRegistry(list(registry))
    out = []
    for fr in registry:
        d = fr.to_json()
        if d["r2"] is not None and not math.isfinite(d["r2"]):
            d["r2"] = None
        out.append({k: d[k] for k in _PARAM_KEYS})
    text = json.dumps(out, indent=2) + "\n"
    with _writer(dst) as fh:
        fh.write(text)


# ---------------------------------------------------------------------------
# demographics
# ---------------------------------------------------------------------------


def parse_demographics(src) -> SediFactors:
    values = {}
    seen = {}
    with _reader(src) as (fh, source):
        rows = _rows(fh, DEMOGRAPHICS_HEADER, source)
        next(rows)
        for line, row in rows:
            zid = _id(row[0], line, "zone_id", source)
            if zid in seen:
                raise DuplicateZone(f"zone {zid!r} already defined on line {seen[zid]}", line, "zone_id", source)
            seen[zid] = line
            values[zid] = {f: _number(v, line, f, source) for f, v in zip(SEDI_FACTORS, row[1:])}
    return SediFactors(values)


def write_demographics(factors: SediFactors, dst):
    _write_csv(dst, DEMOGRAPHICS_HEADER, (
        (z,) + tuple(fmt(factors.values[z][f]) for f in SEDI_FACTORS) for z in sorted(factors.values)))


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


def write_results(results: Iterable[AccessibilityResult], dst, metadata=None):
    def rows():
        for r in results:
            mode = Mode.parse(r.mode).value
            tau = fmt(r.tau)
            for z, v in zip(r.zone_ids, r.values.tolist()):
                yield z, r.kind, mode, tau, fmt(v)

    _write_csv(dst, RESULTS_HEADER, rows(), metadata)


def parse_results(src) -> list:
    """Results grouped by ``(kind, mode, tau)`` in order of first appearance."""
    groups = {}
    with _reader(src) as (fh, source):
        rows = _rows(fh, RESULTS_HEADER, source)
        next(rows)
        for line, (zid, kind, mode, tau, value) in rows:
            zid = _id(zid, line, "zone_id", source)
            kind = _id(kind, line, "kind", source)
            m = _mode(mode, line, "mode", source)
            t = _number(tau, line, "tau", source)
            v = _count(value, line, "value", source)
            g = groups.setdefault((kind, m, t), ({}, []))
            if zid in g[0]:
                raise DuplicateZone(f"zone {zid!r} repeated for ({kind}, {m.value}, {tau})", line, "zone_id", source)
            g[0][zid] = v
            g[1].append(zid)
    return [AccessibilityResult(k, m, t, tuple(order), np.array([vals[z] for z in order]))
            for (k, m, t), (vals, order) in groups.items()]


def write_sedi(table: SediTable, dst, metadata=None):
    _write_csv(dst, SEDI_HEADER, ((z, fmt(table.values[z])) for z in table.region), metadata)


def parse_sedi(src) -> SediTable:
    values = {}
    with _reader(src) as (fh, source):
        rows = _rows(fh, SEDI_HEADER, source)
        next(rows)
        for line, (zid, v) in rows:
            zid = _id(zid, line, "zone_id", source)
            if zid in values:
                raise DuplicateZone(f"zone {zid!r} repeated", line, "zone_id", source)
            x = _number(v, line, "sedi", source)
            if not 0 <= x <= 1:
                raise BadValue(f"sedi must lie in [0, 1], got {v}", line, "sedi", source)
            values[zid] = x
    return SediTable(tuple(values), values, {})


def write_improvement(ip: ImprovementPotential, dst, metadata=None):
    _write_csv(dst, IMPROVEMENT_HEADER, (
        (z, fmt(g), str(int(r)), ip.weighting) for z, g, r in zip(ip.zone_ids, ip.gradient.tolist(), ip.rank.tolist())
    ), metadata)


def parse_improvement(src) -> ImprovementPotential:
    ids, grad, rank, weighting = [], [], [], set()
    with _reader(src) as (fh, source):
        rows = _rows(fh, IMPROVEMENT_HEADER, source)
        next(rows)
        seen = set()
        for line, (zid, g, r, w) in rows:
            zid = _id(zid, line, "zone_id", source)
            if zid in seen:
                raise DuplicateZone(f"zone {zid!r} repeated", line, "zone_id", source)
            seen.add(zid)
            ids.append(zid)
            grad.append(_count(g, line, "gradient", source))
            rv = _number(r, line, "rank", source)
            if rv != int(rv) or rv < 1:
                raise BadValue(f"rank must be a positive integer, got {r}", line, "rank", source)
            rank.append(int(rv))
            weighting.add(w)
    if sorted(rank) != list(range(1, len(rank) + 1)):
        raise BadValue("ranks are not a permutation of 1..N", None, "rank", source)
    return ImprovementPotential(tuple(ids), np.array(grad), np.array(rank, dtype=np.int64),
                                weighting.pop() if len(weighting) == 1 else "mixed")


def write_rank_shift(shift: dict, dst, metadata=None):
    _write_csv(dst, RANK_SHIFT_HEADER, ((z, str(int(v))) for z, v in shift.items()), metadata)


def write_table(header, rows, dst, metadata=None):
    """Generic CSV writer for report tables; floats are formatted with :func:`fmt`."""
    def cell(x):
        if x is None:
            return ""
        if isinstance(x, (float, np.floating)):
            return fmt(x)
        return str(x)

    _write_csv(dst, header, ([cell(x) for x in r] for r in rows), metadata)


# ---------------------------------------------------------------------------
# GeoJSON
# ---------------------------------------------------------------------------


def geojson_points(zones, records: Iterable[dict], metadata=None) -> dict:
    """FeatureCollection of centroid Points; each record needs a ``zone_id``."""
    idx = {z.id: z for z in zones}
    features = []
    for rec in records:
        z = idx.get(rec["zone_id"])
        if z is None:
            raise BadValue(f"no centroid for zone {rec['zone_id']!r}")
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [z.centroid_lon, z.centroid_lat]},
            "properties": dict(rec),
        })
    fc = {"type": "FeatureCollection", "features": features}
    if metadata:
        fc["metadata"] = metadata
    return fc


def write_geojson(zones, records, dst, metadata=None):
    fc = geojson_points(zones, records, metadata)
    text = json.dumps(fc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"
    with _writer(dst) as fh:
        fh.write(text)


def result_records(results: Iterable[AccessibilityResult]):
    for r in results:
        for z, v in zip(r.zone_ids, r.values.tolist()):
            yield {"zone_id": z, "kind": r.kind, "mode": Mode.parse(r.mode).value, "tau": float(r.tau), "value": v}
