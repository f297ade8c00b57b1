"""
Utility module for lab report files
"""

import csv
import glob
import json
import math
import os
import re
import tempfile
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

REPORT_SUFFIX = "_report"
SIGNIFICANT_DIGITS = 12


def report_stem(suite: str) -> str:
    """File-name stem of a suite report"""
    return re.sub(r"[^A-Za-z0-9_-]+", "_", suite)


def create_output_filename(suite: str, output_dir: str, ext: str = "csv") -> str:
    """
    Create output file name

    Args:
        suite: Suite name (e.g. sweep-decay)
        output_dir: Output directory
        ext: File extension without dot

    Returns:
        Complete output file path
    """
    return os.path.join(output_dir, f"{report_stem(suite)}{REPORT_SUFFIX}.{ext}")


def format_value(value) -> str:
    """
    Render a CSV cell: floats rounded to 12 significant digits, booleans as
    true/false, None as an empty cell
    """
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(float(f"{value:.{SIGNIFICANT_DIGITS}g}"))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, complex):
        return repr(value)
    return str(value)


def _replace_atomically(path: str, writer) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, temporary = tempfile.mkstemp(prefix=".tmp_", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            writer(handle)
        os.replace(temporary, path)
    except BaseException:
        if os.path.exists(temporary):
            os.unlink(temporary)
        raise


def write_csv_atomic(path: str, rows: Iterable[Dict], columns: Sequence[str],
                     sort_key: Optional[Sequence[str]] = None) -> str:
    """
    Write rows to a CSV file atomically (temporary file + os.replace)

    Args:
        path: Output CSV path
        rows: Row dictionaries; missing columns become empty cells
        columns: Column order
        sort_key: Columns to sort rows by (default: the declared order of the rows)

    Returns:
        The path written
    """
    rows = list(rows)
    if sort_key:
        def key(row):
            return tuple(_sortable(row.get(name)) for name in sort_key)
        rows = sorted(rows, key=key)

    def writer(handle):
        out = csv.writer(handle, lineterminator="\n")
        out.writerow(columns)
        for row in rows:
            out.writerow([format_value(row.get(name)) for name in columns])

    _replace_atomically(path, writer)
    return path


def _sortable(value):
    if value is None:
        return (1, "")
    if isinstance(value, (int, float, np.integer, np.floating)) and not isinstance(value, bool):
        return (0, float(value))
    return (0, str(value))


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return repr(value)
    raise TypeError(f"Valore non serializzabile: {type(value).__name__}")


def write_json_atomic(path: str, payload: Dict) -> str:
    """Write a JSON document atomically, keys sorted"""
    def writer(handle):
        json.dump(payload, handle, indent=2, ensure_ascii=False, sort_keys=True,
                  default=_json_default)
        handle.write("\n")

    _replace_atomically(path, writer)
    return path


def read_csv_rows(path: str) -> List[Dict[str, str]]:
    """Read a report CSV as a list of string dictionaries"""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def check_already_written(suite: str, output_dir: str) -> bool:
    """
    Check if a suite report has already been written

    Args:
        suite: Suite name
        output_dir: Reports directory

    Returns:
        True if the CSV report exists
    """
    return os.path.exists(create_output_filename(suite, output_dir))


def find_written_reports(output_dir: str) -> set:
    """
    Find all suites with a CSV report in the output directory

    Args:
        output_dir: Reports directory

    Returns:
        Set of suite names
    """
    if not os.path.exists(output_dir):
        return set()

    written = set()
    for file_path in glob.glob(os.path.join(output_dir, f"*{REPORT_SUFFIX}.csv")):
        match = re.match(rf"(.+){REPORT_SUFFIX}\.csv$", os.path.basename(file_path))
        if match:
            written.add(match.group(1))
    return written


def get_resume_info(suites: Sequence[str], output_dir: str) -> Tuple[List[str], List[str]]:
    """
    Separate suites to run from those already completed

    Args:
        suites: Requested suites, in order
        output_dir: Reports directory

    Returns:
        Tuple (suites_to_run, suites_already_written)
    """
    written = find_written_reports(output_dir)
    to_run = [s for s in suites if report_stem(s) not in written]
    done = [s for s in suites if report_stem(s) in written]
    return to_run, done
