"""
File utility functions for CSV results and JSONL event logs.
"""
import json
from hashlib import md5

import pandas as pd


def write_jsonl_line(filepath, data):
    """Append a single JSON object as a line to a JSONL file."""
    with open(filepath, 'a', encoding='utf-8') as f:
        f.write(json.dumps(data, sort_keys=True) + '\n')


def read_jsonl_lines(filepath):
    """Yield each JSON object from a JSONL file."""
    with open(filepath, 'r', encoding='utf-8') as f:
        for line in f:
            yield json.loads(line)


def encode_md5(text):
    return md5(text.encode("utf-8")).hexdigest()


def format_float(value):
    """17 significant digits: lossless for doubles."""
    return format(float(value), ".17g")


def write_csv(filepath, header, rows):
    """Write rows under a header; floats keep 17 significant digits."""
    frame = pd.DataFrame(list(rows), columns=list(header))
    frame.to_csv(filepath, index=False, float_format="%.17g", na_rep="nan")


def read_csv_columns(filepath):
    """Read a numeric CSV into a {column: array} mapping."""
    frame = pd.read_csv(filepath, dtype=float)
    return {name: frame[name].to_numpy() for name in frame.columns}
