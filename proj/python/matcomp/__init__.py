"""Composition extraction from materials-science tables.

Tables, annotations and extraction records are plain dicts in the same shape as one line of
the JSON-lines dataset and results files.
"""

import json

from . import _core
from ._core import CompositionError, DatasetError, PartialInfoError, count_violations, find_compositions

__all__ = [
    "CompositionError",
    "DatasetError",
    "PartialInfoError",
    "Extractor",
    "count_violations",
    "evaluate",
    "extract_oracle",
    "find_compositions",
    "generate_synthetic",
    "label_distant",
    "parse_expression",
    "run_cli",
    "train",
]


def _lines(records):
    return "".join(json.dumps(r) + "\n" for r in records)


def _records(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def parse_expression(text, assignment=None, unit="mol%"):
    """Parse one composition expression.

    Returns a dict with the canonical tree, pattern, span and variables. When every variable
    has a value in `assignment`, it also holds the normalized percentages (summing to 100).
    """
    return _core.parse_expression(text, dict(assignment or {}), unit)


def generate_synthetic(seed, **config):
    """Annotated synthetic tables plus the matching composition KB, as two lists of dicts."""
    data, kb = _core.generate_synthetic({k: str(v) for k, v in config.items()}, seed)
    return _records(data), _records(kb)


def extract_oracle(record):
    """Extraction with the record's gold annotation standing in for the networks."""
    return json.loads(_core.extract_oracle(json.dumps(record)))


def label_distant(table, kb):
    """Weak annotation of a table from the KB entries of its paper."""
    return json.loads(_core.label_distant(json.dumps(table), _lines(kb)))


def evaluate(predictions, gold, tolerance=1e-3):
    """Metric report for extraction records against gold records or annotated tables."""
    return json.loads(_core.evaluate(_lines(predictions), _lines(gold), tolerance))


def train(train_records, dev_records, out, seed=0, **config):
    """Train both networks and the partial-information classifier; writes a checkpoint to `out`."""
    report = _core.train(_lines(train_records), _lines(dev_records), {k: str(v) for k, v in config.items()}, seed,
                         str(out))
    return json.loads(report)


def run_cli(*args):
    """Run a command-line subcommand in process. Returns (exit code, stdout, stderr)."""
    return _core.run_cli([str(a) for a in args])


class Extractor:
    """Trained extractor loaded from a checkpoint."""

    def __init__(self, checkpoint):
        self._impl = _core.Extractor(str(checkpoint))

    def extract(self, table):
        return json.loads(self._impl.extract(json.dumps(table)))
