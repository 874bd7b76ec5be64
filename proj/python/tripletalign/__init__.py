"""Triplet-task alignment harness: representational and behavioral evaluation."""

import json

from . import _tripletalign as _core
from ._tripletalign import (
    ConfigError,
    ParseError,
    ValidationError,
    build_prompt,
    normalize_answer,
    parse_response,
    presented_order,
    run_cli,
    verify_bundle,
)

__all__ = [
    "ConfigError",
    "ParseError",
    "ValidationError",
    "build_prompt",
    "dataset_stats",
    "evaluate",
    "load_dataset",
    "naive_eval",
    "normalize_answer",
    "parse_response",
    "presented_order",
    "run_cli",
    "verify_bundle",
    "write_fixtures",
]


def load_dataset(path):
    """Parsed triplets and judgments of a canonical CSV file."""
    return json.loads(_core.load_dataset_json(str(path)))


def dataset_stats(path):
    """Row counts, eval-set size and human baseline of a dataset."""
    return json.loads(_core.dataset_stats_json(str(path)))


def evaluate(dataset, bundle, center=True, bootstrap=0, seed=0, threads=0):
    """Per-layer representational results, in the eval-repr JSON layout."""
    return json.loads(_core.evaluate_json(str(dataset), str(bundle), center, bootstrap, seed, threads))


def naive_eval(dataset, bundle, center=True):
    """Reference recomputation of per-layer metrics."""
    return json.loads(_core.naive_eval_json(str(dataset), str(bundle), center))


def write_fixtures(out_dir, **spec):
    """Writes a synthetic bundle, dataset and expected results to out_dir."""
    merged = json.loads(_core.default_spec_json())
    merged.update(spec)
    _core.write_fixtures_json(str(out_dir), json.dumps(merged))
