"""CPU toolkit for one-stage detector architectures.

Thin wrapper over the native module: JSON-text results are parsed into
dicts here, and model arguments accept preset names, spec dicts, or paths
to spec files.
"""

import json
import os
from pathlib import Path

_bundled_data = Path(__file__).resolve().parent / "data"
if _bundled_data.is_dir():
    os.environ.setdefault("DETBENCH_DATA_DIR", str(_bundled_data))

from detbench._core import (  # noqa: E402
    default_tables_path,
    list_presets,
    preset_group,
    preset_group_names,
)
from detbench import _core  # noqa: E402

__all__ = [
    "analyze",
    "bench",
    "decode",
    "default_tables_path",
    "forward_taps",
    "list_presets",
    "preset_group",
    "preset_group_names",
    "spec",
    "structure_signature",
    "verify_tables",
]


def _as_model_arg(model):
    """Preset name, spec dict, or path to a spec JSON file -> native arg."""
    if isinstance(model, dict):
        return json.dumps(model)
    if isinstance(model, (str, os.PathLike)):
        p = Path(model)
        if str(model).endswith(".json") and p.is_file():
            return p.read_text()
        return str(model)
    raise TypeError(f"model must be a name, dict, or path, not {type(model)!r}")


def spec(model):
    """Fully resolved model spec as a dict."""
    return json.loads(_core.spec_json(_as_model_arg(model)))


def analyze(model, input_size=0, attach_map=True):
    """Static parameter / Gflops breakdown as a dict."""
    return json.loads(
        _core.analyze_json(_as_model_arg(model), input_size, attach_map)
    )


def bench(model, warmup=50, iters=300, seed=42, input_size=0):
    """Single-thread CPU latency report as a dict."""
    return json.loads(
        _core.bench_json(_as_model_arg(model), warmup, iters, seed, input_size)
    )


def verify_tables(tables_path=""):
    """(all_pass, report dict) for the published params/Gflops cells."""
    ok, text = _core.verify_tables_json(str(tables_path))
    return ok, json.loads(text)


def forward_taps(model, input):
    """Run the network on a (n, c, h, w) float array; dict of output maps."""
    return _core.forward_taps(_as_model_arg(model), input)


def decode(model, input):
    """Per-anchor rows: cx, cy, w, h, objectness, stride, class scores."""
    return _core.decode(_as_model_arg(model), input)


def structure_signature(model):
    """Canonical structure string; equal strings mean isomorphic networks."""
    return _core.structure_signature(_as_model_arg(model))
