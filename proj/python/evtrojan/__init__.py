"""Backdoor attacks on event-camera streams.

Thin wrapper over the native core: configuration arguments are plain dicts
(same keys as the JSON documents the command-line tool reads), representations
come back as (C, H, W) numpy arrays, and checkpoints travel as bytes.
"""

import json

from . import _core
from ._core import (
    EventStream,
    EvtrojanError,
    inject,
    normalize_time,
    parse_bin,
    parse_csv,
    psnr,
    ssim,
    stc_filter,
    trigger_loss,
    write_bin,
    write_csv,
)

__all__ = [
    "EventStream",
    "EvtrojanError",
    "evaluate",
    "inject",
    "make_dataset",
    "make_immutable_trigger",
    "normalize_time",
    "parse_bin",
    "parse_csv",
    "poison_all",
    "psnr",
    "represent",
    "ssim",
    "stc_filter",
    "train_backdoor",
    "trigger_loss",
    "write_bin",
    "write_csv",
]

__version__ = "0.1.0"


def _dump(config):
    return json.dumps(config or {})


def make_dataset(recipe=None):
    """List of (EventStream, label) pairs; streams are normalized to [0, 1]."""
    return _core.make_dataset(_dump(recipe))


def represent(stream, method="est", **config):
    """Dense representation of `stream`; extra keys as in the repr config (bins, tau, ...)."""
    return _core.represent(stream, _dump({"method": method, **config}))


def make_immutable_trigger(spec=None, width=32, height=32):
    return _core.make_immutable_trigger(_dump(spec), width, height)


def train_backdoor(samples, config=None):
    """Returns a TrainResult with model/generator checkpoint bytes and per-epoch history."""
    return _core.train_backdoor(list(samples), _dump(config))


def poison_all(samples, policy=None, generator=None):
    """Triggers every sample and keeps the true labels (for measuring attack success)."""
    return _core.poison_all(list(samples), _dump(policy), generator)


def evaluate(model, clean, triggered=(), target=0, repr=None):
    """{"cda": ..., "asr": ...} for checkpoint bytes `model`."""
    return _core.evaluate(model, _dump(repr), list(clean), list(triggered), target)
