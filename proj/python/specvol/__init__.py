"""Spectral estimators of integrated volatility and covolatility."""

from __future__ import annotations

import json
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import _core
from ._core import ConfigError, NumericDomainError, avar_iv, symmetrizer_z

__all__ = [
    "ConfigError",
    "NumericDomainError",
    "avar_iv",
    "estimate_icv",
    "estimate_iv",
    "estimate_lmm",
    "monte_carlo",
    "simulate",
    "symmetrizer_z",
]

Component = tuple[Sequence[float], Sequence[float]]


def _config_text(config: Mapping[str, Any] | str) -> str:
    return config if isinstance(config, str) else json.dumps(config)


def _components(components: Iterable[Component]) -> list[tuple[list[float], list[float]]]:
    return [(np.asarray(t, float).tolist(), np.asarray(y, float).tolist()) for t, y in components]


def simulate(config: Mapping[str, Any] | str, seed: int | None = None) -> dict[str, Any]:
    """Noisy observations of a simulated scenario.

    Returns ``components`` as (times, values) array pairs and the
    ``integrated_covolatility`` matrix over [0, 1].
    """
    return _core.simulate(_config_text(config), seed)


def estimate_iv(values: Sequence[float], **options: Any) -> dict[str, Any]:
    """Adaptive integrated variance from equidistant observations on [0, 1]."""
    return json.loads(_core.estimate_iv(np.asarray(values, float).tolist(), **options))


def estimate_icv(components: Iterable[Component], p: int = 0, q: int = 1, **options: Any) -> dict[str, Any]:
    """Adaptive integrated covolatility of entry (p, q)."""
    return json.loads(_core.estimate_icv(_components(components), p, q, **options))


def estimate_lmm(components: Iterable[Component], **options: Any) -> dict[str, Any]:
    """Local method of moments estimate of the integrated covolatility matrix."""
    report = json.loads(_core.estimate_lmm(_components(components), **options))
    final = report["final_estimate"]
    report["matrix"] = np.asarray(final["data"], float).reshape(final["rows"], final["cols"])
    return report


def monte_carlo(
    config: Mapping[str, Any] | str,
    reps: int,
    estimators: Sequence[str],
    seed: int | None = None,
    threads: int = 1,
    level: float = 0.95,
    records: bool = False,
) -> dict[str, Any]:
    """Replicated estimation with bias, RMSE, relative efficiency and coverage."""
    text = _core.monte_carlo(_config_text(config), reps, list(estimators), seed, threads, level, records)
    return json.loads(text)
