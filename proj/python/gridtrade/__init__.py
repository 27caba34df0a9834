"""Coordinated multilateral trading on a DC network.

Every function takes a market as a dict, a JSON string or a path to a JSON
file, and returns plain Python data.
"""

import json
import os

import numpy as np

from . import _gridtrade
from ._gridtrade import (
    DomainError,
    InputError,
    NumericalError,
    PreconditionError,
    StructuralError,
    UnsupportedError,
)

__all__ = [
    "run",
    "dispatch",
    "prices",
    "check_equilibrium",
    "decompose",
    "robust_run",
    "loading_matrix",
    "DomainError",
    "InputError",
    "NumericalError",
    "PreconditionError",
    "StructuralError",
    "UnsupportedError",
]


def _text(market):
    if isinstance(market, dict):
        return json.dumps(market)
    if isinstance(market, os.PathLike) or (isinstance(market, str) and not market.lstrip().startswith("{")):
        with open(market) as fh:
            return fh.read()
    return market


def _lines(text):
    return [json.loads(line) for line in text.splitlines() if line]


def run(market, *, epsilon=None, seed=None, max_steps=None, proposer=None, curtailment=None):
    """Run the trading process. Returns (report, trace records)."""
    report, trace = _gridtrade.run(_text(market), epsilon, seed, max_steps, proposer, curtailment)
    return json.loads(report), _lines(trace)


def dispatch(market):
    return json.loads(_gridtrade.dispatch(_text(market)))


def prices(market):
    out = json.loads(_gridtrade.prices(_text(market)))
    out["lambda"] = np.array(out["lambda"], dtype=float)
    return out


def check_equilibrium(market, plans=None, injections=None, prices=None):
    def arr(v):
        return None if v is None else np.asarray(v, dtype=float)

    return json.loads(_gridtrade.check_equilibrium(_text(market), arr(plans), arr(injections), arr(prices)))


def decompose(market):
    return json.loads(_gridtrade.decompose(_text(market)))


def robust_run(market):
    summary, trace = _gridtrade.robust_run(_text(market))
    return json.loads(summary), _lines(trace)


def loading_matrix(market):
    return np.asarray(_gridtrade.loading_matrix(_text(market)))
