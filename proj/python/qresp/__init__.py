"""Quenched linear response for random circle-map cocycles."""

import json as _json

from . import _core
from ._core import (
    AliasingError,
    Error,
    ConfigError,
    DomainError,
    DrivingOrbit,
    FourierFunction,
    GVariant,
    L1Rule,
    MapRegistry,
    apply,
    assemble,
    default_quadrature,
    derivative_operator,
    doubling_composed,
    dyadic_eps_grid,
    equivariant_density,
    exact_truncated_mean,
    fit_rate,
    g_polynomials,
    koopman_observable_response,
    l1_norm,
    list_families,
    make_psi,
    prob_covering_equals,
    quenched_response_value,
    response_series,
    sample_covering_times,
    sobolev_norm,
    stability_rate,
    verify_crim_identity,
)

__version__ = _core.__version__


def builtin_family(name, params=None):
    """Build a built-in map family from a parameter dict."""
    return _core.builtin_family(name, _json.dumps(params or {}))


def sample_orbit(family, seed, window, params, registry):
    return _core.sample_orbit(family, seed, window, _json.dumps(params), registry)


def registry(maps):
    """MapRegistry from {symbol: CircleMap}."""
    reg = MapRegistry()
    for sym, m in maps.items():
        reg.add(sym, m)
    return reg


def validate_config(config):
    """Returns (ok, diagnostics, resolved); config is a dict or JSON text."""
    text = config if isinstance(config, str) else _json.dumps(config)
    ok, diags, resolved = _core.validate_config(text)
    return ok, diags, (_json.loads(resolved) if ok else None)


def run_config(config, output=None, threads=0):
    """Runs an experiment config and returns the run record as a dict."""
    text = config if isinstance(config, str) else _json.dumps(config)
    return _json.loads(_core.run_config(text, output, threads))
