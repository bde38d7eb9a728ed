"""Small argument validators used by the estimators and the CLI."""
from numbers import Integral, Real

from .exceptions import ConfigError


def check_fraction(value, name, *, low=0.0, high=1.0, include_low=True, include_high=True):
    """Return ``value`` as float after checking it lies in the given interval."""
    if isinstance(value, bool) or not isinstance(value, Real):
        raise ConfigError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if value != value:
        raise ConfigError(f"{name} must not be NaN")
    ok_low = value >= low if include_low else value > low
    ok_high = value <= high if include_high else value < high
    if not (ok_low and ok_high):
        lb = "[" if include_low else "("
        rb = "]" if include_high else ")"
        raise ConfigError(f"{name}={value} outside {lb}{low}, {high}{rb}")
    return value


def check_positive_int(value, name, *, minimum=1):
    if isinstance(value, bool) or not isinstance(value, Integral):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_weights(weights, allowed):
    """Validate a ``{component: weight}`` mapping."""
    out = {}
    for key, w in dict(weights).items():
        if key not in allowed:
            raise ConfigError(f"unknown reward component {key!r}; expected one of {sorted(allowed)}")
        if isinstance(w, bool) or not isinstance(w, Real) or w < 0 or w != w:
            raise ConfigError(f"weight for {key!r} must be a non-negative number, got {w!r}")
        out[key] = float(w)
    return out
