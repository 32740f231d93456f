"""Small argument checkers in the spirit of ``sklearn.utils.validation``."""

import math
import numbers

import numpy as np

from .errors import InvalidArgument


def check_int(value, name, *, min_value=None, max_value=None):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        raise InvalidArgument(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if min_value is not None and value < min_value:
        raise InvalidArgument(f"{name} must be >= {min_value}, got {value}")
    if max_value is not None and value > max_value:
        raise InvalidArgument(f"{name} must be <= {max_value}, got {value}")
    return value


def check_real(value, name, *, lower=None, upper=None, lower_open=False, upper_open=False):
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Real):
        raise InvalidArgument(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgument(f"{name} must be finite, got {value}")
    if lower is not None and (value < lower or (lower_open and value == lower)):
        raise InvalidArgument(f"{name}={value} is below its lower limit {lower}")
    if upper is not None and (value > upper or (upper_open and value == upper)):
        raise InvalidArgument(f"{name}={value} is above its upper limit {upper}")
    return value


def check_probability(value, name):
    return check_real(value, name, lower=0.0, upper=1.0)


def check_integer_samples(samples, name="samples"):
    arr = np.asarray(samples)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgument(f"{name} must be a non-empty 1-d array")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise InvalidArgument(f"{name} must hold integers")
    elif arr.dtype.kind not in "iu":
        raise InvalidArgument(f"{name} must hold integers")
    return arr.astype(np.int64)
