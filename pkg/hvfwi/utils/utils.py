import os
from typing import Any, Dict

THREADS_ENV_VAR = "HVFWI_THREADS"


def _flatten_dict_helper(flat_dict: Dict, value: Any, prefix: str, separator: str = ".") -> None:
    if isinstance(value, dict):
        for k in value.keys():
            assert isinstance(k, str), "Can only flatten dicts with str keys"
            _flatten_dict_helper(flat_dict, value[k], prefix + separator + k, separator=separator)
    else:
        flat_dict[prefix[1:]] = value


def flatten_dict(d: Dict, separator: str = ".") -> Dict:
    flat_dict = dict()
    _flatten_dict_helper(flat_dict, d, "", separator=separator)
    return flat_dict


def get_num_threads() -> int:
    """Worker count for per-source solves, capped by HVFWI_THREADS when set."""
    value = os.getenv(THREADS_ENV_VAR)
    if value is None or value.strip() == "":
        return max(1, os.cpu_count() or 1)
    try:
        num_threads = int(value)
    except ValueError:
        raise ValueError(THREADS_ENV_VAR + " must be an integer, got " + repr(value))
    return max(1, num_threads)
