"""
### logs.py
#### Functions:
    - KeyValueFormatter
    - setup_logging
"""

import logging
import sys

# Attributes every LogRecord carries; anything else came in through `extra=`.
_RESERVED = set(vars(logging.LogRecord("", 0, "", 0, "", None, None))) | {"message", "asctime"}


class KeyValueFormatter(logging.Formatter):
    """Standard line followed by ``key=value`` pairs for each `extra` field."""

    def format(self, record: logging.LogRecord) -> str:
        line = super().format(record)
        pairs = [f"{k}={_short(v)}" for k, v in sorted(vars(record).items()) if k not in _RESERVED]
        return f"{line} {' '.join(pairs)}" if pairs else line


def _short(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def setup_logging(level: str="INFO") -> None:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(KeyValueFormatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(level.upper())
