"""
Run Config
Resolved command line with every default materialised
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict

from common.errors import UsageError
from schema.config_schemas import get_config_schema
from schema.schema_validator import validator

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    """Subcommand plus its fully resolved options"""

    command: str
    options: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        validator.require(self.to_dict(), get_config_schema('run'), "run config")

    def to_dict(self):
        return {'command': self.command, 'options': dict(self.options)}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, default=str)

    def argv(self):
        """Equivalent command line, for provenance"""
        args = [self.command]
        for key, value in sorted(self.options.items()):
            if value is None or value is False or key in ('print_config',):
                continue
            flag = "--" + key.replace("_", "-")
            if value is True:
                args.append(flag)
            elif isinstance(value, (list, tuple)):
                args.extend([flag, ",".join(str(v) for v in value)])
            else:
                args.extend([flag, str(value)])
        return args


def parse_eps_grid(text):
    """
    Parse `start:end:step` (inclusive end) or a comma-separated list

    Returns:
        List of floats
    """
    text = text.strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError("expected start:end:step")
            start, end, step = (float(p) for p in parts)
            if step <= 0 or end < start:
                raise ValueError("need step > 0 and end >= start")
            count = int(round((end - start) / step)) + 1
            grid = [round(start + i * step, 10) for i in range(count)]
            grid = [e for e in grid if e <= end + 1e-9]
        else:
            grid = [float(p) for p in text.split(",") if p.strip()]
    except ValueError as e:
        raise UsageError(f"malformed epsilon grid '{text}': {e}")
    if not grid:
        raise UsageError(f"empty epsilon grid '{text}'")
    if any(e < 0 for e in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError(f"epsilon grid '{text}' must be non-negative and strictly increasing")
    return grid


def parse_list(text, allowed, what):
    items = [t.strip().lower() for t in text.split(",") if t.strip()]
    unknown = [t for t in items if t not in allowed]
    if unknown or not items:
        raise UsageError(f"invalid {what} {unknown or text!r}; valid: {', '.join(allowed)}")
    return items
