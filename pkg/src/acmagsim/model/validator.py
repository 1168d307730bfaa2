"""Validator for scenario parameter blocks."""
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence
import math


@dataclass
class Violation:
    """A rejected value in a configuration."""
    path: str           # Dotted location, e.g. "field.frequency"
    message: str        # Human-readable description
    severity: str = "error"  # 'error' or 'warning'

    def to_dict(self) -> Dict[str, str]:
        return {"path": self.path, "message": self.message, "severity": self.severity}


class ParameterValidator:
    """Collects violations while walking a nested config mapping.

    Each ``check_*`` method records a violation instead of raising, so one
    pass reports every bad field. Checks return the value when it is usable
    and ``None`` otherwise.
    """

    def __init__(self):
        self.violations: List[Violation] = []

    @property
    def errors(self) -> List[Violation]:
        return [v for v in self.violations if v.severity == "error"]

    def error(self, path: str, message: str) -> None:
        self.violations.append(Violation(path, message, "error"))

    def warning(self, path: str, message: str) -> None:
        self.violations.append(Violation(path, message, "warning"))

    def check_number(self, path: str, value: Any, *, minimum: Optional[float] = None,
                     maximum: Optional[float] = None, strict_min: bool = False) -> Optional[float]:
        """Accept a finite real number inside the given bounds."""
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.error(path, f"expected a number, got {type(value).__name__}")
            return None
        value = float(value)
        if not math.isfinite(value):
            self.error(path, "must be finite")
            return None
        if minimum is not None:
            if strict_min and not value > minimum:
                self.error(path, f"must be > {minimum:g}, got {value:g}")
                return None
            if not strict_min and value < minimum:
                self.error(path, f"must be >= {minimum:g}, got {value:g}")
                return None
        if maximum is not None and value > maximum:
            self.error(path, f"must be <= {maximum:g}, got {value:g}")
            return None
        return value

    def check_int(self, path: str, value: Any, *, minimum: Optional[int] = None) -> Optional[int]:
        if isinstance(value, bool) or not isinstance(value, int):
            self.error(path, f"expected an integer, got {type(value).__name__}")
            return None
        if minimum is not None and value < minimum:
            self.error(path, f"must be >= {minimum}, got {value}")
            return None
        return value

    def check_choice(self, path: str, value: Any, choices: Sequence[str]) -> Optional[str]:
        if not isinstance(value, str) or value.lower() not in [c.lower() for c in choices]:
            self.error(path, f"must be one of {', '.join(choices)}; got {value!r}")
            return None
        return value.lower()

    def check_grid(self, path: str, values: Any, *, minimum: Optional[float] = None,
                   strict_min: bool = False, monotone: bool = True) -> Optional[List[float]]:
        """Accept a nonempty list of numbers, strictly increasing when ``monotone``."""
        if not isinstance(values, list) or not values:
            self.error(path, "must be a nonempty list of numbers")
            return None
        checked = [self.check_number(f"{path}[{i}]", v, minimum=minimum, strict_min=strict_min)
                   for i, v in enumerate(values)]
        if any(v is None for v in checked):
            return None
        grid = [float(v) for v in checked if v is not None]
        if monotone and any(b <= a for a, b in zip(grid, grid[1:])):
            self.error(path, "must be strictly increasing")
            return None
        return grid

    def check_keys(self, path: str, table: Dict[str, Any], allowed: Sequence[str]) -> None:
        """Flag keys that no section reads."""
        for key in table:
            if key not in allowed:
                where = f"{path}.{key}" if path else key
                self.error(where, "unknown key")

    def check_rule(self, path: str, ok: bool, message: str) -> bool:
        if not ok:
            self.error(path, message)
        return ok

    def guard(self, path: str, build: Callable[[], Any]) -> Any:
        """Run a constructor, turning its ValueError into a violation."""
        try:
            return build()
        except ValueError as exc:
            self.error(path, str(exc))
            return None
