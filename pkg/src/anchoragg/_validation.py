"""Small input-validation helpers shared across the package."""

from __future__ import annotations

from typing import Any


def check_fitted(obj: Any, attributes: tuple[str, ...]) -> None:
    """Raise if any of the fitted attributes are missing (sklearn convention)."""
    missing = [a for a in attributes if getattr(obj, a, None) is None]
    if missing:
        raise RuntimeError(
            f"{type(obj).__name__} is not fitted; missing {', '.join(missing)}. "
            "Call fit() first."
        )


def check_fraction(value: float, name: str = "fraction") -> float:
    if not 0.0 < value <= 1.0:
        raise ValueError(f"{name} must be in (0, 1], got {value!r}")
    return float(value)


def check_probability(value: float, name: str, *, open_low: bool = True,
                      open_high: bool = True) -> float:
    low_ok = value > 0.0 if open_low else value >= 0.0
    high_ok = value < 1.0 if open_high else value <= 1.0
    if not (low_ok and high_ok):
        raise ValueError(f"{name} out of range: {value!r}")
    return float(value)


def check_positive_int(value: int, name: str) -> int:
    if int(value) != value or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


class ParamsMixin:
    """get_params/set_params in the sklearn style, without the sklearn dependency.

    Parameters are the keyword arguments of ``__init__``, stored under the
    same attribute names. Enough for cloning, grid-style configuration and
    repr; estimators stay duck-compatible with pipelines that only need
    these two methods.
    """

    def _param_names(self) -> list[str]:
        import inspect

        sig = inspect.signature(type(self).__init__)
        return [
            name for name, p in sig.parameters.items()
            if name != "self" and p.kind not in (p.VAR_POSITIONAL, p.VAR_KEYWORD)
        ]

    def get_params(self, deep: bool = True) -> dict[str, Any]:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params: Any):
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"
