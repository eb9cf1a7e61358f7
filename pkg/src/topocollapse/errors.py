"""Exception hierarchy shared by every module."""

from __future__ import annotations


class ConfigurationError(ValueError):
    """A scene, state or parameter is inconsistent with what the simulator can run."""


class TimingError(RuntimeError):
    """Raised when a timeline fails its contact or ordering checks."""

    def __init__(self, violations):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"timing check failed: {lines}")


class SceneSyntaxError(ConfigurationError):
    """One or more problems found while parsing a ``.scene`` document.

    ``errors`` holds :class:`topocollapse.scenedsl.ParseIssue` records, each
    carrying a 1-based line and column.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(str(e) for e in self.errors))


class VisibilityUndefined(ValueError):
    """Visibility requested for samples whose max + min is zero."""
