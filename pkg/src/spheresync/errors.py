"""Exceptions raised by the toolkit."""


class ZeroNormError(ValueError):
    """A lifted state reached the zero guard, where its direction is undefined."""

    def __init__(self, agent=None, time=None, norm=None):
        self.agent = agent
        self.time = time
        self.norm = norm
        parts = []
        if agent is not None:
            parts.append(f"agent {agent}")
        if time is not None:
            parts.append(f"t={time:.6g}")
        if norm is not None:
            parts.append(f"|z|={norm:.3e}")
        super().__init__("zero norm" + (" (" + ", ".join(parts) + ")" if parts else ""))


class OutOfDiscError(ValueError):
    """Equatorial coordinates outside the open unit disc."""


class NotSouthernError(ValueError):
    """Point is not on the open southern hemisphere (gnomonic chart domain)."""


class IntegrationError(RuntimeError):
    """Numerical integration produced non-finite values."""
