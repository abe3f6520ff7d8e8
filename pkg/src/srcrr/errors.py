"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SrcrrError(Exception):
    exit_code = 1


class PmfParseError(SrcrrError, ValueError):
    """Malformed pmf document or inconsistent alphabet/mass data."""

    exit_code = 2


class DegenerateInputError(SrcrrError, ValueError):
    """Empty support, zero normalizers, or other degenerate inputs."""

    exit_code = 3


class InfeasibleDistortionError(SrcrrError, ValueError):
    exit_code = 4

    def __init__(self, D, underline_D):
        self.D = D
        self.underline_D = underline_D
        super().__init__(
            f"target distortion D={D:.9g} is below the minimum achievable "
            f"distortion D_min={underline_D:.9g}; the rate region is empty"
        )


class PreconditionError(SrcrrError, ValueError):
    """An operation's hypotheses are violated (parameter ranges, orderings)."""

    exit_code = 5
