class ConfigError(ValueError):
    """Invalid network or run configuration."""


class DegenerateChannelError(RuntimeError):
    """Stacked channels are (numerically) rank deficient; resample the trial."""


class TrialFailure(RuntimeError):
    """A Monte-Carlo trial could not be completed after retries."""


class RankOneError(ValueError):
    """A lifted phase matrix is too far from rank one to extract a vector."""

    def __init__(self, ratio: float):
        super().__init__(f"lambda_max/trace = {ratio:.6g} is below the rank-one threshold")
        self.ratio = ratio
