"""Model hyperparameters and their noninformative defaults."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import InvalidParameterError

# Defaults used when the selection threshold tau is left unset.
DEFAULT_TAU_MCMC = 0.5
DEFAULT_TAU_MFVB = 0.1


@dataclass(frozen=True)
class Hyperparameters:
    """Prior scales and mixture weights.

    ``sigma_beta0`` is the prior standard deviation of the intercept;
    ``s_beta``, ``s_eps``, ``s_u`` are half-Cauchy scales for the
    coefficient, noise, and spline-block scale parameters; ``rho_beta`` and
    ``rho_u`` are the prior inclusion probabilities.  ``tau`` is the
    selection sparsity threshold; ``None`` means "use the fitting method's
    default" (0.5 for MCMC, 0.1 for the variational fit).
    """

    sigma_beta0: float = 1e5
    s_beta: float = 1000.0
    s_eps: float = 1000.0
    s_u: float = 1000.0
    rho_beta: float = 0.5
    rho_u: float = 0.5
    tau: float | None = None

    def __post_init__(self):
        for name in ("sigma_beta0", "s_beta", "s_eps", "s_u"):
            v = getattr(self, name)
            if not v > 0.0:
                raise InvalidParameterError(f"{name} must be > 0, got {v!r}")
        for name in ("rho_beta", "rho_u"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InvalidParameterError(f"{name} must lie in [0, 1], got {v!r}")
        if self.tau is not None and not 0.0 < self.tau < 1.0:
            raise InvalidParameterError(f"tau must lie in (0, 1), got {self.tau!r}")

    def resolve_tau(self, method: str) -> float:
        if self.tau is not None:
            return self.tau
        return DEFAULT_TAU_MCMC if method == "mcmc" else DEFAULT_TAU_MFVB

    def with_scales(self, s: float) -> "Hyperparameters":
        """Copy with all three half-Cauchy scales set to ``s`` (sweeps)."""
        return replace(self, s_beta=s, s_eps=s, s_u=s)
