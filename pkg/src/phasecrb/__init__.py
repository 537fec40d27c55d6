"""Quantum Cramér-Rao bounds for tracking a fluctuating optical phase.

Submodules:

- ``spectra``: phase-noise priors, beam models and their spectra
- ``fisher``: quantum Fisher information spectra and beam validation
- ``bound``: the MSE bound integral, closed forms and scaling fits
- ``asymptotic``: the dimensionless constant C and its minimum C0
- ``tracking``: Kalman filter and smoother simulations
- ``cli``: the ``phasecrb`` command
"""

__version__ = "0.1.0"

from .spectra import (  # noqa: E402
    Coherent,
    General,
    LorentzianSum,
    OpoSqueezed,
    OrnsteinUhlenbeck,
    PowerLaw,
    Spectrum,
    classical_fisher_spectrum,
    mixed_to_pure,
    opo_correlations,
    phase_prior_spectrum,
    photon_flux,
    pure_pump_amplitude,
    wiener,
)
from .fisher import (  # noqa: E402
    general_quantum_fisher_spectrum,
    mean_field_fisher_spectrum,
    opo_quantum_fisher_spectrum,
    validate_beam_spectrum,
)
from .bound import (  # noqa: E402
    coherent_bound,
    crb_mse,
    heisenberg_lower_bound,
    mean_field_bound_closed_form,
    powerlaw_constant_integral,
    scaling_exponent_fit,
)
from .asymptotic import (  # noqa: E402
    C0_EXACT,
    C_value,
    StarredParams,
    asymptotic_convergence_check,
    optimize_C,
    starred_fisher,
)
from .tracking import (  # noqa: E402
    TrackingConfig,
    monte_carlo_mse,
    riccati_steady_state,
    simulate_record,
    wiener_smoother_mse,
)

__all__ = [
    "Coherent", "General", "LorentzianSum", "OpoSqueezed", "OrnsteinUhlenbeck", "PowerLaw",
    "Spectrum", "classical_fisher_spectrum", "mixed_to_pure", "opo_correlations",
    "phase_prior_spectrum", "photon_flux", "pure_pump_amplitude", "wiener",
    "general_quantum_fisher_spectrum", "mean_field_fisher_spectrum",
    "opo_quantum_fisher_spectrum", "validate_beam_spectrum",
    "coherent_bound", "crb_mse", "heisenberg_lower_bound", "mean_field_bound_closed_form",
    "powerlaw_constant_integral", "scaling_exponent_fit",
    "C0_EXACT", "C_value", "StarredParams", "asymptotic_convergence_check", "optimize_C",
    "starred_fisher",
    "TrackingConfig", "monte_carlo_mse", "riccati_steady_state", "simulate_record",
    "wiener_smoother_mse",
]
