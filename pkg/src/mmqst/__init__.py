"""Pulse synthesis and verification for quantum state transfer through a
multimode resonator.

The toolkit solves the sender's bounded-memory amplitude equation, builds
the matching receiver pulse from the delayed dark-state condition, and
verifies the pair by independent integration of the full multimode
dynamics, root analysis of the Laplace characteristic function, and
noise-robustness simulations.
"""

__version__ = "0.1.0"

from .channel import (CaseLabel, ChannelSpec, PulseParams, Scenario,
                      build_case, kernel_eval)
from .diagnostics import (TransferReport, buffer_term, build_transfer_report,
                          discrepancy_metrics, final_inefficiency,
                          inefficiency_minimum, integrated_population,
                          loss_estimate)
from .errors import (ConfigurationError, InconsistentScenarioError,
                     IntegratorFailureError, NumericalFailureError,
                     SynthesisRefusedError, ToolkitError,
                     UnresolvedRegionError)
from .grids import SampledSignal, TimeGrid
from .ide import (RichardsonResult, ide_self_convergence, richardson_check,
                  solve_windowed_ide)
from .poles import (PoleSet, SearchBox, alpha_from_poles, characteristic_fn,
                    characteristic_derivative, default_search_box, find_poles,
                    single_qubit_poles)
from .synthesis import (LaunchModel, PulsePair, SynthesisRun, SynthesisTrace,
                        reconstruct_channel_amplitudes, run_synthesis,
                        synthesize_receiver, terminal_residual)
from .validator import (HeisenbergRun, LeakageReport, NoiseParams, Trajectory,
                        evolve_leakage, evolve_linear_heisenberg,
                        evolve_single_excitation, evolve_with_loss)

__all__ = [
    "CaseLabel", "ChannelSpec", "PulseParams", "Scenario", "build_case",
    "kernel_eval", "TimeGrid", "SampledSignal", "solve_windowed_ide",
    "richardson_check", "ide_self_convergence", "RichardsonResult",
    "LaunchModel", "PulsePair", "SynthesisRun", "SynthesisTrace",
    "run_synthesis", "synthesize_receiver", "reconstruct_channel_amplitudes",
    "terminal_residual", "Trajectory", "NoiseParams", "LeakageReport",
    "HeisenbergRun", "evolve_single_excitation", "evolve_with_loss",
    "evolve_leakage", "evolve_linear_heisenberg", "PoleSet", "SearchBox",
    "characteristic_fn", "characteristic_derivative", "default_search_box",
    "find_poles", "single_qubit_poles", "alpha_from_poles", "TransferReport",
    "integrated_population", "buffer_term", "loss_estimate",
    "build_transfer_report", "discrepancy_metrics", "inefficiency_minimum",
    "final_inefficiency", "ToolkitError", "ConfigurationError",
    "NumericalFailureError", "SynthesisRefusedError",
    "InconsistentScenarioError", "IntegratorFailureError",
    "UnresolvedRegionError",
]
