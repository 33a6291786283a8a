"""remsim: Stark-modulated AFC quantum-memory simulator for Eu:YSO waveguides."""

__version__ = "0.1.0"

from .ions import (
    AbsorptionSpectrum,
    HyperfineStructure,
    IonEnsemble,
    absorption,
    default_material,
    ensemble_from_config,
    load_material,
    structure_from_config,
    uniform_material,
    validate_structure,
)
from .pumping import (
    PumpPrimitive,
    PumpSequence,
    apply_pump,
    class_contributions,
    prepare_enhanced_profile,
    pump_class_report,
    run_sequence,
)
from .stark import (
    ElectricPulse,
    StarkConfig,
    field_from_voltage,
    fit_stark_coefficient,
    pulse_phase,
    split_spectrum,
)
from .afc import CombSpec, fit_finesse, gaussian_efficiency, render_comb, square_efficiency
from .echo import (
    EchoTrace,
    PolarizationChannel,
    Pulse,
    apply_channel,
    counting_histogram,
    propagate,
    smafc_run,
)
from .tomography import (
    ProcessMatrix,
    TomographyCounts,
    classical_bound,
    mle_reconstruct,
    monte_carlo_error,
    process_fidelity,
    sigma_margin,
    simulate_counts,
)
