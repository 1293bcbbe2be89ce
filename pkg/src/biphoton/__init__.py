"""Simulation and analysis of polarization-entangled photon-pair experiments.

The package has three layers:

- a two-photon linear-optics model (:mod:`~biphoton.quantum`,
  :mod:`~biphoton.elements`, :mod:`~biphoton.circuits`,
  :mod:`~biphoton.source`, :mod:`~biphoton.analytic`),
- a Monte Carlo detector simulation with a binary time-tag format
  (:mod:`~biphoton.timetags`) and a vectorized coincidence engine
  (:mod:`~biphoton.engine`),
- experiment drivers, reports, and a command line
  (:mod:`~biphoton.experiments`, :mod:`~biphoton.plots`,
  :mod:`~biphoton.cli`).
"""

from .analytic import (
    RateQuad,
    VisibilityPair,
    chsh_from_correlations,
    chsh_from_visibility,
    correlation,
    doubles_rate,
    effective_visibility,
    mixed_rates,
    singlet_rates,
    sum_angle_rates,
)
from .circuits import (
    BELL_ROLES,
    COALESCENCE_ROLES,
    Circuit,
    bell_circuit,
    coalescence_circuit,
    mixture_pair_probabilities,
)
from .elements import (
    ElementSpec,
    WaveplateSetting,
    compose,
    hwp_unitary,
    npbs_unitary,
    pbs_routing,
    qwp_unitary,
)
from .engine import (
    BELL_PAIRS,
    COALESCENCE_PAIRS,
    AnalysisConfig,
    CoincidenceReport,
    VisibilityFit,
    count_coincidences,
    fit_fringe,
    write_bins_csv,
)
from .errors import (
    BiphotonError,
    CalibrationRangeError,
    ConfigurationError,
    DegenerateStateError,
    DomainError,
    EmptyPostselectionError,
    FormatError,
    InsufficientDataError,
    ModelError,
    StreamError,
    UndefinedCorrelationError,
)
from .experiments import (
    ChshResult,
    ExperimentConfig,
    ScanGrid,
    ScanPoint,
    ScanSeries,
    VisibilityModel,
    analyze_file,
    bell_damper,
    fit_scan_visibility,
    run_chsh,
    run_coalescence_scan,
    run_experiment,
    run_fixed_scan,
    run_temperature_sweep,
    run_twin_scan,
    simulate_point,
    write_points_csv,
    write_series_bins_csv,
    write_series_json,
)
from .quantum import (
    Mode,
    ModeBasis,
    ModeUnitary,
    OutcomeDistribution,
    TwoPhotonState,
    apply_unitary,
    channel_pair_distribution,
    make_pair_state,
    marginal_click_pattern,
    outcome_distribution,
    postselect,
    superpose,
)
from .source import (
    CalibrationAnchor,
    PhaseMatchingModel,
    SourceCalibration,
    SourceEnsemble,
    diagonal_correlation_curve,
    source_state,
    validate_qpm,
)
from .timetags import (
    DetectorModel,
    SimRun,
    TimeTagRecord,
    TimeTagStream,
    generate_stream,
    read_ttag,
    read_ttag_bytes,
    write_ttag,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
