"""Joint user selection and linear precoding for multiuser MIMO downlink via group LASSO."""
from .channel import ChannelMatrix, DimensionError, load_channel, sample_rayleigh, save_channel
from .metrics import MetricsReport, NoiseProfile, avg_throughput, d_value, evaluate, power_leakage, rss, sinr
from .precoder import (DegenerateSolutionError, PrecoderOutput, decompose, group_lasso_precoder,
                       mrt_random)
from .scenarios import ScenarioConfig, SweepRecord, emit_csv, read_csv, run_sweep
from .solver import SolverConfig, SolverResult, objective, solve_constrained, solve_rls

__version__ = "0.1.0"
