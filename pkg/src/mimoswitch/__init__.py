"""Relay beamforming for wireless MIMO switching, with optional network coding.

A multi-antenna relay realizes a permutation (switch pattern) among N
single-antenna stations. This package enumerates switch patterns and
condensed derangement sets, designs zero-forcing and network-coded relay
matrices, schedules traffic over derangement rounds and runs Monte Carlo
throughput sweeps.
"""
from .channel import ChannelRealization, draw_channel, load_channel_file, write_channel_file
from .combinatorics import (
    CondensedSet,
    Derangement,
    Permutation,
    enumerate_condensed_sets,
    enumerate_derangements,
    full_unicast_pairs,
    is_pairwise,
    subfactorial,
)
from .errors import (
    CurveRangeError,
    DegenerateChannelStreamError,
    DemandInfeasibleError,
    DomainError,
    InfeasiblePowerError,
    InvalidSizeError,
    MimoSwitchError,
    ParseError,
    SchemeMismatchError,
    SingularChannelError,
    SizeMismatchError,
)
from .montecarlo import SweepConfig, SweepResult, db_gain, params_for_snr, run_sweep, snr_to_noise
from .oracle import SlotTrace, simulate_slot, verify_design
from .relay import RelayDesign, SchemeConfig, SystemParams, design, effective_rate, solve_sigma_e
from .scheduling import Flow, Schedule, TrafficDemand, compile_schedule, fair_throughput, fair_weights

__version__ = "0.1.0"
