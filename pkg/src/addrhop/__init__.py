"""Address-hopping privacy toolkit.

A monitored node's network address is regenerated every zeta seconds by a
keyed chaotic-hash tracking function; authorized peers holding the same
parameters regenerate the identical sequence. This package provides the hash,
the tracking function and hop schedule, clock-sync safety bounds, analytic
collision/loss models with Monte Carlo oracles, a discrete-event simulator,
an HTTP service exposing all of it, and a CLI front end.
"""

__version__ = "0.1.0"

from .chaos import (
    BinaryFraction,
    Digest,
    HashParams,
    DEFAULT_HASH_PARAMS,
    digest,
    digest_sequence,
    encode_timestamp,
    h_x,
    tent_step,
    whiteness_report,
)
from .tracking import (
    HopSchedule,
    SubnetSpec,
    TFParams,
    accepts,
    active_addresses,
    address_at,
    assemble,
    derive_width,
    timestamp_at,
)
from .timesync import DriftClock, SyncPolicy, agreement_check, coarse_sync, max_eta, worst_skew
from .analysis import (
    CollisionScenario,
    LossModel,
    StatSummary,
    collision_mc,
    collision_prob,
    expected_loss,
    summarize,
)
from .sim import (
    CentralNode,
    HandshakeError,
    HandshakeResult,
    Metrics,
    ParamBundle,
    SimConfig,
    collision_trace,
    handshake,
    run,
    sweep,
    threshold_scan,
)

__all__ = [name for name in dir() if not name.startswith("_")]
