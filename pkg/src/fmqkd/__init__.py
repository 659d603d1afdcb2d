"""Monte Carlo simulator of polarization-encoded BB84 at 848 nm over
composite telecom distribution networks with few-mode propagation."""

__version__ = "0.1.0"

from .modal import (  # noqa: F401
    JonesVector,
    ModalState,
    TransferOperator,
    apply,
    compose,
    encode_jones,
    project_polarization,
)
from .odn import (  # noqa: F401
    Attenuator,
    Connector,
    DriftParams,
    FiberSpan,
    ModeFilter,
    ODNTopology,
    Splitter,
    chain_transfer,
    drift_step,
    element_transfer,
    load_topology,
    port_transmission_sweep,
    scenario_preset,
)
from .link import (  # noqa: F401
    DetectorConfig,
    EncoderConfig,
    EventBatch,
    detect_symbols,
    dump_events,
    generate_frames,
    load_events,
)
from .postproc import (  # noqa: F401
    SyncFailed,
    TrialReport,
    frame_sync,
    qber,
    secure_rate,
    sift,
    temporal_filter,
)
from .coexistence import (  # noqa: F401
    ClassicalChannelPlan,
    FilterChain,
    noise_count_rate,
    spontaneous_emission_floor,
)
from .runner import (  # noqa: F401
    RunConfig,
    RunManifest,
    SweepSpec,
    run_point,
    run_sweep,
    write_csv,
)
