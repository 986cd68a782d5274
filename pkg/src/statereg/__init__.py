"""statereg: FSM state-register identification in gate-level netlists.

Pipeline: parse and technology-map a flattened structural Verilog netlist,
model it as a directed graph with per-cell features, extract each register's
depth-limited backward fan-in path structure, embed every structure with a
graph attention auto-encoder, and cluster the scalar embeddings with fixed
thresholds into STATE (FSM) and DATA registers.
"""

__version__ = "0.1.0"

from .classify import (
    Classification,
    ClusterGroup,
    ClusterSet,
    Label,
    classify,
    cluster,
    fdv,
    label_groups,
)
from .graph import (
    FEATURE_DIM,
    CircuitGraph,
    PathStructure,
    build_graph,
    extract_all,
    extract_path_structure,
    node_feature,
)
from .evalharness import (
    ConfusionCounts,
    DesignBundle,
    GroundTruth,
    LoocvResult,
    MetricsReport,
    confusion,
    design_bundle,
    loocv,
    metrics,
    mf_bounds,
)
from .model import (
    AdamState,
    GateModel,
    LayerParams,
    PreparedStructure,
    TrainConfig,
    TrainResult,
    adam_step,
    attention_logits,
    attention_weights,
    decode,
    embed_register,
    encode,
    encoder_layer,
    init_model,
    load_model,
    loss_and_gradients,
    prepare_structure,
    reconstruction_loss,
    save_model,
    train,
)
from .netlist import (
    Cell,
    CellKind,
    Net,
    Netlist,
    TechLibrary,
    default_tech_library,
    load_tech_library,
    map_to_independent,
    parse_netlist,
    registers_of,
)
from .synth import SynthSpec, generate_synthetic
