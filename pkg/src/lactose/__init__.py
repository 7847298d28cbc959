"""Gradient training with per-branch parameter banks swapped by breakpoint routing.

Branching conditions cannot live inside a differentiated graph, so this
package hosts them outside it: an immutable array of breakpoints on the
real line routes each sample to a branch, and that branch's parameters are
loaded into a single live model for the step and stored back afterwards.
Each branch therefore trains in its own parameter space, one record at a
time.
"""

__version__ = "0.1.0"

from .bank import (
    INIT_INDEPENDENT,
    INIT_SHARED,
    OptimizerKind,
    OptimizerSpec,
    OptimizerState,
    ParameterBank,
    apply_update,
    bank_diff,
    bank_init,
    load_bank,
    load_branch,
    manifest_path,
    read_manifest,
    save_bank,
    store_branch,
)
from .cli import CompareResult, cmd_compare, cmd_eval, cmd_generate, cmd_predict, cmd_train, main
from .config import ExperimentConfig, config_from_dict, load_config
from .dataio import (
    ConstantSegment,
    LinearSegment,
    PiecewiseSpec,
    SineSegment,
    generate,
    piecewise_value,
    read_dataset,
    validate_spec,
    write_dataset,
    write_predictions,
)
from .errors import (
    BankFormatError,
    ConfigError,
    ConsistencyError,
    LactoseError,
    NumericError,
    RoutingError,
    ShapeError,
    ValidationError,
)
from .net import (
    Activation,
    DenseLayer,
    FlatParams,
    LayerSpec,
    LossKind,
    MLPModel,
    ModelLayout,
    backward,
    build_model,
    extract_params,
    forward,
    inject_params,
    loss,
    random_params,
)
from .router import ConditionArray, route, validate
from .trainer import (
    BankEval,
    OracleVerdict,
    TrainRecord,
    TrainReport,
    evaluate_bank,
    evaluate_model,
    lactose_step,
    partition_oracle,
    train,
    train_monolithic,
    write_report_csv,
)
