from ._version import __version__
from .density import CpdModel, RMode, RPolicy
from .localmodel import ModelOrder
from .neighbors import build_index, InsufficientNeighborsError, NeighborIndex, NeighborSet, query_knn
from .oracle import BinningConfig, joint_histogram, te_binned
from .series import Dataset, delay_embed, joint_embed, load_csv, save_csv, StateSeries, TimeSeries
from .systems import ChuaParams, CouplingParams, integrate_rk4, iterate_coupled, iterate_tent, TentParams
from .transfer import directionality_index, FlowResult, surrogate_baseline, te_matrix, TeEstimate, transfer_entropy

__all__ = [
    "__version__",
    "BinningConfig",
    "build_index",
    "ChuaParams",
    "CouplingParams",
    "CpdModel",
    "Dataset",
    "delay_embed",
    "directionality_index",
    "FlowResult",
    "InsufficientNeighborsError",
    "integrate_rk4",
    "iterate_coupled",
    "iterate_tent",
    "joint_embed",
    "joint_histogram",
    "load_csv",
    "ModelOrder",
    "NeighborIndex",
    "NeighborSet",
    "query_knn",
    "RMode",
    "RPolicy",
    "save_csv",
    "StateSeries",
    "surrogate_baseline",
    "te_binned",
    "te_matrix",
    "TeEstimate",
    "TentParams",
    "TimeSeries",
    "transfer_entropy",
]
