"""Entanglement-breaking indices of quantum channels.

Channel algebra on Choi matrices, the standard channel families, EB
criteria, direct and filtered indices, filter searches and the bipartite
protocol checks, with a command-line front end (``ebindex``).
"""

from .channels import (
    BlochRep,
    Channel,
    KrausSet,
    LinearMap,
    as_channel,
    bloch_from_channel,
    channel_from_bloch,
    choi_from_kraus,
    compose,
    identity_map,
    kraus_from_choi,
    load_map,
    power,
    save_map,
    tensor,
)
from .exceptions import InvalidArgumentError, NotCompletelyPositiveError
from .filters import (
    GeneralFilterSearch,
    SearchReport,
    UnitaryFilterSearch,
    general_filter_search,
    negativity,
    single_unitary_index_max,
    unitary_filter_search,
)
from .indices import (
    Certificate,
    CertificateKind,
    IndexResult,
    divergence_check,
    n_depolarizing_closed,
    n_gad_closed,
    n_gen_depolarizing,
    n_index,
    nu_unital_qubit,
    special_svd,
)
from .separability import EbVerdict, Verdict, eb_verdict, is_eb, ppt_verdict

__version__ = "0.1.0"

__all__ = [
    "BlochRep", "Channel", "KrausSet", "LinearMap", "as_channel", "bloch_from_channel",
    "channel_from_bloch", "choi_from_kraus", "compose", "identity_map", "kraus_from_choi",
    "load_map", "power", "save_map", "tensor",
    "InvalidArgumentError", "NotCompletelyPositiveError",
    "GeneralFilterSearch", "SearchReport", "UnitaryFilterSearch", "general_filter_search",
    "negativity", "single_unitary_index_max", "unitary_filter_search",
    "Certificate", "CertificateKind", "IndexResult", "divergence_check",
    "n_depolarizing_closed", "n_gad_closed", "n_gen_depolarizing", "n_index",
    "nu_unital_qubit", "special_svd",
    "EbVerdict", "Verdict", "eb_verdict", "is_eb", "ppt_verdict",
    "__version__",
]
