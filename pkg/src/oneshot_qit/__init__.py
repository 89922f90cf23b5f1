"""Numerical toolkit for one-shot quantum information: entropic quantities,
coding-protocol simulation and executable chain-rule checks."""

__version__ = "0.1.0"

from .qmat import (
    ChannelError,
    DensityMatrix,
    DomainError,
    KrausChannel,
    LabelError,
    Operator,
    PreconditionError,
    PureState,
    RegisterSpace,
    apply_channel,
    fidelity,
    partial_trace,
    purify,
    tensor,
    trace_norm,
)
from .entropics import (
    EntropicValue,
    Tester,
    d_hypo,
    d_hypo_sdp,
    d_max,
    d_max_smooth,
    i_hypo,
    i_max,
    i_max_smooth,
)
from .protocols import ProtocolConfig, ProtocolOutcome, ResourceBudgetError

__all__ = [
    "ChannelError",
    "DensityMatrix",
    "DomainError",
    "EntropicValue",
    "KrausChannel",
    "LabelError",
    "Operator",
    "PreconditionError",
    "ProtocolConfig",
    "ProtocolOutcome",
    "PureState",
    "RegisterSpace",
    "ResourceBudgetError",
    "Tester",
    "apply_channel",
    "d_hypo",
    "d_hypo_sdp",
    "d_max",
    "d_max_smooth",
    "fidelity",
    "i_hypo",
    "i_max",
    "i_max_smooth",
    "partial_trace",
    "purify",
    "tensor",
    "trace_norm",
]
