"""Outage analysis of a full-duplex energy-harvesting DF relay over kappa-mu fading."""

__version__ = "0.1.0"

from . import analytic, fading, mathkern, sysmodel  # noqa: E402
from .analytic import OutageMethod, OutageResult  # noqa: E402
from .errors import DomainError, SeriesConvergenceError  # noqa: E402
from .fading import FadingKind, KappaMuParams  # noqa: E402
from .mathkern import Accuracy, SeriesPolicy  # noqa: E402
from .sysmodel import MonteCarloReport, SystemParams, mc_outage  # noqa: E402

__all__ = [
    "Accuracy",
    "DomainError",
    "FadingKind",
    "KappaMuParams",
    "MonteCarloReport",
    "OutageMethod",
    "OutageResult",
    "SeriesConvergenceError",
    "SeriesPolicy",
    "SystemParams",
    "analytic",
    "fading",
    "mathkern",
    "mc_outage",
    "sysmodel",
]
