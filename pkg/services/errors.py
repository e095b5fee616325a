# -*- coding: utf-8 -*-
"""
Error types raised by the homogenization services.

Every failure the CLI can report derives from HomogError, so a single
except clause in homogenize.py maps them to exit code 2.
"""


class HomogError(RuntimeError):
    pass


# lattice-geometry
class DegenerateBasis(HomogError):
    pass


class EmptyTruncation(HomogError):
    pass


# symbols-coefficients
class RankDeficientSymbol(HomogError):
    pass


class NotPositiveDefinite(HomogError):
    pass


# cell-homogenization
class SingularCellSystem(HomogError):
    pass


class TruncationTooSmall(HomogError):
    pass


class BracketingViolation(HomogError):
    pass


class DegenerateGerm(HomogError):
    pass


# spectral-propagators
class RankMismatch(HomogError):
    pass


# experiments / evolution
class SupportOverflow(HomogError):
    pass


class QuadratureUnconverged(HomogError):
    pass


class ConfigInvalid(HomogError):
    pass


class ResultsIoError(HomogError):
    pass
