"""Exception hierarchy shared by all layers."""

from __future__ import annotations


class SecureMSRError(Exception):
    pass


class ParamError(SecureMSRError, ValueError):
    pass


# field tower

class FieldError(SecureMSRError):
    pass


class NoIrreducibleFound(FieldError):
    pass


class NotIrreducible(FieldError, ValueError):
    pass


class NotPrimitive(FieldError, ValueError):
    pass


class DivisionByZero(FieldError, ZeroDivisionError):
    pass


class LinearSystemError(FieldError):
    """Raised by the solvers; carries the rank and a basis of the row space."""

    def __init__(self, message, rank, basis=None):
        super().__init__(message)
        self.rank = rank
        self.basis = basis


class Inconsistent(LinearSystemError):
    pass


class Underdetermined(LinearSystemError):
    pass


# code layer

class TowerTooSmall(ParamError):
    pass


class FieldTooSmall(TowerTooSmall):
    pass


class DegenerateCode(ParamError):
    pass


class DigitOutOfRange(ParamError, IndexError):
    pass


class TooFewNodes(SecureMSRError):
    pass


class InconsistentInput(SecureMSRError):
    pass


class PlanMismatch(SecureMSRError):
    pass


class MissingHelper(SecureMSRError):
    pass


# precoding / scheme

class TooManyPoints(ParamError):
    pass


class SingularPoints(SecureMSRError):
    pass


class BudgetTooLarge(ParamError):
    pass


class LengthMismatch(SecureMSRError, ValueError):
    pass


class HelperInRepairSet(ParamError):
    pass


class NoValidR(SecureMSRError):
    pass


# storage

class ShardError(SecureMSRError):
    pass


class MissingHelperShard(ShardError):
    pass


class HeaderMismatch(ShardError):
    pass


class TooFewShards(ShardError):
    pass


class CorruptShard(ShardError):
    pass
