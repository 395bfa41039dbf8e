"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: ValidationError -> 1,
NumericalError -> 2, CapExceeded -> 3.
"""


class ContractMdpError(Exception):
    """Base class for all package errors."""


class ValidationError(ContractMdpError):
    """Malformed input: instance, policy, history, or CLI arguments."""


class PolicyFormatError(ValidationError):
    """Policy file violates the on-disk schema."""


class NumericalError(ContractMdpError):
    """The LP machinery could not certify a result; never a silent wrong answer."""


class CapExceeded(ContractMdpError):
    """An enumeration exceeded its configured budget."""
