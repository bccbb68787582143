"""
Common exceptions for fedauction.
"""


class FedAuctionException(Exception):
    """Base exception for all fedauction custom exceptions."""

    pass


class DomainError(FedAuctionException, ValueError):
    """Raised when an operation is called outside its mathematical domain."""

    pass


class ConfigurationError(FedAuctionException):
    """Raised when a scenario file cannot be read or fails validation."""

    def __init__(self, path: str, errors: list[str]):
        self.path = path
        self.errors = errors
        super().__init__(
            f"Invalid scenario {path}: " + "; ".join(errors)
        )


class PropertyViolationError(FedAuctionException):
    """Raised when one or more economic property checks report violations."""

    def __init__(self, property_ids: list[str]):
        self.property_ids = property_ids
        super().__init__(
            f"Property violations in: {', '.join(property_ids)}"
        )
