"""
Tests for common exceptions and seeded random streams.
"""

import numpy as np
import pytest

from apps.common.exceptions import (
    ConfigurationError,
    DomainError,
    FedAuctionException,
    PropertyViolationError,
)
from apps.common.random import harmonic_arrival_probabilities, make_generator


class TestExceptions:
    """Tests for the exception hierarchy."""

    def test_domain_error_is_value_error(self):
        """Test DomainError can be caught as ValueError."""
        with pytest.raises(ValueError):
            raise DomainError("bad")
        assert issubclass(DomainError, FedAuctionException)

    def test_configuration_error_carries_path_and_errors(self):
        """Test ConfigurationError message and attributes."""
        exc = ConfigurationError("scenarios/x.env", ["seeds: too short", "budget: negative"])
        assert exc.path == "scenarios/x.env"
        assert exc.errors == ["seeds: too short", "budget: negative"]
        assert str(exc) == "Invalid scenario scenarios/x.env: seeds: too short; budget: negative"

    def test_property_violation_error(self):
        """Test PropertyViolationError lists the failing properties."""
        exc = PropertyViolationError(["cost_truthfulness"])
        assert exc.property_ids == ["cost_truthfulness"]
        assert "cost_truthfulness" in str(exc)


class TestRandomStreams:
    """Tests for seeded generators."""

    def test_same_seed_same_stream(self):
        """Test identical seeds reproduce identical draws."""
        assert np.array_equal(make_generator(7).random(5), make_generator(7).random(5))

    def test_sub_streams_differ(self):
        """Test stream paths give independent draws."""
        assert not np.array_equal(make_generator(7, 1).random(5), make_generator(7, 2).random(5))


class TestHarmonicArrivals:
    """Tests for the 1/t arrival law."""

    def test_sums_to_one(self):
        """Test probabilities sum to one."""
        assert harmonic_arrival_probabilities(10).sum() == pytest.approx(1.0, abs=1e-12)

    def test_first_step_probability(self):
        """Test P(1) = 1 / H_10."""
        assert harmonic_arrival_probabilities(10)[0] == pytest.approx(0.3414, abs=1e-4)

    def test_decreasing(self):
        """Test later steps are less likely."""
        probabilities = harmonic_arrival_probabilities(5)
        assert all(np.diff(probabilities) < 0)
