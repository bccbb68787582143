"""
Properties app - executable checks of the mechanism's economic guarantees.

Invariant checkers inspect a single Outcome; fuzzers re-run the whole
mechanism on perturbed bids and compare the deviating worker's utility.
"""
