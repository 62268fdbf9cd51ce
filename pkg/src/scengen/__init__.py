"""Scenario generation and reduction by distribution and moment matching, with a Nash-bargaining variant."""

__version__ = "0.1.0"
