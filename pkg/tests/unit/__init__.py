"""
Unit tests for Weak Gauge Lab.

This package contains unit tests for the lab components.
"""
