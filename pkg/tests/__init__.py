"""Test suite for acmagsim."""
