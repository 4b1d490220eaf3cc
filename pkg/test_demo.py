#!/usr/bin/env python3
"""
Tests for the demo verdict
"""

import os
import sys

# Add the current directory to Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from demo_recovery import is_working


def _checks(gamp_ok, em_ok, others):
    return [("gamp recovers", gamp_ok, True), ("em recovers", em_ok, True)] + \
        [(f"extra {i}", ok, False) for i, ok in enumerate(others)]


def test_failed_recovery_is_never_working():
    assert not is_working(_checks(False, True, [True, True, True]))
    assert not is_working(_checks(True, False, [True, True, True]))
    assert not is_working(_checks(False, False, [True, True, True]))


def test_recovery_plus_enough_extras_is_working():
    assert is_working(_checks(True, True, [True, True, True]))
    assert is_working(_checks(True, True, [True, True, False]))
    assert not is_working(_checks(True, True, [True, False, False]))


if __name__ == "__main__":
    for name, func in list(globals().items()):
        if name.startswith("test_") and callable(func):
            print(f"🔍 {name}")
            func()
    print("✅ All demo tests passed")
