"""Acceptance suite: long-running trend checks, opt-in via CAAD_RUN_ACCEPTANCE=1."""

import os

import pytest


@pytest.fixture(autouse=True)
def _require_acceptance_opt_in():
    if os.environ.get("CAAD_RUN_ACCEPTANCE", "").strip() != "1":
        pytest.skip("set CAAD_RUN_ACCEPTANCE=1 to run the acceptance suite")
