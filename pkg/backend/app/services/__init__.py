"""Scenario configs and the runner that turns them into checks and artifacts."""
