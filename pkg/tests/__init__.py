"""
Simulator Test Suite

Unit and end-to-end tests for the GP, field, planner, metrics and batch modules.
"""
