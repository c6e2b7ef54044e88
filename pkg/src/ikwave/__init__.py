"""Simulation and verification tools for the Isobe-Kakinuma water-wave model."""
