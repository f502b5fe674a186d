"""Weighted-least-squares ENO reconstruction for finite-volume schemes."""
