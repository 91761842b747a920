"""Source-tampering simulation for gain-switched QKD lasers.

Laser seeding through external injection, interferometric phase statistics,
countermeasure models, attack planning and decoy-state key rates.
"""

__version__ = "0.1.0"
