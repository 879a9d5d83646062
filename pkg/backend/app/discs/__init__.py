"""Numerical core: boundary data, conjugation, Bishop discs, frame indices, twists and disc families.

Pure domain code with no CLI or configuration-schema dependencies; the
scenario runner in ``app.services`` converts configs into these types.
"""
