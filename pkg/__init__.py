"""
Residue Debugger
Residue-based floating-point debugger for a small numerical kernel language
"""

__version__ = "1.0.0"
__description__ = "Residue-based floating-point debugger with multi-run residue override"
