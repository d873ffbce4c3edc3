# [file name]: atomsense/__init__.py
"""
atomsense: dual cold-atom accelerometer-gyroscope simulator.
"""

__version__ = "0.1.0"
