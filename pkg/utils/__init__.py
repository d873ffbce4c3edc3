# [file name]: utils/__init__.py
"""Infrastructure shared by the command line: config, logging, I/O, plots, workers."""
