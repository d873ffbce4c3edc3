# [file name]: config/__init__.py
