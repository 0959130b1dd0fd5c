"""
Test package for coupled-mkv.
"""
