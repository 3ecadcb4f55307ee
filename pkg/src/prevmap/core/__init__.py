"""
Core numerical components for prevmap.
"""
