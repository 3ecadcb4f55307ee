"""
Analysis services built on the prevmap core.
"""
