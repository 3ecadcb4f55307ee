"""
prevmap - voxel-wise activation prevalence maps.
"""

# This file is intentionally minimal - the main package is in src/prevmap/
