"""
CLI commands for prevmap.
"""
