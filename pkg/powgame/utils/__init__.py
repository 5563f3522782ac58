"""
Utility modules for powgame
"""
