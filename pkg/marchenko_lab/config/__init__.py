"""
Config subsystem exports.
"""
from .settings import Settings
from .loader import load_settings, save_config

__all__ = ['Settings', 'load_settings', 'save_config']
