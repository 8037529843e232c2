#!/usr/bin/env python3
"""
Configuration Loader Module for UnaryFlow
Handles reading and writing benchmark, stream-source and cost settings
"""

import os
import logging
import configparser
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_NAME = "unaryflow.conf"


class ConfigLoader:
    """Class to handle configuration loading and saving"""

    def __init__(self, config_file: Optional[str] = None):
        """
        Initialize the configuration loader

        Args:
            config_file: Path to configuration file (optional)
        """
        # Default config file is in the project root directory
        if not config_file:
            self.config_file = os.path.join(
                os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                DEFAULT_CONFIG_NAME
            )
        else:
            self.config_file = config_file

        self.config = configparser.ConfigParser()
        self._set_defaults()

        # Load configuration
        self.load()

    def load(self) -> bool:
        """
        Load configuration from file on top of the defaults

        Returns:
            True if successful, False otherwise
        """
        try:
            if os.path.exists(self.config_file):
                logger.debug(f"Loading configuration from {self.config_file}")
                self.config.read(self.config_file)
                return True
            else:
                logger.warning(f"Configuration file {self.config_file} not found, using defaults")
                return False
        except (configparser.Error, OSError, UnicodeDecodeError) as e:
            logger.error(f"Failed to load configuration: {e}")
            self.config = configparser.ConfigParser()
            self._set_defaults()
            return False

    def save(self, path: Optional[str] = None) -> bool:
        """
        Save configuration to file

        Args:
            path: Destination (defaults to the loaded configuration file)

        Returns:
            True if successful, False otherwise
        """
        path = path or self.config_file
        try:
            logger.info(f"Saving configuration to {path}")

            with open(path, 'w') as f:
                self.config.write(f)

            return True
        except OSError as e:
            logger.error(f"Failed to save configuration: {e}")
            return False

    def _set_defaults(self):
        """Set default configuration values"""
        # General section
        if not self.config.has_section('General'):
            self.config.add_section('General')

        self.config.set('General', 'workers', '0')
        self.config.set('General', 'log_level', 'INFO')
        self.config.set('General', 'format', 'csv')

        # Streams section
        if not self.config.has_section('Streams'):
            self.config.add_section('Streams')

        self.config.set('Streams', 'lfsr_seed_a', '1')
        self.config.set('Streams', 'lfsr_seed_b', '0')
        self.config.set('Streams', 'lfsr_polynomial', '0')
        self.config.set('Streams', 'sobol_dimensions', '0 1')
        self.config.set('Streams', 'halton_bases', '2 3')
        self.config.set('Streams', 'direction_file', '')

        # Bench section
        if not self.config.has_section('Bench'):
            self.config.add_section('Bench')

        self.config.set('Bench', 'n_values', '4 6 8')
        self.config.set('Bench', 'observe_lengths', '10 11 12 13 14 15 16')
        self.config.set('Bench', 'matrix_dims', '256 256 32')
        self.config.set('Bench', 'matrix_trials', '20')
        self.config.set('Bench', 'functions', 'expneg sin log1p sigmoid')
        self.config.set('Bench', 'series_file', '')
        self.config.set('Bench', 'domains', 'inclusive exclusive')

        # Costs section
        if not self.config.has_section('Costs'):
            self.config.add_section('Costs')

        self.config.set('Costs', 'register_bit', '4')
        self.config.set('Costs', 'counter_bit', '6')
        self.config.set('Costs', 'comparator_bit', '5')
        self.config.set('Costs', 'mux2', '3')
        self.config.set('Costs', 'xor', '3')
        self.config.set('Costs', 'and', '1.5')
        self.config.set('Costs', 'not', '0.5')
        self.config.set('Costs', 'direction_vector_cell', '4')

    def get(self, section: str, option: str, fallback: Any = None) -> Any:
        """
        Get configuration value

        Args:
            section: Configuration section
            option: Configuration option
            fallback: Fallback value if option not found

        Returns:
            Configuration value
        """
        try:
            return self.config.get(section, option, fallback=fallback)
        except (configparser.NoSectionError, configparser.NoOptionError):
            return fallback

    def get_int(self, section: str, option: str, fallback: int = 0) -> int:
        """
        Get integer configuration value

        Accepts hexadecimal literals such as 0xB8 for tap masks.

        Args:
            section: Configuration section
            option: Configuration option
            fallback: Fallback value if option not found

        Returns:
            Integer configuration value
        """
        raw = self.get(section, option)
        if raw is None or raw.strip() == '':
            return fallback
        try:
            return int(raw.strip(), 0)
        except ValueError:
            logger.error(f"Invalid integer for [{section}] {option}: {raw!r}, using {fallback}")
            return fallback

    def get_float(self, section: str, option: str, fallback: float = 0.0) -> float:
        try:
            return self.config.getfloat(section, option, fallback=fallback)
        except (configparser.NoSectionError, configparser.NoOptionError):
            return fallback
        except ValueError:
            logger.error(f"Invalid number for [{section}] {option}, using {fallback}")
            return fallback

    def get_list(self, section: str, option: str, fallback: Optional[List[str]] = None) -> List[str]:
        """
        Get a whitespace- or comma-separated list

        Returns:
            List of tokens (fallback if the option is missing or empty)
        """
        raw = self.get(section, option)
        if not raw or not raw.strip():
            return list(fallback or [])
        return raw.replace(',', ' ').split()

    def get_int_list(self, section: str, option: str, fallback: Optional[List[int]] = None) -> List[int]:
        tokens = self.get_list(section, option)
        if not tokens:
            return list(fallback or [])
        try:
            return [int(tok, 0) for tok in tokens]
        except ValueError:
            logger.error(f"Invalid integer list for [{section}] {option}: {tokens}, using {fallback}")
            return list(fallback or [])

    def set(self, section: str, option: str, value: Any) -> None:
        """
        Set configuration value

        Args:
            section: Configuration section
            option: Configuration option
            value: Configuration value
        """
        if not self.config.has_section(section):
            self.config.add_section(section)

        self.config.set(section, option, str(value))

    def get_all(self) -> Dict[str, Dict[str, str]]:
        """
        Get all configuration values

        Returns:
            Dictionary of all configuration values
        """
        result = {}

        for section in self.config.sections():
            result[section] = {}

            for option in self.config.options(section):
                result[section][option] = self.config.get(section, option)

        return result


if __name__ == "__main__":
    # Example usage
    config = ConfigLoader()

    print(f"Workers: {config.get_int('General', 'workers')}")
    print(f"Resolutions: {config.get_int_list('Bench', 'n_values')}")
    print(f"Sobol dimensions: {config.get_int_list('Streams', 'sobol_dimensions')}")
