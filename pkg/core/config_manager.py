"""
Configuration Manager for the residue debugger
Handles loading, saving, and validation of debugger configuration
"""

import copy
import json
import logging
import os
from datetime import datetime
from typing import Any, Dict, Optional

CONFIG_VERSION = "1.0.0"
ZERO_ULP_POLICIES = ("infinite", "denormal")


class ConfigManager:
    """Manages debugger configuration"""

    def __init__(self):
        self.logger = logging.getLogger('ResidueDebugger.ConfigManager')

        # Default configuration schema
        self.default_config = {
            "version": CONFIG_VERSION,
            "engine": {
                "cond_threshold": 2.0 ** 40,
                "absorb_ulps": 4.0,
                "warn_ulps": 45,
                "max_dyn_ops": 10_000_000,
                "inherit_absorbed": True,
                "round_trick_detection": True,
            },
            "orchestrator": {
                "max_reexec": 20,
                "state_dir": ".residue_state",
                "persist_state": True,
            },
            "oracle": {
                "precision": 512,
                "round_trick": True,
            },
            "reporting": {
                "score_margin": None,
                "zero_ulp_policy": "infinite",
                "emit_timing": False,
            },
            "corpus": {
                "inputs_per_entry": 100,
                "workers": 4,
            },
            "advanced_settings": {
                "enable_debug_logging": False,
            },
        }

        # (section, key) -> (min, max)
        self.numeric_ranges = {
            ("engine", "cond_threshold"): (1.0 + 2.0 ** -52, 2.0 ** 1000),
            ("engine", "absorb_ulps"): (1.0, 2.0 ** 20),
            ("engine", "warn_ulps"): (1, 1074),
            ("engine", "max_dyn_ops"): (1, 10 ** 12),
            ("orchestrator", "max_reexec"): (1, 10_000),
            ("oracle", "precision"): (128, 4096),
            ("corpus", "inputs_per_entry"): (1, 1_000_000),
            ("corpus", "workers"): (1, 256),
        }
        self.integer_fields = {("engine", "warn_ulps"), ("engine", "max_dyn_ops"),
                               ("orchestrator", "max_reexec"), ("oracle", "precision"),
                               ("corpus", "inputs_per_entry"), ("corpus", "workers")}

    def defaults(self) -> Dict[str, Any]:
        return copy.deepcopy(self.default_config)

    def load_config(self, config_path: Optional[str]) -> Dict[str, Any]:
        """Load configuration from JSON file"""
        if not config_path:
            return self.defaults()
        try:
            if os.path.exists(config_path):
                with open(config_path, 'r', encoding='utf-8') as f:
                    loaded_config = json.load(f)

                config = self._validate_and_merge_config(loaded_config)

                self.logger.info(f"Configuration loaded from {config_path}")
                return config
            else:
                self.logger.info(f"Config file not found at {config_path}, using defaults")
                self.save_config(config_path, self.default_config)
                return self.defaults()

        except json.JSONDecodeError as e:
            self.logger.error(f"Invalid JSON in config file: {e}")
            return self.defaults()
        except Exception as e:
            self.logger.error(f"Error loading config: {e}")
            return self.defaults()

    def save_config(self, config_path: str, config: Dict[str, Any]) -> bool:
        """Save configuration to JSON file"""
        try:
            config_with_metadata = copy.deepcopy(config)
            config_with_metadata['_metadata'] = {
                'last_saved': datetime.now().isoformat(),
                'version': self.default_config['version']
            }

            directory = os.path.dirname(config_path)
            if directory:
                os.makedirs(directory, exist_ok=True)

            with open(config_path, 'w', encoding='utf-8') as f:
                json.dump(config_with_metadata, f, indent=2, ensure_ascii=False)

            self.logger.info(f"Configuration saved to {config_path}")
            return True

        except Exception as e:
            self.logger.error(f"Error saving config: {e}")
            return False

    def _validate_and_merge_config(self, loaded_config: Dict[str, Any]) -> Dict[str, Any]:
        """Validate loaded config and merge with defaults"""
        try:
            merged_config = self.defaults()
            loaded_config = {k: v for k, v in loaded_config.items() if k != '_metadata'}
            self._deep_merge(merged_config, loaded_config)
            return self._validate_config_fields(merged_config)

        except Exception as e:
            self.logger.error(f"Error validating config: {e}")
            return self.defaults()

    def _deep_merge(self, base_dict: Dict, update_dict: Dict):
        """Recursively merge dictionaries"""
        for key, value in update_dict.items():
            if key in base_dict and isinstance(base_dict[key], dict) and isinstance(value, dict):
                self._deep_merge(base_dict[key], value)
            else:
                base_dict[key] = value

    def _validate_config_fields(self, config: Dict[str, Any]) -> Dict[str, Any]:
        """Validate and fix specific configuration fields"""
        for section, defaults in self.default_config.items():
            if isinstance(defaults, dict) and not isinstance(config.get(section), dict):
                self.logger.warning(f"Section '{section}' is not an object, using defaults")
                config[section] = copy.deepcopy(defaults)

        # Numeric settings are clamped into range
        for (section, key), (min_val, max_val) in self.numeric_ranges.items():
            value = config[section].get(key)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                config[section][key] = self.default_config[section][key]
                continue
            value = max(min_val, min(max_val, value))
            if (section, key) in self.integer_fields:
                value = int(value)
            config[section][key] = value

        # Boolean settings
        boolean_fields = [("engine", "inherit_absorbed"), ("engine", "round_trick_detection"),
                          ("orchestrator", "persist_state"), ("oracle", "round_trick"),
                          ("reporting", "emit_timing"), ("advanced_settings", "enable_debug_logging")]
        for section, key in boolean_fields:
            if not isinstance(config[section].get(key), bool):
                config[section][key] = self.default_config[section][key]

        if not isinstance(config["orchestrator"].get("state_dir"), str) or \
                not config["orchestrator"]["state_dir"].strip():
            config["orchestrator"]["state_dir"] = self.default_config["orchestrator"]["state_dir"]

        margin = config["reporting"].get("score_margin")
        if margin is not None and (isinstance(margin, bool) or not isinstance(margin, (int, float))):
            config["reporting"]["score_margin"] = None
        elif margin is not None:
            config["reporting"]["score_margin"] = max(0.0, min(45.0, float(margin)))

        if config["reporting"].get("zero_ulp_policy") not in ZERO_ULP_POLICIES:
            config["reporting"]["zero_ulp_policy"] = "infinite"

        return config

    def apply_overrides(self, config: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
        """Apply 'section.key' command line overrides for one invocation; None values are skipped"""
        updated = copy.deepcopy(config)
        nested: Dict[str, Any] = {}
        for dotted, value in overrides.items():
            if value is None:
                continue
            section, _, key = dotted.partition('.')
            nested.setdefault(section, {})[key] = value
        self._deep_merge(updated, nested)
        return self._validate_config_fields(updated)

    def get_config_summary(self, config: Dict[str, Any]) -> Dict[str, Any]:
        """Get a summary of the current configuration"""
        try:
            return {
                'version': config.get('version', 'unknown'),
                'warn_ulps': config['engine']['warn_ulps'],
                'cond_threshold': config['engine']['cond_threshold'],
                'absorb_ulps': config['engine']['absorb_ulps'],
                'max_reexec': config['orchestrator']['max_reexec'],
                'oracle_precision': config['oracle']['precision'],
                'zero_ulp_policy': config['reporting']['zero_ulp_policy'],
            }

        except Exception as e:
            self.logger.error(f"Error getting config summary: {e}")
            return {}
