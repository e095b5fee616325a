# -*- coding: utf-8 -*-
"""
Utils package - experiment config loading, CLI texts
"""

from utils.config_loader import ExperimentConfig, config_from_dict, load_experiment_config
from utils.messages import COMMANDS, ARGS, MSG

__all__ = ["ExperimentConfig", "config_from_dict", "load_experiment_config", "COMMANDS", "ARGS", "MSG"]
