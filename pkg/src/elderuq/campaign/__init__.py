from .config import CampaignConfig, ConfigError, load_config
from .runner import plan_campaign, postprocess, run_campaign, solve_realization
from .store import RealizationStore

__all__ = ["CampaignConfig", "ConfigError", "load_config", "plan_campaign", "postprocess",
           "run_campaign", "solve_realization", "RealizationStore"]
