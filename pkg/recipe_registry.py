#!/usr/bin/env python3
"""
Recipe Registry - loads solver defaults and reproduction recipes from config files
"""

import json
import logging
import os
from dataclasses import asdict, dataclass, fields
from typing import Dict, List, Optional

import yaml


THREADS_ENV = 'BELLBOUND_THREADS'

logger = logging.getLogger('bellbound.recipe_registry')


def _config_path(name: str) -> str:
    return os.path.join(os.path.dirname(__file__), 'config', name)


@dataclass
class SolverSettings:
    tolerance: float = 1e-7
    max_iter: int = 200000
    vertex_cap: int = 2 ** 20
    lp_tolerance: float = 1e-9
    lp_refactor_every: int = 50
    threads: int = 1

    def to_dict(self) -> Dict:
        return asdict(self)


def load_solver_settings(path: str = None) -> SolverSettings:
    """Read config/solver_defaults.json; BELLBOUND_THREADS overrides the thread cap."""
    if path is None:
        path = _config_path('solver_defaults.json')
    settings = SolverSettings()
    try:
        with open(path, 'r') as f:
            data = json.load(f)
        known = {f.name for f in fields(SolverSettings)}
        for key, value in data.items():
            if key not in known:
                logger.warning(f"Ignoring unknown solver setting {key!r} in {path}")
                continue
            setattr(settings, key, type(getattr(settings, key))(value))
    except FileNotFoundError:
        logger.warning(f"Solver defaults file not found: {path}; using built-in defaults")
    except (json.JSONDecodeError, TypeError, ValueError, AttributeError) as e:
        logger.error(f"Error loading solver defaults from {path}: {e}; using built-in defaults")
        settings = SolverSettings()

    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            threads = int(env)
            if threads < 1:
                raise ValueError("must be positive")
            settings.threads = threads
        except ValueError as e:
            logger.warning(f"Ignoring {THREADS_ENV}={env!r}: {e}")
    if settings.tolerance <= 0:
        logger.error(f"Solver tolerance {settings.tolerance} is not positive; using {SolverSettings.tolerance}")
        settings.tolerance = SolverSettings.tolerance
    return settings


class RecipeRegistry:
    def __init__(self, recipes_file: str = None):
        if recipes_file is None:
            recipes_file = _config_path('recipes.yaml')
        self.recipes_file = recipes_file
        self.recipes: List[Dict] = []
        self.load_recipes()

    def load_recipes(self):
        """Load recipes from YAML file"""
        try:
            with open(self.recipes_file, 'r') as f:
                data = yaml.safe_load(f) or {}
            self.recipes = data.get('recipes', [])
        except FileNotFoundError:
            logger.error(f"Recipes file not found: {self.recipes_file}")
            self.recipes = []
        except (yaml.YAMLError, AttributeError) as e:
            logger.error(f"Error loading recipes: {e}")
            self.recipes = []
        logger.debug(f"Loaded {len(self.recipes)} recipes from {self.recipes_file}")

    def match_recipe(self, name: str) -> Optional[Dict]:
        """Find a recipe by exact name, else by unique prefix"""
        name = name.lower()
        for recipe in self.recipes:
            if recipe.get('name', '').lower() == name:
                return recipe
        prefixed = [r for r in self.recipes if r.get('name', '').lower().startswith(name)]
        if len(prefixed) == 1:
            return prefixed[0]
        if len(prefixed) > 1:
            logger.warning(f"Recipe prefix {name!r} is ambiguous: {[r['name'] for r in prefixed]}")
        return None

    def get_recipes_in_group(self, group: str) -> List[Dict]:
        return [r for r in self.recipes if r.get('group') == group]

    def get_all_recipes(self) -> List[Dict]:
        """Get all registered recipes"""
        return self.recipes

    def known_discrepancies(self) -> List[Dict]:
        """Every check flagged as not reproducible as printed"""
        flagged = []
        for recipe in self.recipes:
            for check in recipe.get('checks', []):
                if check.get('known_discrepancy'):
                    flagged.append({'recipe': recipe.get('name'), **check})
        return flagged

    def reload(self):
        """Reload recipes from file"""
        self.load_recipes()
