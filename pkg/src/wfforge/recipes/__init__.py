"""Structural recipes and the workflow generator built on them."""

from .detect import detect_patterns, task_classes
from .generate import GenerationRequest, distribute_footprint, generate, growth_sequence, plan_copies
from .model import Pattern, Recipe, RecipeError, TypedDag, available_recipes, load_recipe

__all__ = [
    "GenerationRequest",
    "Pattern",
    "Recipe",
    "RecipeError",
    "TypedDag",
    "available_recipes",
    "detect_patterns",
    "distribute_footprint",
    "generate",
    "growth_sequence",
    "load_recipe",
    "plan_copies",
    "task_classes",
]
