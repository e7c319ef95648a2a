# Evaluation modules
from .evaluation import TrendEvaluator

__all__ = ['TrendEvaluator']
