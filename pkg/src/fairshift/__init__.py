"""MMD-regularized training and shift/fairness evaluation for anti-causal prediction."""

__version__ = "0.1.0"
