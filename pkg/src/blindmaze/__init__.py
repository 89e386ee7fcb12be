"""Maze DQN agent that stays on task through blind stretches via latent rollouts."""

__version__ = "0.1.0"
