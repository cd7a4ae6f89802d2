"""The classic Tiger benchmark, used to validate planners against exact oracles.

States: 0 = tiger-left, 1 = tiger-right.  Actions: 0 = listen, 1 = open-left,
2 = open-right.  Observations: 0 = hear-left, 1 = hear-right.  Opening a door
resets the problem.
"""
import numpy as np

from .core import ExplicitModel, ExplicitSimulator

LISTEN, OPEN_LEFT, OPEN_RIGHT = 0, 1, 2
HEAR_LEFT, HEAR_RIGHT = 0, 1


def tiger_model(listen_accuracy=0.85, listen_cost=-1.0, treasure=10.0, tiger=-100.0,
                discount=0.95) -> ExplicitModel:
    q = listen_accuracy
    T = np.array([
        [[1.0, 0.0], [0.0, 1.0]],
        [[0.5, 0.5], [0.5, 0.5]],
        [[0.5, 0.5], [0.5, 0.5]],
    ])
    O = np.array([
        [[q, 1 - q], [1 - q, q]],
        [[0.5, 0.5], [0.5, 0.5]],
        [[0.5, 0.5], [0.5, 0.5]],
    ])
    R = np.array([
        [listen_cost, tiger, treasure],
        [listen_cost, treasure, tiger],
    ])
    return ExplicitModel(
        states=[0, 1], actions=[LISTEN, OPEN_LEFT, OPEN_RIGHT], observations=[HEAR_LEFT, HEAR_RIGHT],
        T=T, O=O, R=R, b0=np.array([0.5, 0.5]), discount=discount,
    )


def tiger_simulator(**kwargs) -> ExplicitSimulator:
    return ExplicitSimulator(tiger_model(**kwargs))
