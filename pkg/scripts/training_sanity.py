"""Train VRPO with default settings on matching pennies and Kuhn, print final exploitability per seed."""

import argparse

import numpy as np

from vrpo.games import load_game
from vrpo.learner import TrainerConfig, evaluate, init_state, train_iteration


def final_exploitability(game_name: str, iterations: int, seed: int, algo: str = "vrpo") -> float:
    state = init_state(load_game(game_name), TrainerConfig(total_iterations=iterations, seed=seed), algo)
    for _ in range(iterations):
        train_iteration(state)
    return evaluate(state).exploitability


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()
    for game, iters in (("matching_pennies_imperfect", 200), ("kuhn", 500)):
        vals = [final_exploitability(game, iters, s) for s in range(args.seeds)]
        print(f"{game:28s} T={iters:4d}  final exploitability {np.round(vals, 4).tolist()}")


if __name__ == "__main__":
    main()
