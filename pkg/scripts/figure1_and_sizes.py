"""Print the matching-pennies estimator comparison and the size of every built-in game."""

import json

from vrpo.cli import enumerate_report, figure1_demo
from vrpo.games import game_names


def main() -> None:
    print(figure1_demo())
    print()
    for name in [*game_names()[:-1], "liars_dice:1x3"]:
        print(json.dumps(enumerate_report(name)))


if __name__ == "__main__":
    main()
