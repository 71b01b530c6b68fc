import pandas as pd

import manifolds


def list_builtin_manifolds():
    """
    Retrieves and displays all builtin manifolds.

    Each row names the manifold, its chart dimension m, leaf dimension n,
    fiber dimension p, whether the distribution is the whole tangent bundle
    and a one-line description of the metric and spans.

    Returns:
        pandas.DataFrame: one row per builtin, for further programmatic use.
    """
    rows = [
        {
            "name": spec.name,
            "m": spec.m,
            "n": spec.n,
            "p": spec.p,
            "D = TM": spec.n + spec.p == spec.m,
            "description": spec.description,
        }
        for spec in manifolds.BUILTINS.values()
    ]
    table = pd.DataFrame(rows, columns=["name", "m", "n", "p", "D = TM", "description"])

    if table.empty:
        print("--- No builtin manifolds registered ---")
        return table

    print(table.to_string(index=False))
    return table


if __name__ == "__main__":
    print("Scanning builtin manifolds...\n")
    list_builtin_manifolds()
