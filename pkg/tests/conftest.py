import os

import pytest

from treegromov._backend import HAS_NUMBA


@pytest.fixture(scope="session", autouse=True)
def warm_jit():
    """Compile the numba kernels once up front so no individual test pays
    the jit cost (several of them assert wall-clock budgets)."""
    if not HAS_NUMBA:
        return
    import treegromov as tg

    saved = os.environ.get("TREEGROMOV_BACKEND")
    os.environ["TREEGROMOV_BACKEND"] = "numba"
    try:
        t1 = tg.random_binary_tree(5, seed=0)
        t2 = tg.random_binary_tree(5, seed=1)
        r1, r2 = tg.tree_to_semimetric(t1), tg.tree_to_semimetric(t2)
        for norm in (1, 2):
            tg.gromov_distance(r1, r2, tg.GromovSpec(norm=norm))
        tg.four_point_check(r1)
        g = tg.parse_edge_list("a b 1\nb c 1\na c 1\n")
        tg.graph_metric(g)
    finally:
        if saved is None:
            del os.environ["TREEGROMOV_BACKEND"]
        else:
            os.environ["TREEGROMOV_BACKEND"] = saved
