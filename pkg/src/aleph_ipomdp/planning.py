"""Tree-search planners over interactive states.

Both planners talk to a game through a small simulator interface.  The
simulator owns the nested opponent model, so an interactive state here is
whatever the simulator hands back from ``transition``; the planners never
look inside it.
"""

from __future__ import annotations

import math
import random
from typing import Any, Dict, Hashable, List, Optional, Protocol, Sequence, Tuple


class Simulator(Protocol):
    def actions(self, state) -> Sequence[Any]:
        """Legal own actions in ``state``."""

    def opponent_policy(self, state, action) -> Sequence[Tuple[Any, float]]:
        """(opponent action, probability) pairs answering ``action``."""

    def reward(self, state, action, opp_action) -> float:
        ...

    def transition(self, state, action, opp_action):
        ...

    def is_terminal(self, state) -> bool:
        ...


def expectimax(state, depth: int, simulator: Simulator, gamma: float,
               memo: Optional[Dict[Hashable, Dict[Any, float]]] = None) -> Dict[Any, float]:
    """Exact Q-values: Q(a) = sum_o P(o|a) [r(a, o) + gamma * max_a' Q'(a')].

    ``depth`` counts the further levels expanded below the current one, so
    depth 0 gives the immediate expected reward.  If the simulator defines
    ``key(state)`` and a ``memo`` dict is passed, sub-results are shared
    between equal states (a transposition table).
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    key_fn = getattr(simulator, "key", None) if memo is not None else None

    def qvalues(s, d):
        if key_fn is not None:
            k = (key_fn(s), d)
            hit = memo.get(k)
            if hit is not None:
                return hit
        q = {}
        for a in simulator.actions(s):
            total = 0.0
            for o, p in simulator.opponent_policy(s, a):
                if p == 0.0:
                    continue
                cont = 0.0
                if d > 0:
                    s2 = simulator.transition(s, a, o)
                    if not simulator.is_terminal(s2):
                        cont = max(qvalues(s2, d - 1).values())
                total += p * (simulator.reward(s, a, o) + gamma * cont)
            q[a] = total
        if key_fn is not None:
            memo[k] = q
        return q

    return qvalues(state, depth)


class SearchNode:
    """MCTS node.  Children are keyed by (own action index, opponent action)."""

    __slots__ = ("state", "actions", "visit_count", "action_visits", "value_sums", "children")

    def __init__(self, state, actions: Sequence[Any]):
        self.state = state
        self.actions = tuple(actions)
        self.visit_count = 0
        self.action_visits = [0] * len(self.actions)
        self.value_sums = [0.0] * len(self.actions)
        self.children: Dict[Tuple[int, Any], "SearchNode"] = {}

    def q(self, i: int) -> float:
        n = self.action_visits[i]
        return self.value_sums[i] / n if n else 0.0

    def qvalues(self) -> Dict[Any, float]:
        """Mean backed-up return per action; unvisited actions report +inf."""
        return {a: (self.value_sums[i] / n if n else math.inf)
                for i, (a, n) in enumerate(zip(self.actions, self.action_visits))}


def check_tree(node: SearchNode) -> None:
    """Bookkeeping identities of a finished search (used by the tests)."""
    if node.visit_count != sum(node.action_visits):
        raise AssertionError("node visits differ from the sum of action visits")
    per_action = [0] * len(node.actions)
    for (i, _), child in node.children.items():
        per_action[i] += child.visit_count
        check_tree(child)
    for i, n in enumerate(node.action_visits):
        # every visit either created a child (and rolled out) or descended into one
        if per_action[i] > n:
            raise AssertionError("children visited more often than their parent action")


def _sample(pairs: Sequence[Tuple[Any, float]], u: float):
    acc = 0.0
    last = None
    for o, p in pairs:
        if p <= 0.0:
            continue
        acc += p
        last = o
        if u < acc:
            return o
    return last


def ipomcp(root, iterations: int, c_uct: float, gamma: float, simulator: Simulator, rng,
           return_tree: bool = False):
    """UCT search whose opponent moves are drawn from the simulator's exact
    nested model, so each branch carries its own deterministic nested state.

    Returns root Q estimates (and the tree when ``return_tree``).  Unvisited
    actions are tried first, in index order; their reported value is +inf.
    """
    if iterations < 1:
        raise ValueError("planner budget must be >= 1 iteration")
    # the Python generator is much cheaper per scalar draw than numpy's
    py = random.Random(int(rng.generator.integers(0, 2**63)))
    rand = py.random
    node0 = SearchNode(root, simulator.actions(root))
    if simulator.is_terminal(root):
        # nothing left to earn: every action is worth zero
        q = {a: 0.0 for a in node0.actions}
        return (q, node0) if return_tree else q
    log = math.log
    sqrt = math.sqrt

    for _ in range(iterations):
        node = node0
        path: List[Tuple[SearchNode, int, float]] = []
        ret = 0.0
        while True:
            if simulator.is_terminal(node.state):
                break
            visits = node.action_visits
            try:
                i = visits.index(0)
            except ValueError:
                lnN = log(node.visit_count)
                sums = node.value_sums
                best, i = -math.inf, 0
                for j, n in enumerate(visits):
                    v = sums[j] / n + c_uct * sqrt(lnN / n)
                    if v > best:
                        best, i = v, j
            a = node.actions[i]
            o = _sample(simulator.opponent_policy(node.state, a), rand())
            r = simulator.reward(node.state, a, o)
            path.append((node, i, r))
            child = node.children.get((i, o))
            if child is None:
                s2 = simulator.transition(node.state, a, o)
                child = SearchNode(s2, simulator.actions(s2) if not simulator.is_terminal(s2) else ())
                node.children[(i, o)] = child
                ret = _rollout(s2, simulator, gamma, rand)
                break
            node = child
        for n, i, r in reversed(path):
            ret = r + gamma * ret
            n.visit_count += 1
            n.action_visits[i] += 1
            n.value_sums[i] += ret

    q = node0.qvalues()
    return (q, node0) if return_tree else q


def _rollout(state, simulator: Simulator, gamma: float, rand) -> float:
    custom = getattr(simulator, "rollout", None)
    if custom is not None:
        return custom(state, gamma, rand)
    total, w = 0.0, 1.0
    while not simulator.is_terminal(state):
        acts = simulator.actions(state)
        a = acts[int(rand() * len(acts))]
        o = _sample(simulator.opponent_policy(state, a), rand())
        total += w * simulator.reward(state, a, o)
        w *= gamma
        state = simulator.transition(state, a, o)
    return total
