"""Maximum bipartite matching (Hopcroft-Karp)."""
from collections import deque

_INF = float("inf")


def hopcroft_karp(adjacency):
    """Maximum matching of a bipartite graph.

    ``adjacency`` maps each left vertex to an iterable of right vertices.
    Left vertices are visited in insertion order and neighbours in the
    given order, so results are reproducible. Returns ``{left: right}``.
    """
    adj = {u: list(vs) for u, vs in adjacency.items()}
    pair_left = {u: None for u in adj}
    pair_right = {}
    dist = {}

    def bfs():
        queue = deque()
        for u in adj:
            if pair_left[u] is None:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = _INF
        found = _INF
        while queue:
            u = queue.popleft()
            if dist[u] >= found:
                continue
            for v in adj[u]:
                w = pair_right.get(v)
                if w is None:
                    if found == _INF:
                        found = dist[u] + 1
                elif dist[w] == _INF:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found != _INF

    def dfs(root):
        # iterative to stay clear of the recursion limit on long paths
        stack = [(root, iter(adj[root]))]
        path = []
        while stack:
            u, it = stack[-1]
            advanced = False
            for v in it:
                w = pair_right.get(v)
                if w is None:
                    path.append((u, v))
                    for a, b in path:
                        pair_left[a] = b
                        pair_right[b] = a
                    return True
                if dist.get(w) == dist[u] + 1:
                    path.append((u, v))
                    stack.append((w, iter(adj[w])))
                    advanced = True
                    break
            if not advanced:
                dist[u] = _INF
                stack.pop()
                if path:
                    path.pop()
        return False

    while bfs():
        for u in adj:
            if pair_left[u] is None:
                dfs(u)
    return {u: v for u, v in pair_left.items() if v is not None}


def matching_size(adjacency) -> int:
    return len(hopcroft_karp(adjacency))
