"""Exact weighted matching on general graphs (Edmonds' blossom algorithm).

Primal-dual O(n^3) implementation.  Edge weights are integers so every dual
update is exact; :func:`min_weight_perfect_matching` scales float weights to
integers before solving.
"""
from __future__ import annotations

import math

_SCALE = 10 ** 9


def max_weight_matching(edges, maxcardinality=False):
    """Maximum-weight matching.

    ``edges`` is an iterable of ``(i, j, w)`` with integer vertex labels
    ``0..n-1`` and integer weights.  Returns ``mate`` where ``mate[v]`` is the
    partner of ``v`` or ``-1``.  With ``maxcardinality`` the result is the
    heaviest among the maximum-cardinality matchings.
    """
    edges = [(int(i), int(j), int(w)) for i, j, w in edges]
    if not edges:
        return []
    # doubled weights keep all dual variables integral
    edges = [(i, j, 2 * w) for i, j, w in edges]
    nv = 1 + max(max(i, j) for i, j, _ in edges)
    ne = len(edges)
    maxw = max(0, max(w for _, _, w in edges))

    endpoint = [edges[p // 2][p % 2] for p in range(2 * ne)]
    neighbend = [[] for _ in range(nv)]
    for k, (i, j, _) in enumerate(edges):
        neighbend[i].append(2 * k + 1)
        neighbend[j].append(2 * k)

    mate = [-1] * nv
    label = [0] * (2 * nv)
    labelend = [-1] * (2 * nv)
    inblossom = list(range(nv))
    parent = [-1] * (2 * nv)
    childs = [None] * (2 * nv)
    base = list(range(nv)) + [-1] * nv
    endps = [None] * (2 * nv)
    bestedge = [-1] * (2 * nv)
    bestedges = [None] * (2 * nv)
    unused = list(range(nv, 2 * nv))
    dual = [maxw] * nv + [0] * nv
    allowed = [False] * ne
    queue = []

    def slack(k):
        i, j, w = edges[k]
        return dual[i] + dual[j] - 2 * w

    def leaves(b):
        if b < nv:
            yield b
        else:
            for t in childs[b]:
                if t < nv:
                    yield t
                else:
                    yield from leaves(t)

    def assign_label(w, t, p):
        b = inblossom[w]
        label[w] = label[b] = t
        labelend[w] = labelend[b] = p
        bestedge[w] = bestedge[b] = -1
        if t == 1:
            queue.extend(leaves(b))
        else:
            bb = base[b]
            assign_label(endpoint[mate[bb]], 1, mate[bb] ^ 1)

    def scan_blossom(v, w):
        path = []
        found = -1
        while v != -1 or w != -1:
            b = inblossom[v]
            if label[b] & 4:
                found = base[b]
                break
            path.append(b)
            label[b] = 5
            if labelend[b] == -1:
                v = -1
            else:
                v = endpoint[labelend[b]]
                b = inblossom[v]
                v = endpoint[labelend[b]]
            if w != -1:
                v, w = w, v
        for b in path:
            label[b] = 1
        return found

    def add_blossom(bse, k):
        v, w, _ = edges[k]
        bb = inblossom[bse]
        bv = inblossom[v]
        bw = inblossom[w]
        b = unused.pop()
        base[b] = bse
        parent[b] = -1
        parent[bb] = b
        path = childs[b] = []
        eps = endps[b] = []
        while bv != bb:
            parent[bv] = b
            path.append(bv)
            eps.append(labelend[bv])
            v = endpoint[labelend[bv]]
            bv = inblossom[v]
        path.append(bb)
        path.reverse()
        eps.reverse()
        eps.append(2 * k)
        while bw != bb:
            parent[bw] = b
            path.append(bw)
            eps.append(labelend[bw] ^ 1)
            w = endpoint[labelend[bw]]
            bw = inblossom[w]
        label[b] = 1
        labelend[b] = labelend[bb]
        dual[b] = 0
        for v in leaves(b):
            if label[inblossom[v]] == 2:
                queue.append(v)
            inblossom[v] = b
        best_to = [-1] * (2 * nv)
        for bv in path:
            if bestedges[bv] is None:
                lists = [[p // 2 for p in neighbend[v]] for v in leaves(bv)]
            else:
                lists = [bestedges[bv]]
            for lst in lists:
                for k2 in lst:
                    i, j, _ = edges[k2]
                    if inblossom[j] == b:
                        i, j = j, i
                    bj = inblossom[j]
                    if bj != b and label[bj] == 1 and (best_to[bj] == -1 or slack(k2) < slack(best_to[bj])):
                        best_to[bj] = k2
            bestedges[bv] = None
            bestedge[bv] = -1
        bestedges[b] = [k2 for k2 in best_to if k2 != -1]
        bestedge[b] = -1
        for k2 in bestedges[b]:
            if bestedge[b] == -1 or slack(k2) < slack(bestedge[b]):
                bestedge[b] = k2

    def expand_blossom(b, endstage):
        for s in childs[b]:
            parent[s] = -1
            if s < nv:
                inblossom[s] = s
            elif endstage and dual[s] == 0:
                expand_blossom(s, endstage)
            else:
                for v in leaves(s):
                    inblossom[v] = s
        if not endstage and label[b] == 2:
            entry = inblossom[endpoint[labelend[b] ^ 1]]
            j = childs[b].index(entry)
            if j & 1:
                j -= len(childs[b])
                jstep, trick = 1, 0
            else:
                jstep, trick = -1, 1
            p = labelend[b]
            while j != 0:
                label[endpoint[p ^ 1]] = 0
                label[endpoint[endps[b][j - trick] ^ trick ^ 1]] = 0
                assign_label(endpoint[p ^ 1], 2, p)
                allowed[endps[b][j - trick] // 2] = True
                j += jstep
                p = endps[b][j - trick] ^ trick
                allowed[p // 2] = True
                j += jstep
            bv = childs[b][j]
            label[endpoint[p ^ 1]] = label[bv] = 2
            labelend[endpoint[p ^ 1]] = labelend[bv] = p
            bestedge[bv] = -1
            j += jstep
            while childs[b][j] != entry:
                bv = childs[b][j]
                if label[bv] == 1:
                    j += jstep
                    continue
                for v in leaves(bv):
                    if label[v] != 0:
                        break
                if label[v] != 0:
                    label[v] = 0
                    label[endpoint[mate[base[bv]]]] = 0
                    assign_label(v, 2, labelend[v])
                j += jstep
        label[b] = labelend[b] = -1
        childs[b] = endps[b] = None
        base[b] = -1
        bestedges[b] = None
        bestedge[b] = -1
        unused.append(b)

    def augment_blossom(b, v):
        t = v
        while parent[t] != b:
            t = parent[t]
        if t >= nv:
            augment_blossom(t, v)
        i = j = childs[b].index(t)
        if i & 1:
            j -= len(childs[b])
            jstep, trick = 1, 0
        else:
            jstep, trick = -1, 1
        while j != 0:
            j += jstep
            t = childs[b][j]
            p = endps[b][j - trick] ^ trick
            if t >= nv:
                augment_blossom(t, endpoint[p])
            j += jstep
            t = childs[b][j]
            if t >= nv:
                augment_blossom(t, endpoint[p ^ 1])
            mate[endpoint[p]] = p ^ 1
            mate[endpoint[p ^ 1]] = p
        childs[b] = childs[b][i:] + childs[b][:i]
        endps[b] = endps[b][i:] + endps[b][:i]
        base[b] = base[childs[b][0]]

    def augment_matching(k):
        v, w, _ = edges[k]
        for s, p in ((v, 2 * k + 1), (w, 2 * k)):
            while True:
                bs = inblossom[s]
                if bs >= nv:
                    augment_blossom(bs, s)
                mate[s] = p
                if labelend[bs] == -1:
                    break
                t = endpoint[labelend[bs]]
                bt = inblossom[t]
                s = endpoint[labelend[bt]]
                j = endpoint[labelend[bt] ^ 1]
                if bt >= nv:
                    augment_blossom(bt, j)
                mate[j] = labelend[bt]
                p = labelend[bt] ^ 1

    for _stage in range(nv):
        label[:] = [0] * (2 * nv)
        bestedge[:] = [-1] * (2 * nv)
        bestedges[nv:] = [None] * nv
        allowed[:] = [False] * ne
        queue[:] = []
        for v in range(nv):
            if mate[v] == -1 and label[inblossom[v]] == 0:
                assign_label(v, 1, -1)
        augmented = False
        while True:
            while queue and not augmented:
                v = queue.pop()
                for p in neighbend[v]:
                    k = p // 2
                    w = endpoint[p]
                    if inblossom[v] == inblossom[w]:
                        continue
                    if not allowed[k]:
                        kslack = slack(k)
                        if kslack <= 0:
                            allowed[k] = True
                    if allowed[k]:
                        if label[inblossom[w]] == 0:
                            assign_label(w, 2, p ^ 1)
                        elif label[inblossom[w]] == 1:
                            bse = scan_blossom(v, w)
                            if bse >= 0:
                                add_blossom(bse, k)
                            else:
                                augment_matching(k)
                                augmented = True
                                break
                        elif label[w] == 0:
                            label[w] = 2
                            labelend[w] = p ^ 1
                    elif label[inblossom[w]] == 1:
                        b = inblossom[v]
                        if bestedge[b] == -1 or kslack < slack(bestedge[b]):
                            bestedge[b] = k
                    elif label[w] == 0:
                        if bestedge[w] == -1 or kslack < slack(bestedge[w]):
                            bestedge[w] = k
            if augmented:
                break

            dtype, delta, dedge, dblossom = -1, None, -1, -1
            if not maxcardinality:
                dtype, delta = 1, min(dual[:nv])
            for v in range(nv):
                if label[inblossom[v]] == 0 and bestedge[v] != -1:
                    d = slack(bestedge[v])
                    if dtype == -1 or d < delta:
                        dtype, delta, dedge = 2, d, bestedge[v]
            for b in range(2 * nv):
                if parent[b] == -1 and label[b] == 1 and bestedge[b] != -1:
                    d = slack(bestedge[b]) // 2
                    if dtype == -1 or d < delta:
                        dtype, delta, dedge = 3, d, bestedge[b]
            for b in range(nv, 2 * nv):
                if base[b] >= 0 and parent[b] == -1 and label[b] == 2 and (dtype == -1 or dual[b] < delta):
                    dtype, delta, dblossom = 4, dual[b], b
            if dtype == -1:
                dtype, delta = 1, max(0, min(dual[:nv]))

            for v in range(nv):
                lb = label[inblossom[v]]
                if lb == 1:
                    dual[v] -= delta
                elif lb == 2:
                    dual[v] += delta
            for b in range(nv, 2 * nv):
                if base[b] >= 0 and parent[b] == -1:
                    if label[b] == 1:
                        dual[b] += delta
                    elif label[b] == 2:
                        dual[b] -= delta

            if dtype == 1:
                break
            elif dtype == 2:
                allowed[dedge] = True
                i, j, _ = edges[dedge]
                if label[inblossom[i]] == 0:
                    i, j = j, i
                queue.append(i)
            elif dtype == 3:
                allowed[dedge] = True
                i, j, _ = edges[dedge]
                queue.append(i)
            else:
                expand_blossom(dblossom, False)

        if not augmented:
            break
        for b in range(nv, 2 * nv):
            if parent[b] == -1 and base[b] >= 0 and label[b] == 1 and dual[b] == 0:
                expand_blossom(b, True)

    return [endpoint[m] if m >= 0 else -1 for m in mate]


def min_weight_perfect_matching(nodes, weights):
    """Minimum-weight perfect matching on the complete graph over ``nodes``.

    ``weights`` is either a callable ``w(a, b)`` or a square matrix indexed by
    position in ``nodes``.  Returns a set of ``(a, b)`` pairs with ``a`` listed
    before ``b`` in ``nodes``.
    """
    nodes = list(nodes)
    n = len(nodes)
    if n % 2:
        raise ValueError(f"perfect matching needs an even number of nodes, got {n}")
    if n == 0:
        return set()
    if callable(weights):
        W = [[weights(nodes[i], nodes[j]) if i != j else 0.0 for j in range(n)] for i in range(n)]
    else:
        W = weights
    vals = [float(W[i][j]) for i in range(n) for j in range(i + 1, n)]
    if not all(math.isfinite(v) for v in vals):
        raise ValueError("matching weights must be finite")
    top = max(vals)
    lo = min(vals)
    scale = _SCALE / max(1.0, top - lo)
    edges = [(i, j, round((top - float(W[i][j])) * scale) + 1)
             for i in range(n) for j in range(i + 1, n)]
    mate = max_weight_matching(edges, maxcardinality=True)
    pairs = set()
    for i, m in enumerate(mate):
        if m < 0:
            raise RuntimeError("matching is not perfect")
        if i < m:
            pairs.add((nodes[i], nodes[m]))
    return pairs
