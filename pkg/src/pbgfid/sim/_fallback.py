"""Pure-Python slot loop, used when the compiled kernel is unavailable.

Same signatures and semantics as ``_kernel.pyx``.
"""
PBG = 0
REPLACE_OLDEST = 1


def advance(is_pair, i, j, u0, u1, pg, ps, pa, n, policy):
    """One slot. Returns ``(is_pair, i, j, event)``; event 0 none, 1 generation
    into a single memory or replacement, 2 purification success, 3 failure."""
    if u0 < pg:
        if not is_pair:
            return 1, 0, (j + 1 if j < n else n), 1
        if policy == PBG:
            if u1 < ps[i][j]:
                return 1, 0, pa[i][j], 2
            return 0, 0, 0, 3
        return 1, 0, (i + 1 if i < n else n), 1
    if j < n:
        j += 1
    if is_pair and i < n:
        i += 1
    return is_pair, i, j, 0


def run_chain(state, u, pg, ps, pa, n, policy, record, older, newer, counts):
    is_pair, i, j = int(state[0]), int(state[1]), int(state[2])
    ps_l = ps.tolist()
    pa_l = pa.tolist()
    if record:
        old_l = [0] * len(older)
        new_l = [0] * len(newer)
        c = [0] * 6
    for u0, u1 in u.tolist():
        is_pair, i, j, event = advance(is_pair, i, j, u0, u1, pg, ps_l, pa_l, n, policy)
        if record:
            if event:
                c[2] += 1
                if event > 1:
                    c[3] += 1
                    c[event + 2] += 1
            old_l[j] += 1
            if is_pair:
                c[1] += 1
                new_l[i] += 1
            else:
                c[0] += 1
    if record:
        older += old_l
        newer += new_l
        counts += c
    state[0], state[1], state[2] = is_pair, i, j


def step_batch(is_pair, i, j, u, pg, ps, pa, n, policy, out):
    ps_l = ps.tolist()
    pa_l = pa.tolist()
    for k, (u0, u1) in enumerate(u.tolist()):
        dp, di, dj, _ = advance(is_pair, i, j, u0, u1, pg, ps_l, pa_l, n, policy)
        if dp:
            out[k] = (n + 1) + di * (n + 1) - di * (di - 1) // 2 + (dj - di)
        else:
            out[k] = dj
