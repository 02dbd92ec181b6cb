# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot loop of the link simulator.

Mirrors ``_fallback.py`` statement for statement; both consume two uniforms
per slot so they produce identical trajectories from the same stream.
"""
from libc.stdint cimport int64_t

cdef enum:
    PBG = 0
    REPLACE_OLDEST = 1


def run_chain(int64_t[::1] state, const double[:, ::1] u, double pg,
              const double[:, ::1] ps, const int64_t[:, ::1] pa, int64_t n,
              int policy, bint record, int64_t[::1] older, int64_t[::1] newer,
              int64_t[::1] counts):
    """Advance ``state = [is_pair, i, j]`` by ``len(u)`` slots in place.

    When ``record`` is true, per-slot occupancy goes to ``older``/``newer``
    and ``counts = [single, pair, generations, attempts, successes, failures]``.
    """
    cdef Py_ssize_t k, steps = u.shape[0]
    cdef int64_t is_pair = state[0], i = state[1], j = state[2]
    for k in range(steps):
        if u[k, 0] < pg:
            if record:
                counts[2] += 1
            if not is_pair:
                is_pair = 1
                i = 0
                j = j + 1 if j < n else n
            elif policy == PBG:
                if record:
                    counts[3] += 1
                if u[k, 1] < ps[i, j]:
                    if record:
                        counts[4] += 1
                    j = pa[i, j]
                    i = 0
                else:
                    if record:
                        counts[5] += 1
                    is_pair = 0
                    i = 0
                    j = 0
            else:
                j = i + 1 if i < n else n
                i = 0
        else:
            if j < n:
                j += 1
            if is_pair and i < n:
                i += 1
        if record:
            older[j] += 1
            if is_pair:
                counts[1] += 1
                newer[i] += 1
            else:
                counts[0] += 1
    state[0] = is_pair
    state[1] = i
    state[2] = j


def step_batch(int64_t is_pair, int64_t i, int64_t j, const double[:, ::1] u, double pg,
               const double[:, ::1] ps, const int64_t[:, ::1] pa, int64_t n, int policy,
               int64_t[::1] out):
    """One slot from the same start state for every row of ``u``; writes destination indices."""
    cdef Py_ssize_t k
    cdef int64_t di, dj, dpair
    for k in range(u.shape[0]):
        dpair = is_pair
        di = i
        dj = j
        if u[k, 0] < pg:
            if not is_pair:
                dpair = 1
                di = 0
                dj = j + 1 if j < n else n
            elif policy == PBG:
                if u[k, 1] < ps[i, j]:
                    dj = pa[i, j]
                    di = 0
                else:
                    dpair = 0
                    di = 0
                    dj = 0
            else:
                dj = i + 1 if i < n else n
                di = 0
        else:
            if dj < n:
                dj += 1
            if dpair and di < n:
                di += 1
        if dpair:
            out[k] = (n + 1) + di * (n + 1) - di * (di - 1) // 2 + (dj - di)
        else:
            out[k] = dj
