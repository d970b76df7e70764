"""Array kernels for the hot simulation loops.

Each cache kernel takes encoded page ids (see ``ModelShape.encode``) and
returns a boolean hit array. The same source runs under numba or as plain
Python over numpy arrays; victim selection is a numpy reduction over the k
cache slots in both cases, so the two paths make identical decisions.

Cover-time sampling has a separate vectorised numpy implementation because a
per-draw Python loop is far too slow; its random stream differs from the numba
one, so estimates agree statistically but not bit-for-bit across backends.
"""
import numpy as np

from ._accel import NUMBA_ENABLED, njit


@njit
def lru_hits(pages, k):
    T = pages.shape[0]
    hits = np.zeros(T, dtype=np.bool_)
    if T == 0:
        return hits
    npages = pages.max() + 1
    slot_of = np.full(npages, -1, dtype=np.int64)
    slot_page = np.zeros(k, dtype=np.int64)
    slot_tau = np.zeros(k, dtype=np.int64)
    used = 0
    for i in range(T):
        p = pages[i]
        s = slot_of[p]
        if s >= 0:
            hits[i] = True
            slot_tau[s] = i + 1
            continue
        if used < k:
            s = used
            used += 1
        else:
            s = np.argmin(slot_tau)
            slot_of[slot_page[s]] = -1
        slot_page[s] = p
        slot_tau[s] = i + 1
        slot_of[p] = s
    return hits


@njit
def llru_hits(pages, times, k, ell, shift):
    """Layered LRU. ``times`` are the global 1-indexed request times.

    Victim = argmax of ``R * ell + D`` with ``R = (t - tau) // ell`` and
    ``D = (tau - t - shift) % ell``; ``shift=0`` is the literal index, ``shift=1``
    ranks pages of the layer being requested as furthest away.
    """
    T = pages.shape[0]
    hits = np.zeros(T, dtype=np.bool_)
    if T == 0:
        return hits
    npages = pages.max() + 1
    slot_of = np.full(npages, -1, dtype=np.int64)
    slot_page = np.zeros(k, dtype=np.int64)
    slot_tau = np.zeros(k, dtype=np.int64)
    used = 0
    for i in range(T):
        p = pages[i]
        t = times[i]
        s = slot_of[p]
        if s >= 0:
            hits[i] = True
            slot_tau[s] = t
            continue
        if used < k:
            s = used
            used += 1
        else:
            age = t - slot_tau
            key = (age // ell) * ell + (-age - shift) % ell
            s = np.argmax(key)
            slot_of[slot_page[s]] = -1
        slot_page[s] = p
        slot_tau[s] = t
        slot_of[p] = s
    return hits


@njit
def next_use(pages):
    """Index of the next request of the same page, or -1 if none."""
    T = pages.shape[0]
    nxt = np.full(T, -1, dtype=np.int64)
    if T == 0:
        return nxt
    last = np.full(pages.max() + 1, -1, dtype=np.int64)
    for i in range(T - 1, -1, -1):
        nxt[i] = last[pages[i]]
        last[pages[i]] = i
    return nxt


@njit
def belady_hits(pages, k):
    """Furthest-in-future eviction; never-again pages go first, smallest id first."""
    T = pages.shape[0]
    hits = np.zeros(T, dtype=np.bool_)
    if T == 0:
        return hits
    npages = pages.max() + 1
    nxt = next_use(pages)
    inf_base = T + 1
    slot_of = np.full(npages, -1, dtype=np.int64)
    slot_page = np.zeros(k, dtype=np.int64)
    slot_key = np.zeros(k, dtype=np.int64)
    used = 0
    for i in range(T):
        p = pages[i]
        nk = nxt[i] if nxt[i] >= 0 else inf_base + (npages - p)
        s = slot_of[p]
        if s >= 0:
            hits[i] = True
            slot_key[s] = nk
            continue
        if used < k:
            s = used
            used += 1
        else:
            s = np.argmax(slot_key)
            slot_of[slot_page[s]] = -1
        slot_page[s] = p
        slot_key[s] = nk
        slot_of[p] = s
    return hits


@njit
def marking_hits(pages, k, uniforms):
    """Randomised marking. ``uniforms[j]`` in [0, 1) drives the j-th eviction.

    Candidates are the unmarked residents in canonical page order; the victim is
    ``candidates[int(u * len(candidates))]``. A miss that finds every resident
    marked starts a new phase by unmarking all of them first.
    """
    T = pages.shape[0]
    hits = np.zeros(T, dtype=np.bool_)
    if T == 0:
        return hits
    npages = pages.max() + 1
    slot_of = np.full(npages, -1, dtype=np.int64)
    slot_page = np.zeros(k, dtype=np.int64)
    slot_marked = np.zeros(k, dtype=np.bool_)
    used = 0
    draws = 0
    for i in range(T):
        p = pages[i]
        s = slot_of[p]
        if s >= 0:
            hits[i] = True
            slot_marked[s] = True
            continue
        if used < k:
            s = used
            used += 1
        else:
            cand = np.flatnonzero(~slot_marked)
            if cand.shape[0] == 0:
                slot_marked[:] = False
                cand = np.arange(k)
            order = np.argsort(slot_page[cand])
            j = int(uniforms[draws] * cand.shape[0])
            draws += 1
            s = cand[order[j]]
            slot_of[slot_page[s]] = -1
        slot_page[s] = p
        slot_marked[s] = True
        slot_of[p] = s
    return hits


@njit
def _cover_times_jit(N, C, samples, seed):
    np.random.seed(seed)
    out = np.empty(samples, dtype=np.int64)
    seen = np.zeros(N, dtype=np.bool_)
    for s in range(samples):
        worst = 0
        for _ in range(C):
            seen[:] = False
            got = 0
            r = 0
            while got < N:
                x = np.random.randint(0, N)
                r += 1
                if not seen[x]:
                    seen[x] = True
                    got += 1
            if r > worst:
                worst = r
        out[s] = worst
    return out


def _cover_times_numpy(N, C, samples, seed, chunk_cells=1 << 24):
    """Vectorised: every collector of every sample advances one draw per round."""
    rng = np.random.default_rng(seed)
    out = np.empty(samples, dtype=np.int64)
    per_chunk = max(1, chunk_cells // max(1, C * N))
    for start in range(0, samples, per_chunk):
        m = min(per_chunk, samples - start)
        collectors = m * C
        seen = np.zeros((collectors, N), dtype=np.bool_)
        got = np.zeros(collectors, dtype=np.int64)
        finish = np.zeros(collectors, dtype=np.int64)
        active = np.arange(collectors)
        r = 0
        while active.size:
            r += 1
            draws = rng.integers(0, N, size=active.size)
            fresh = ~seen[active, draws]
            seen[active, draws] = True
            got[active] += fresh
            done = got[active] == N
            finish[active[done]] = r
            active = active[~done]
        out[start:start + m] = finish.reshape(m, C).max(axis=1)
    return out


def cover_times(N: int, C: int, samples: int, seed: int) -> np.ndarray:
    """Sampled values of T(N, C), the round at which the last of C collectors completes."""
    if NUMBA_ENABLED:
        return _cover_times_jit(int(N), int(C), int(samples), int(seed) % (1 << 32))
    return _cover_times_numpy(int(N), int(C), int(samples), int(seed))
