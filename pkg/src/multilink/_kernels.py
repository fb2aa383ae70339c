"""Hot loops: tuple-to-partition coding and the EM row sweeps.

Each kernel comes in two flavours with identical signatures: ``*_nb`` is a
plain loop compiled with numba, ``*_np`` is vectorised numpy.  The public
names dispatch to the numba version when numba is importable and not
disabled through ``MULTILINK_DISABLE_NUMBA``.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit

# ---------------------------------------------------------------------------
# tuple -> canonical partition index
#
# codes:   concatenated per-file integer codes, -1 = missing (never agrees)
# offsets: start of each file's slice in ``codes`` (length K + 1)
# shape:   file sizes; linear tuple indices are row-major over ``shape``
# ---------------------------------------------------------------------------


@njit
def partition_indices_nb(codes, offsets, shape, lin, rank_table, lex_to_canon):
    k = shape.shape[0]
    n = lin.shape[0]
    out = np.empty(n, dtype=np.int32)
    vals = np.empty(k, dtype=np.int64)
    rgs = np.empty(k, dtype=np.int64)
    for t in range(n):
        rem = lin[t]
        for f in range(k - 1, -1, -1):
            m = shape[f]
            vals[f] = codes[offsets[f] + rem % m]
            rem //= m
        rgs[0] = 0
        top = 0
        rank = 0
        for i in range(1, k):
            v = vals[i]
            label = top + 1
            if v >= 0:
                for j in range(i):
                    if vals[j] == v:
                        label = rgs[j]
                        break
            rgs[i] = label
            rank += label * rank_table[k - 1 - i, top]
            if label > top:
                top = label
        out[t] = lex_to_canon[rank]
    return out


def partition_indices_np(codes, offsets, shape, lin, rank_table, lex_to_canon):
    k = shape.shape[0]
    idx = np.unravel_index(lin, tuple(int(m) for m in shape))
    vals = [codes[offsets[f] + idx[f]] for f in range(k)]
    return label_indices_np(vals, rank_table, lex_to_canon)


def label_indices_np(vals, rank_table, lex_to_canon):
    """Canonical index of the agreement partition of each row of labels.

    ``vals`` is a sequence of K equal-length integer arrays (or an (n, K)
    array); negative labels agree with nothing.
    """
    if isinstance(vals, np.ndarray) and vals.ndim == 2:
        vals = [vals[:, f] for f in range(vals.shape[1])]
    k = len(vals)
    n = vals[0].shape[0]
    rgs = [np.zeros(n, dtype=np.int64)]
    top = np.zeros(n, dtype=np.int64)
    rank = np.zeros(n, dtype=np.int64)
    for i in range(1, k):
        label = top + 1
        ok = vals[i] >= 0
        # scan right-to-left so the earliest matching position wins
        for j in range(i - 1, -1, -1):
            hit = ok & (vals[j] == vals[i])
            label = np.where(hit, rgs[j], label)
        rgs.append(label)
        rank += label * rank_table[k - 1 - i, top]
        top = np.maximum(top, label)
    return lex_to_canon[rank].astype(np.int32)


# ---------------------------------------------------------------------------
# EM row sweeps
#
# gamma:    (R, F) per-field pattern index of each table row
# pb_slot:  (R,) row -> index into ``adm``
# adm:      (U, B) admissible classes per distinct blocking pattern
# log_s:    (B,) log prevalences (may hold -inf)
# log_pi:   (F, B, B) floored log of pi[f, observed, class]
# clamp:    (R,) class index to force, or -1
# returns   posteriors (R, B) and per-row log marginal (R,)
# ---------------------------------------------------------------------------


@njit
def e_step_nb(gamma, pb_slot, adm, log_s, log_pi, clamp):
    r_count, f_count = gamma.shape
    b = log_s.shape[0]
    post = np.zeros((r_count, b))
    logmarg = np.empty(r_count)
    work = np.empty(b)
    for r in range(r_count):
        slot = pb_slot[r]
        mx = -np.inf
        for p in range(b):
            if adm[slot, p]:
                v = log_s[p]
                for f in range(f_count):
                    v += log_pi[f, gamma[r, f], p]
                work[p] = v
                if v > mx:
                    mx = v
            else:
                work[p] = -np.inf
        if mx == -np.inf:
            logmarg[r] = -np.inf
            continue
        acc = 0.0
        for p in range(b):
            if adm[slot, p]:
                acc += np.exp(work[p] - mx)
        lse = mx + np.log(acc)
        logmarg[r] = lse
        c = clamp[r]
        if c >= 0:
            post[r, c] = 1.0
        else:
            for p in range(b):
                if adm[slot, p]:
                    post[r, p] = np.exp(work[p] - lse)
    return post, logmarg


def e_step_np(gamma, pb_slot, adm, log_s, log_pi, clamp):
    r_count, f_count = gamma.shape
    work = np.broadcast_to(log_s, (r_count, log_s.shape[0])).copy()
    for f in range(f_count):
        work += log_pi[f][gamma[:, f]]
    mask = adm[pb_slot]
    work[~mask] = -np.inf
    mx = work.max(axis=1)
    bad = mx == -np.inf
    safe = np.where(bad, 0.0, mx)
    with np.errstate(invalid="ignore"):
        expd = np.exp(work - safe[:, None])
    expd[~mask] = 0.0
    acc = expd.sum(axis=1)
    with np.errstate(divide="ignore"):
        logmarg = np.where(bad, -np.inf, safe + np.log(np.where(bad, 1.0, acc)))
    post = np.zeros_like(work)
    good = ~bad
    post[good] = np.exp(work[good] - logmarg[good, None])
    post[~mask] = 0.0
    hit = clamp >= 0
    if hit.any():
        rows = np.flatnonzero(hit)
        post[rows] = 0.0
        post[rows, clamp[rows]] = 1.0
    return post, logmarg


@njit
def m_step_stats_nb(gamma, counts, post):
    r_count, f_count = gamma.shape
    b = post.shape[1]
    num = np.zeros((f_count, b, b))
    den = np.zeros(b)
    for r in range(r_count):
        n = counts[r]
        for p in range(b):
            w = n * post[r, p]
            if w != 0.0:
                den[p] += w
                for f in range(f_count):
                    num[f, gamma[r, f], p] += w
    return num, den


def m_step_stats_np(gamma, counts, post):
    r_count, f_count = gamma.shape
    b = post.shape[1]
    weights = counts[:, None] * post
    den = weights.sum(axis=0)
    num = np.zeros((f_count, b, b))
    for f in range(f_count):
        for p in range(b):
            num[f, :, p] = np.bincount(gamma[:, f], weights=weights[:, p], minlength=b)
    return num, den


if HAVE_NUMBA:
    partition_indices = partition_indices_nb
    e_step = e_step_nb
    m_step_stats = m_step_stats_nb
else:
    partition_indices = partition_indices_np
    e_step = e_step_np
    m_step_stats = m_step_stats_np

BACKEND = "numba" if HAVE_NUMBA else "numpy"
