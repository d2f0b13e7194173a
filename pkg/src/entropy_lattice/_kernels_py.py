"""Pure-Python/numpy fallback for the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def _merge(s1, l1, s2, l2):
    if s1 == 0:
        return s2, l2
    if s2 == 0:
        return s1, l1
    mx = max(l1, l2)
    v = s1 * np.exp(l1 - mx) + s2 * np.exp(l2 - mx)
    if v == 0.0:
        return 0, -np.inf
    return (1 if v > 0 else -1), float(mx + np.log(abs(v)))


def chunk_logsumexp(terms, signs, chunk):
    terms = np.asarray(terms, dtype=np.float64)
    signs = np.asarray(signs, dtype=np.int8)
    n = terms.shape[0]
    nchunks = (n + chunk - 1) // chunk
    out_s = np.zeros(nchunks, dtype=np.int8)
    out_l = np.full(nchunks, -np.inf)
    for c in range(nchunks):
        t = terms[c * chunk:(c + 1) * chunk]
        sg = signs[c * chunk:(c + 1) * chunk]
        live = sg != 0
        if not live.any():
            continue
        mx = t[live].max()
        contrib = np.where(live, sg * np.exp(np.where(live, t - mx, 0.0)), 0.0)
        # cumsum is a strict left-to-right accumulation, same as the C loop
        acc = float(np.cumsum(contrib)[-1])
        if acc != 0.0:
            out_s[c] = 1 if acc > 0 else -1
            out_l[c] = mx + np.log(abs(acc))
    return out_s, out_l


def tree_merge(signs, logs):
    s = [int(v) for v in signs]
    lg = [float(v) for v in logs]
    if not s:
        return 0, -np.inf
    while len(s) > 1:
        ns, nl = [], []
        for j in range(0, len(s) - 1, 2):
            a, b = _merge(s[j], lg[j], s[j + 1], lg[j + 1])
            ns.append(a)
            nl.append(b)
        if len(s) % 2:
            ns.append(s[-1])
            nl.append(lg[-1])
        s, lg = ns, nl
    return s[0], lg[0]


def alias_build(probs):
    probs = np.asarray(probs, dtype=np.float64)
    K = probs.shape[0]
    q = K * probs
    J = np.arange(K, dtype=np.int64)
    small = [i for i in range(K) if q[i] < 1.0]
    large = [i for i in range(K) if q[i] >= 1.0]
    while small and large:
        sm = small.pop()
        lg = large.pop()
        J[sm] = lg
        q[lg] = (q[lg] + q[sm]) - 1.0
        if q[lg] < 1.0:
            small.append(lg)
        else:
            large.append(lg)
    for i in large + small:
        q[i] = 1.0
    return q, J


def alias_draw(q, J, u_col, u_acc):
    K = q.shape[0]
    k = np.minimum((np.asarray(u_col) * K).astype(np.int64), K - 1)
    return np.where(np.asarray(u_acc) < q[k], k, J[k]).astype(np.int64)
