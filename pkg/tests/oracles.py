"""Independent reference implementations used only by the tests.

None of these import library code paths they are meant to check.
"""
from fractions import Fraction

# -- Keccak-f[1600] sponge, written from the permutation definition ----------

_RC = [
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A, 0x8000000080008000,
    0x000000000000808B, 0x0000000080000001, 0x8000000080008081, 0x8000000000008009,
    0x000000000000008A, 0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089, 0x8000000000008003,
    0x8000000000008002, 0x8000000000000080, 0x000000000000800A, 0x800000008000000A,
    0x8000000080008081, 0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
]
_ROT = [
    [0, 36, 3, 41, 18],
    [1, 44, 10, 45, 2],
    [62, 6, 43, 15, 61],
    [28, 55, 25, 21, 56],
    [27, 20, 39, 8, 14],
]
_MASK = (1 << 64) - 1


def _rol(v, n):
    n %= 64
    return ((v << n) | (v >> (64 - n))) & _MASK if n else v


def _keccak_f(A):
    for rc in _RC:
        C = [A[x][0] ^ A[x][1] ^ A[x][2] ^ A[x][3] ^ A[x][4] for x in range(5)]
        D = [C[(x - 1) % 5] ^ _rol(C[(x + 1) % 5], 1) for x in range(5)]
        A = [[A[x][y] ^ D[x] for y in range(5)] for x in range(5)]
        B = [[0] * 5 for _ in range(5)]
        for x in range(5):
            for y in range(5):
                B[y][(2 * x + 3 * y) % 5] = _rol(A[x][y], _ROT[x][y])
        A = [[B[x][y] ^ ((~B[(x + 1) % 5][y]) & B[(x + 2) % 5][y]) for y in range(5)]
             for x in range(5)]
        A[0][0] ^= rc
    return A


def keccak256_ref(data: bytes) -> bytes:
    rate = 136
    msg = bytearray(data)
    msg.append(0x01)                      # original Keccak domain padding
    while len(msg) % rate:
        msg.append(0)
    msg[-1] |= 0x80
    A = [[0] * 5 for _ in range(5)]
    for off in range(0, len(msg), rate):
        block = msg[off:off + rate]
        for i in range(rate // 8):
            lane = int.from_bytes(block[8 * i:8 * i + 8], "little")
            A[i % 5][i // 5] ^= lane
        A = _keccak_f(A)
    out = b"".join(A[i % 5][i // 5].to_bytes(8, "little") for i in range(rate // 8))
    return out[:32]


# -- integer arithmetic -------------------------------------------------------

def sdiv(a: int, b: int) -> int:
    """Truncating division via exact rationals."""
    return int(Fraction(a, b))


def _dot(bias, ws, xs, S):
    acc = bias
    for w, x in zip(ws, xs):
        acc += sdiv(w * x, S)
    return acc


def _relu(v):
    return v if v > 0 else 0


def _chunks(seq, n):
    return [list(seq[i:i + n]) for i in range(0, len(seq), n)]


def oracle_logit(model, x):
    """Brute-force integer logit; unpacks parameters into matrices first."""
    from poimlab.models import Cnn1d, Linear, Mlp, Rnn

    arch, w, b, S = model.arch, list(model.weights), list(model.biases), model.scale.value
    x = list(x)
    if isinstance(arch, Linear):
        return _dot(b[0], w, x, S)
    if isinstance(arch, Mlp):
        act, wi, bi, n_in = x, 0, 0, arch.d
        for li, n_out in enumerate(arch.layer_sizes):
            rows = _chunks(w[wi:wi + n_in * n_out], n_in)
            z = [_dot(b[bi + r], rows[r], act, S) for r in range(n_out)]
            last = li == len(arch.layer_sizes) - 1
            act = z if last else [_relu(v) for v in z]
            wi, bi, n_in = wi + n_in * n_out, bi + n_out, n_out
        return act[0]
    if isinstance(arch, Cnn1d):
        F, K = arch.filters, arch.kernel
        o = arch.d - K + 1
        kernels = _chunks(w[:F * K], K)
        feats = [_relu(_dot(b[f], kernels[f], x[p:p + K], S)) for f in range(F) for p in range(o)]
        return _dot(b[F], w[F * K:], feats, S)
    if isinstance(arch, Rnn):
        U, T = arch.units, arch.timesteps
        d_in = -(-arch.d // T)
        wx = _chunks(w[:U * d_in], d_in)
        wh = _chunks(w[U * d_in:U * d_in + U * U], U)
        wout = w[U * d_in + U * U:]
        xs = x + [0] * (T * d_in - len(x))
        h = [0] * U
        for t in range(T):
            step = xs[t * d_in:(t + 1) * d_in]
            h = [_relu(_dot(b[u], wx[u] + wh[u], step + h, S)) for u in range(U)]
        return _dot(b[U], wout, h, S)
    raise TypeError(arch)


def oracle_tree(model, x):
    nodes, t = model.arch.nodes, model.weights
    i = 0
    while nodes[i].feature >= 0:
        i = nodes[i].left if x[nodes[i].feature] <= t[i] else nodes[i].right
    return nodes[i].label


def oracle_label(model, x):
    from poimlab.models import DecisionTree

    if isinstance(model.arch, DecisionTree):
        return oracle_tree(model, x)
    return 1 if oracle_logit(model, x) > 0 else 0
