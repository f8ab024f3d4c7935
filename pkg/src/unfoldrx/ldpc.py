"""LDPC code container, systematic encoder, and damped SISO flooding decoder.

The decoder is a sum-product flooding decoder with the numerically stable
pairwise box-plus kernel.  Check-to-variable messages are the decoder state;
per-iteration damping blends the raw check-node update with the previous
state and the incoming variable-to-check message.  All message arithmetic
goes through :mod:`unfoldrx.fad` so hyperparameter tangents can flow through
decoding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import fad
from .errors import ConfigurationError, InputError

MSG_CLIP = 30.0          # message magnitude cap; below the test saturation
_BP_IDENT = 1e30         # box-plus identity (acts like +infinity)


# ---------------------------------------------------------------------------
# code container

class LdpcCode:
    """Binary LDPC code given by check-node adjacency.

    ``vn_adj[v]`` lists check nodes of variable v, ``cn_adj[c]`` variables of
    check c.  Edges are ordered variable-major; the systematic form (data
    positions + dense parity generator) is computed once at construction.
    """

    def __init__(self, n: int, m: int, vn_adj: Sequence[Sequence[int]]):
        self.n = int(n)
        self.m = int(m)
        self.vn_adj: List[Tuple[int, ...]] = [tuple(sorted(a)) for a in vn_adj]
        if len(self.vn_adj) != self.n:
            raise ConfigurationError("vn adjacency length mismatch")
        cn_adj: List[List[int]] = [[] for _ in range(self.m)]
        for v, checks in enumerate(self.vn_adj):
            for c in checks:
                if not 0 <= c < self.m:
                    raise InputError(f"check index {c} out of range for VN {v}")
                cn_adj[c].append(v)
        self.cn_adj: List[Tuple[int, ...]] = [tuple(a) for a in cn_adj]
        if any(len(a) == 0 for a in self.cn_adj):
            raise ConfigurationError("degree-0 check node")

        # edge tables, variable-major order
        edge_vn, edge_cn = [], []
        for v, checks in enumerate(self.vn_adj):
            for c in checks:
                edge_vn.append(v)
                edge_cn.append(c)
        self.n_edges = len(edge_vn)
        self.edge_vn = np.array(edge_vn)
        self.edge_cn = np.array(edge_cn)

        dv_max = max(len(a) for a in self.vn_adj)
        dc_max = max(len(a) for a in self.cn_adj)
        self.dv_max, self.dc_max = dv_max, dc_max

        # padded edge-index grids; E is a sentinel slot (masked out)
        vn_grid = np.full((self.n, dv_max), self.n_edges)
        cn_grid = np.full((self.m, dc_max), self.n_edges)
        cn_slot: dict[int, int] = {}
        next_edge_of_vn = np.zeros(self.n, dtype=int)
        cn_fill = np.zeros(self.m, dtype=int)
        for e in range(self.n_edges):
            v, c = self.edge_vn[e], self.edge_cn[e]
            vn_grid[v, next_edge_of_vn[v]] = e
            next_edge_of_vn[v] += 1
            cn_grid[c, cn_fill[c]] = e
            cn_slot[e] = cn_fill[c]
            cn_fill[c] += 1
        self.vn_grid, self.cn_grid = vn_grid, cn_grid
        self.vn_mask = vn_grid < self.n_edges
        self.cn_mask = cn_grid < self.n_edges
        # position of each edge inside the flattened (m, dc_max) grid
        self.edge_cn_pos = self.edge_cn * dc_max + np.array(
            [cn_slot[e] for e in range(self.n_edges)])

        self._build_systematic()

    # -- systematic form ----------------------------------------------------

    def _build_systematic(self) -> None:
        nw = (self.n + 63) // 64
        rows = np.zeros((self.m, nw), dtype=np.uint64)
        for c, vars_ in enumerate(self.cn_adj):
            for v in vars_:
                rows[c, v >> 6] |= np.uint64(1) << np.uint64(v & 63)
        pivot_cols: List[int] = []
        r = 0
        for col in range(self.n):
            if r == self.m:
                break
            w, b = col >> 6, np.uint64(col & 63)
            colbits = (rows[:, w] >> b) & np.uint64(1)
            cand = np.nonzero(colbits[r:])[0]
            if cand.size == 0:
                continue
            pr = r + int(cand[0])
            if pr != r:
                rows[[r, pr]] = rows[[pr, r]]
            hit = np.nonzero(((rows[:, w] >> b) & np.uint64(1)).astype(bool))[0]
            hit = hit[hit != r]
            rows[hit] ^= rows[r]
            pivot_cols.append(col)
            r += 1
        if r < self.m:
            raise ConfigurationError(
                f"parity matrix is rank deficient (rank {r} < {self.m})")
        piv = np.array(pivot_cols)
        in_piv = np.zeros(self.n, dtype=bool)
        in_piv[piv] = True
        self.data_positions = np.nonzero(~in_piv)[0]
        self.parity_positions = piv
        # parity generator: parity bits = P @ d (mod 2)
        k = self.k
        p = np.zeros((self.m, k), dtype=np.uint8)
        for j, col in enumerate(self.data_positions):
            w, b = col >> 6, np.uint64(col & 63)
            p[:, j] = ((rows[:, w] >> b) & np.uint64(1)).astype(np.uint8)
        self._parity_gen = p.astype(np.float32)

    @property
    def k(self) -> int:
        return self.n - self.m

    @property
    def rate(self) -> float:
        return self.k / self.n

    # -- encoding / checks --------------------------------------------------

    def encode(self, data: np.ndarray) -> np.ndarray:
        """Systematic encoding of (..., k) data bits to (..., n) codewords."""
        data = np.asarray(data)
        if data.shape[-1] != self.k:
            raise ConfigurationError(
                f"data length {data.shape[-1]} != k={self.k}")
        parity = (data.astype(np.float32) @ self._parity_gen.T) % 2.0
        out = np.zeros(data.shape[:-1] + (self.n,), dtype=np.uint8)
        out[..., self.data_positions] = data
        out[..., self.parity_positions] = parity.astype(np.uint8)
        return out

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        """(..., m) parity checks of (..., n) bit vectors (mod 2)."""
        bits = np.asarray(bits).astype(np.int64)
        ext = np.concatenate([bits, np.zeros(bits.shape[:-1] + (1,),
                                             dtype=np.int64)], axis=-1)
        return ext[..., np.where(self.cn_mask, self.vn_of_cn_grid, self.n)
                   ].sum(axis=-1) % 2

    @property
    def vn_of_cn_grid(self) -> np.ndarray:
        grid = np.full((self.m, self.dc_max), self.n)
        for c, vars_ in enumerate(self.cn_adj):
            grid[c, :len(vars_)] = vars_
        return grid


# ---------------------------------------------------------------------------
# alist I/O

def parse_alist(text: str) -> LdpcCode:
    toks = text.split()
    if len(toks) < 4:
        raise InputError("alist file too short")
    it = iter(toks)

    def nxt() -> int:
        try:
            return int(next(it))
        except StopIteration:
            raise InputError("alist file truncated") from None
        except ValueError as e:
            raise InputError(f"alist token not an integer: {e}") from None

    n, m = nxt(), nxt()
    if n <= 0 or m <= 0:
        raise InputError("alist dimensions must be positive")
    dv_max, dc_max = nxt(), nxt()
    vn_deg = [nxt() for _ in range(n)]
    cn_deg = [nxt() for _ in range(m)]
    if any(d < 0 or d > dv_max for d in vn_deg):
        raise InputError("variable degree out of range")
    if any(d < 0 or d > dc_max for d in cn_deg):
        raise InputError("check degree out of range")
    vn_adj = []
    for v in range(n):
        entries = [nxt() for _ in range(dv_max)]
        nz = [e for e in entries if e != 0]
        if len(nz) != vn_deg[v]:
            raise InputError(f"VN {v}: {len(nz)} entries but degree {vn_deg[v]}")
        if any(not 1 <= e <= m for e in nz):
            raise InputError(f"VN {v}: check index out of range")
        vn_adj.append([e - 1 for e in nz])
    cn_adj = [[] for _ in range(m)]
    for c in range(m):
        entries = [nxt() for _ in range(dc_max)]
        nz = [e for e in entries if e != 0]
        if len(nz) != cn_deg[c]:
            raise InputError(f"CN {c}: {len(nz)} entries but degree {cn_deg[c]}")
        if any(not 1 <= e <= n for e in nz):
            raise InputError(f"CN {c}: variable index out of range")
        cn_adj[c] = sorted(e - 1 for e in nz)
    code = LdpcCode(n, m, vn_adj)
    for c in range(m):
        if list(code.cn_adj[c]) != cn_adj[c]:
            raise InputError(f"CN {c}: adjacency inconsistent with VN lists")
    return code


def load_alist(path) -> LdpcCode:
    with open(path, "r") as f:
        return parse_alist(f.read())


def dump_alist(code: LdpcCode) -> str:
    lines = [f"{code.n} {code.m}", f"{code.dv_max} {code.dc_max}",
             " ".join(str(len(a)) for a in code.vn_adj),
             " ".join(str(len(a)) for a in code.cn_adj)]
    for a in code.vn_adj:
        ent = [str(c + 1) for c in a] + ["0"] * (code.dv_max - len(a))
        lines.append(" ".join(ent))
    for a in code.cn_adj:
        ent = [str(v + 1) for v in a] + ["0"] * (code.dc_max - len(a))
        lines.append(" ".join(ent))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# progressive edge growth construction

def peg_construct(n: int, m: int, var_degree: int,
                  rng: np.random.Generator) -> LdpcCode:
    """Regular PEG graph: each edge goes to the most distant check node with
    remaining capacity, breaking ties by lowest degree then at random."""
    cap = n * var_degree
    if cap % m:
        raise ConfigurationError("degrees do not divide evenly")
    dc = cap // m
    vn_adj = [set() for _ in range(n)]
    cn_adj = [set() for _ in range(m)]
    cn_deg = np.zeros(m, dtype=int)
    for v in range(n):
        for _ in range(var_degree):
            open_cns = cn_deg < dc
            if not open_cns.any():
                raise ConfigurationError("check-node capacity exhausted")
            if not vn_adj[v]:
                reachable = np.zeros(m, dtype=bool)
            else:
                # BFS: set of check nodes reachable from v in the current graph
                reachable = np.zeros(m, dtype=bool)
                seen_v = np.zeros(n, dtype=bool)
                seen_v[v] = True
                frontier = set(vn_adj[v])
                while frontier:
                    reachable[list(frontier)] = True
                    nxt_v = {u for c in frontier for u in cn_adj[c]
                             if not seen_v[u]}
                    for u in nxt_v:
                        seen_v[u] = True
                    frontier = {c for u in nxt_v for c in vn_adj[u]
                                if not reachable[c]}
            cand = open_cns & ~reachable
            if not cand.any():
                cand = open_cns  # fall back: cycle unavoidable at capacity
            idx = np.nonzero(cand)[0]
            best = idx[cn_deg[idx] == cn_deg[idx].min()]
            c = int(best[rng.integers(len(best))])
            vn_adj[v].add(c)
            cn_adj[c].add(v)
            cn_deg[c] += 1
    return LdpcCode(n, m, [sorted(a) for a in vn_adj])


# ---------------------------------------------------------------------------
# decoding

@dataclass
class DampingParams:
    """Per-MP-iteration damping weights; stored unconstrained.

    With ``allow_overshoot`` (the trainable-receiver setting) the raw scalars
    are applied as-is, so the blend stays smooth in mu and xi everywhere,
    including the classical initialization mu = xi = 0.  Without it the
    applied values are clamped to [0, 1] and rescaled onto mu + xi = 1 if the
    pair overshoots, which keeps the blend convex.
    """
    mu: object               # (N_MP,) floats or fad.Dual
    xi: object
    allow_overshoot: bool = True

    def weights(self, j: int):
        mu, xi = self.mu[j], self.xi[j]
        if not self.allow_overshoot:
            mu = fad.clip(mu, 0.0, 1.0)
            xi = fad.clip(xi, 0.0, 1.0)
            s = mu + xi
            over = np.asarray(fad.val(s)) > 1.0
            if np.any(over):
                mu = fad.where(over, mu / s, mu)
                xi = fad.where(over, xi / s, xi)
        return mu, xi

    def __len__(self) -> int:
        return len(fad.val(self.mu))


@dataclass
class DecoderState:
    """Check-to-variable messages, the decoder state after each iteration."""
    messages: object         # (..., n_edges) floats or fad.Dual

    @classmethod
    def zeros(cls, code: LdpcCode, batch_shape: Tuple[int, ...] = ()):
        return cls(np.zeros(batch_shape + (code.n_edges,)))


def scale_state(state: DecoderState, gamma) -> DecoderState:
    """Scale forwarded messages; gamma=0 resets, gamma=1 forwards unchanged."""
    g = gamma
    if not fad.is_dual(g) and float(fad.val(np.asarray(g))) == 1.0 \
            and not fad.is_dual(state.messages):
        return DecoderState(state.messages)
    return DecoderState(state.messages * g)


def hard_decide(llr) -> np.ndarray:
    """Slice LLRs to bits: 1 iff L > 0 (ties decide 0)."""
    return (np.asarray(fad.val(llr)) > 0).astype(np.uint8)


def _tan_cast(x, dtype):
    if fad.is_dual(x) and x.tan.dtype != dtype:
        return fad.Dual(x.val, x.tan.astype(dtype))
    return x


def _boxplus_val(av, bv):
    """Stable pairwise box-plus on plain values."""
    sa, sb = np.sign(av), np.sign(bv)
    aa, ab = np.abs(av), np.abs(bv)
    m = np.where(aa <= ab, aa, ab)
    out = sa * sb * m
    out += np.log1p(np.exp(-np.minimum(np.abs(av + bv), 700.0)))
    out -= np.log1p(np.exp(-np.minimum(np.abs(av - bv), 700.0)))
    return out


def _boxplus(a, b):
    """Pairwise box-plus; fused tangent propagation for dual inputs.

    The partial derivatives of the stable form are computed from the values
    alone, so the (P, ...) tangent work is two multiplies and an add.
    """
    if not (fad.is_dual(a) or fad.is_dual(b)):
        return _boxplus_val(a, b)
    av, bv = fad.val(a), fad.val(b)
    out = _boxplus_val(av, bv)
    sa, sb = np.sign(av), np.sign(bv)
    a_min = np.abs(av) <= np.abs(bv)
    spb = np.sign(av + bv)
    smb = np.sign(av - bv)
    gpb = spb * _sigm(-np.abs(av + bv))
    gmb = smb * _sigm(-np.abs(av - bv))
    tan = None
    if fad.is_dual(a):
        wa = np.where(a_min, sb, 0.0) - gpb + gmb
        ta = fad._align(a.tan, np.shape(av), np.shape(out))
        tan = wa.astype(ta.dtype, copy=False) * ta
    if fad.is_dual(b):
        wb = np.where(a_min, 0.0, sa) - gpb - gmb
        tb = fad._align(b.tan, np.shape(bv), np.shape(out))
        tb = wb.astype(tb.dtype, copy=False) * tb
        tan = tb if tan is None else tan + tb
    return fad.Dual(out, tan)


def _sigm(x):
    e = np.exp(x)
    return e / (1.0 + e)


def _damped_blend(raw, msgs, phi, mu, xi):
    """(1 - mu - xi) * raw + mu * msgs + xi * phi, fused for dual inputs.

    The damping weights are scalars whose tangents have at most a few nonzero
    entries, so their contributions touch individual tangent rows instead of
    materializing full outer products.
    """
    dual = any(fad.is_dual(x) for x in (raw, msgs, phi, mu, xi))
    mu_v, xi_v = fad.val(mu), fad.val(xi)
    c_v = 1.0 - mu_v - xi_v
    raw_v, msgs_v, phi_v = fad.val(raw), fad.val(msgs), fad.val(phi)
    out = c_v * raw_v + mu_v * msgs_v + xi_v * phi_v
    if not dual:
        return out

    p = None
    for x in (raw, msgs, phi, mu, xi):
        if fad.is_dual(x):
            p = x.tan.shape[0]
            break
    if fad.is_dual(raw):
        tan = float(c_v) * fad._align(raw.tan, np.shape(raw_v), out.shape)
        if tan.shape != (p,) + out.shape:
            tan = np.broadcast_to(tan, (p,) + out.shape).copy()
    else:
        dt = next(x.tan.dtype for x in (msgs, phi, mu, xi) if fad.is_dual(x))
        tan = np.zeros((p,) + out.shape, dtype=dt)
    if fad.is_dual(msgs) and mu_v != 0.0:
        tan += float(mu_v) * fad._align(msgs.tan, np.shape(msgs_v), out.shape)
    if fad.is_dual(phi) and xi_v != 0.0:
        tan += float(xi_v) * fad._align(phi.tan, np.shape(phi_v), out.shape)
    mu_t = mu.tan.reshape(p) if fad.is_dual(mu) else np.zeros(p)
    xi_t = xi.tan.reshape(p) if fad.is_dual(xi) else np.zeros(p)
    for k in np.nonzero(mu_t != 0.0)[0]:
        tan[k] += float(mu_t[k]) * (msgs_v - raw_v)
    for k in np.nonzero(xi_t != 0.0)[0]:
        tan[k] += float(xi_t[k]) * (phi_v - raw_v)
    return fad.Dual(out, tan)


def exp_neg(x):
    return fad.exp(-fad.clip(x, 0.0, 700.0))


def decode_siso(code: LdpcCode, llr_a, state: Optional[DecoderState],
                n_iters: int, damping: Optional[DampingParams] = None,
                j_offset: int = 0):
    """Run ``n_iters`` flooding iterations; returns (intrinsic LLRs, state).

    ``llr_a`` has shape (..., n).  The state carries the damped CN->VN
    messages between calls, so two chained calls with an unscaled state equal
    one longer call with the same per-iteration damping schedule.
    """
    shape = np.shape(fad.val(llr_a))
    if shape[-1] != code.n:
        raise ConfigurationError(f"LLR length {shape[-1]} != n={code.n}")
    if n_iters < 1:
        raise ConfigurationError("need at least one iteration")
    if damping is not None and j_offset + n_iters > len(damping):
        raise ConfigurationError("damping schedule shorter than iteration span")
    batch = shape[:-1]
    if state is None:
        state = DecoderState.zeros(code, batch)
    msgs = state.messages
    if np.shape(fad.val(msgs))[-1] != code.n_edges:
        raise ConfigurationError("state edge count does not match code")
    # tangents inside the message-passing loop are linear in the seeds and
    # bandwidth-bound, so single precision is ample for them
    llr_a = _tan_cast(llr_a, np.float32)
    msgs = _tan_cast(msgs, np.float32)

    vn_grid, vn_mask = code.vn_grid, code.vn_mask
    cn_grid, cn_mask = code.cn_grid, code.cn_mask

    vn_full = bool(vn_mask.all())
    cn_full = bool(cn_mask.all())
    # regular codes store edges variable-major, so the VN gather is a reshape
    dv = vn_grid.shape[1]
    vn_contig = (vn_full and dv * code.n == code.n_edges
                 and np.array_equal(vn_grid, np.arange(code.n_edges).reshape(code.n, dv)))

    def vn_totals(messages):
        if vn_contig:
            ext = fad.reshape(messages, batch + (code.n, dv))
        else:
            ext = fad.take_last(messages, np.minimum(vn_grid, code.n_edges - 1))
            if not vn_full:
                ext = fad.where(vn_mask, ext, 0.0)
        return llr_a + fad.summ(ext, axis=-1)

    for it in range(n_iters):
        total = vn_totals(msgs)                       # (..., n)
        if vn_contig:
            grid = fad.reshape(msgs, batch + (code.n, dv))
            phi = fad.reshape(fad.reshape(total, batch + (code.n, 1)) - grid,
                              batch + (code.n_edges,))
        else:
            phi = fad.take_last(total, code.edge_vn) - msgs
        phi = fad.clip(phi, -MSG_CLIP, MSG_CLIP)
        # exclusive box-plus per check node over its edges
        pp = fad.take_last(phi, np.minimum(cn_grid, code.n_edges - 1))
        if not cn_full:
            pp = fad.where(cn_mask, pp, _BP_IDENT)    # (..., m, dc_max)
        dc = code.dc_max
        if dc == 1:
            cols = [np.full_like(fad.val(pp)[..., 0], _BP_IDENT)]
        else:
            # box-plus with the +inf identity is exact pass-through, so the
            # prefix/suffix scans start from the boundary columns directly
            pref = [None] * dc   # pref[s] = box-plus of pp[..., :s+1]
            suf = [None] * dc    # suf[s] = box-plus of pp[..., s:]
            pref[0] = pp[..., 0]
            suf[dc - 1] = pp[..., dc - 1]
            for s in range(1, dc):
                pref[s] = _boxplus(pref[s - 1], pp[..., s])
                suf[dc - 1 - s] = _boxplus(suf[dc - s], pp[..., dc - 1 - s])
            cols = ([suf[1]]
                    + [_boxplus(pref[s - 1], suf[s + 1]) for s in range(1, dc - 1)]
                    + [pref[dc - 2]])
        raw_grid = fad.stack_last(cols)               # (..., m, dc_max)
        flat_shape = np.shape(fad.val(raw_grid))[:-2] + (code.m * dc,)
        raw = fad.take_last(raw_grid.reshape(flat_shape), code.edge_cn_pos)
        if damping is None:
            new = raw
        else:
            mu, xi = damping.weights(j_offset + it)
            new = _damped_blend(raw, msgs, phi, mu, xi)
        msgs = fad.clip(new, -MSG_CLIP, MSG_CLIP)

    return (_tan_cast(vn_totals(msgs), np.float64),
            DecoderState(_tan_cast(msgs, np.float64)))
