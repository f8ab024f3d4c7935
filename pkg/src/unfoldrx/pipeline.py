"""Iterative receiver: interleaved SISO detection and decoding stages.

A pipeline runs I detection stages; after each one the LDPC decoder performs
a few message-passing iterations and hands its (damped, state-forwarded)
output back to the detector.  Every scalar that a classical receiver fixes by
convention (LLR exchange weights, the equalizer blend, decoder damping and
message forwarding) is a tunable hyperparameter here, so the same code runs
the classical schedule and the trained, unfolded one.

Exchange rules between stages (all per stage i):

* detector prior    ``L^a_det = alpha_i L_dec - beta_i L^a_dec``
* decoder input     ``L^a_dec = delta_i L^e_det - epsilon_i L^a_det``
* decoder state     scaled by ``gamma_i`` before stage i+1

Stage 0 has no decoder feedback; its detector runs with structurally zero
priors, which is exactly soft-output LMMSE detection.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import detect, fad, ldpc, numkit
from .constellation import Constellation
from .errors import ConfigurationError

DETECTORS = ("mmse-pic", "loco-pic")


# ---------------------------------------------------------------------------
# hyperparameters

@dataclass
class HyperParamSet:
    """All tunable receiver scalars for a fixed pipeline structure.

    ``n_inner`` holds the decoder iterations per stage; ``mu``/``xi`` are
    indexed by global message-passing iteration (length ``sum(n_inner)``).
    Entries ``alpha[0]``/``beta[0]``/``epsilon[0]`` are structurally unused
    because stage 0 has no feedback, but are kept so the parameter vector
    layout is stage-uniform.
    """
    detector: str
    n_stages: int
    n_inner: Tuple[int, ...]
    alpha: object
    beta: object
    delta: object
    epsilon: object
    zeta: object          # only consumed by the loco-pic detector
    gamma: object         # (n_stages - 1,)
    mu: object            # (sum(n_inner),)
    xi: object
    trained_at: Optional[str] = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.detector not in DETECTORS:
            raise ConfigurationError(f"unknown detector {self.detector!r}")
        if self.n_stages < 1 or len(self.n_inner) != self.n_stages:
            raise ConfigurationError("stage structure inconsistent")
        n_mp = sum(self.n_inner)
        for name, arr, want in (
                ("alpha", self.alpha, self.n_stages),
                ("beta", self.beta, self.n_stages),
                ("delta", self.delta, self.n_stages),
                ("epsilon", self.epsilon, self.n_stages),
                ("zeta", self.zeta, self.n_stages),
                ("gamma", self.gamma, self.n_stages - 1),
                ("mu", self.mu, n_mp), ("xi", self.xi, n_mp)):
            if len(np.atleast_1d(fad.val(arr))) != want:
                raise ConfigurationError(
                    f"{name} must have length {want}")

    @property
    def n_mp(self) -> int:
        return sum(self.n_inner)

    @property
    def has_zeta(self) -> bool:
        return self.detector == "loco-pic"

    # -- flat parameter vector (training) -----------------------------------

    def _vector_slices(self):
        i, n = self.n_stages, self.n_mp
        names = ["alpha", "beta", "delta", "epsilon"]
        sizes = [i, i, i, i]
        if self.has_zeta:
            names.append("zeta")
            sizes.append(i)
        names += ["gamma", "mu", "xi"]
        sizes += [i - 1, n, n]
        offs = np.cumsum([0] + sizes)
        return [(nm, slice(int(a), int(b)))
                for nm, a, b in zip(names, offs[:-1], offs[1:])]

    @property
    def n_params(self) -> int:
        return self._vector_slices()[-1][1].stop

    def to_vector(self) -> np.ndarray:
        parts = [np.atleast_1d(np.asarray(fad.val(getattr(self, nm)), dtype=float))
                 for nm, _ in self._vector_slices()]
        return np.concatenate(parts)

    def with_vector(self, vec) -> "HyperParamSet":
        """Copy of this set with all tunables taken from a flat vector,
        which may be a :class:`fad.Dual` to track gradients."""
        if np.shape(fad.val(vec))[0] != self.n_params:
            raise ConfigurationError(
                f"parameter vector must have length {self.n_params}")
        kw = dict(detector=self.detector, n_stages=self.n_stages,
                  n_inner=self.n_inner, trained_at=self.trained_at,
                  seed=self.seed)
        fields = dict((nm, vec[sl]) for nm, sl in self._vector_slices())
        if not self.has_zeta:
            fields["zeta"] = np.atleast_1d(fad.val(self.zeta)).copy()
        return HyperParamSet(**kw, **fields)

    # -- JSON ---------------------------------------------------------------

    def to_json(self) -> str:
        d = {"detector": self.detector, "I": self.n_stages,
             "N_i": list(self.n_inner)}
        for nm in ("alpha", "beta", "delta", "epsilon", "zeta", "gamma",
                   "mu", "xi"):
            d[nm] = np.atleast_1d(np.asarray(fad.val(getattr(self, nm)),
                                             dtype=float)).tolist()
        d["trained_at"] = self.trained_at
        d["seed"] = self.seed
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "HyperParamSet":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"bad hyperparameter JSON: {e}") from e
        try:
            return cls(detector=d["detector"], n_stages=int(d["I"]),
                       n_inner=tuple(int(x) for x in d["N_i"]),
                       alpha=np.array(d["alpha"], dtype=float),
                       beta=np.array(d["beta"], dtype=float),
                       delta=np.array(d["delta"], dtype=float),
                       epsilon=np.array(d["epsilon"], dtype=float),
                       zeta=np.array(d["zeta"], dtype=float),
                       gamma=np.array(d["gamma"], dtype=float),
                       mu=np.array(d["mu"], dtype=float),
                       xi=np.array(d["xi"], dtype=float),
                       trained_at=d.get("trained_at"),
                       seed=d.get("seed"))
        except KeyError as e:
            raise ConfigurationError(f"hyperparameter JSON missing {e}") from e


def classical_init(detector: str, n_stages: int,
                   n_inner: Sequence[int]) -> HyperParamSet:
    """The classical (untrained) schedule: pass LLRs through unweighted,
    no subtraction, no damping, full state forwarding; the loco-pic uses a
    pure LMMSE first stage and a half blend afterwards."""
    i = int(n_stages)
    n_inner = tuple(int(x) for x in n_inner)
    n_mp = sum(n_inner)
    zeta = np.ones(i)
    if i > 1:
        zeta[1:] = 0.5
    return HyperParamSet(
        detector=detector, n_stages=i, n_inner=n_inner,
        alpha=np.ones(i), beta=np.zeros(i), delta=np.ones(i),
        epsilon=np.zeros(i), zeta=zeta, gamma=np.ones(max(i - 1, 0)),
        mu=np.zeros(n_mp), xi=np.zeros(n_mp))


# ---------------------------------------------------------------------------
# LLR layout: detector grids <-> per-user codewords

def det_to_code(llr, cfg) -> object:
    """(F, W, T, U, Q) detector LLRs to (F, U, n) codeword LLRs."""
    f, w, t, u, q = np.shape(fad.val(llr))
    x = fad.transpose(llr, (0, 3, 2, 1, 4))
    return fad.reshape(x, (f, u, t * w * q))


def code_to_det(llr, cfg) -> object:
    """(F, U, n) codeword LLRs back to the (F, W, T, U, Q) detector grid."""
    f, u, n = np.shape(fad.val(llr))
    w = cfg.subcarriers
    q = cfg.constellation.bits_per_symbol
    t = n // (w * q)
    x = fad.reshape(llr, (f, u, t, w, q))
    return fad.transpose(x, (0, 3, 2, 1, 4))


# ---------------------------------------------------------------------------
# receiver

@dataclass
class RxResult:
    llr: object                 # (F, U, n) final decoder output
    bits: np.ndarray            # (F, U, n) hard decisions
    data_bits: np.ndarray       # (F, U, k)
    stage_llr_e: List[object] = field(default_factory=list)


def _is_const(x, value: float) -> bool:
    v = fad.val(x)
    return not fad.is_dual(x) and np.ndim(v) == 0 and float(v) == value


def _weighted_diff(a_scale, a, b_scale, b):
    """``a_scale*a - b_scale*b`` skipping structural identity/zero factors."""
    n = int(np.prod(np.shape(fad.val(a)), dtype=np.int64))
    if _is_const(a_scale, 1.0):
        out = a
    else:
        out = a_scale * a
        numkit.add_mults(n)
    if b is not None and not _is_const(b_scale, 0.0):
        out = out - b_scale * b
        numkit.add_mults(n)
    return out


def run_receiver(cfg, code: ldpc.LdpcCode, h: np.ndarray, y: np.ndarray,
                 params: HyperParamSet,
                 keep_stage_outputs: bool = False) -> RxResult:
    """Run the full iterative receiver on whitened observations.

    ``h`` is (F, W, B, U) and ``y`` is (F, W, T, B), both already divided by
    the standard deviation of the effective noise, so each RE sees unit-power
    white noise.  Returns per-user decoding results; LLRs stay differentiable
    when ``params`` holds dual numbers.
    """
    cons = cfg.constellation
    f, w = h.shape[:2]
    t = y.shape[-2]
    if t * w * cons.bits_per_symbol != code.n:
        raise ConfigurationError(
            f"grid carries {t * w * cons.bits_per_symbol} coded bits per user "
            f"but the code length is {code.n}")
    prep = detect.prepare(h, y)
    filters = detect.loco_filters(prep) if params.detector == "loco-pic" else None

    dec_state = None
    llr_dec = None            # decoder output, (F, U, n)
    llr_a_dec = None          # decoder input of the previous stage
    mp_offset = 0
    damping = ldpc.DampingParams(mu=params.mu, xi=params.xi)
    classical_mp = (not fad.is_dual(params.mu) and not fad.is_dual(params.xi)
                    and not np.any(fad.val(params.mu))
                    and not np.any(fad.val(params.xi)))
    stage_outputs: List[object] = []

    for i in range(params.n_stages):
        if i == 0:
            llr_a_det = None
            det_prior = None
        else:
            llr_a_det = _weighted_diff(params.alpha[i], llr_dec,
                                       params.beta[i], llr_a_dec)
            det_prior = code_to_det(llr_a_det, cfg)
        if params.detector == "loco-pic":
            zeta_i = params.zeta[i] if fad.is_dual(params.zeta) \
                else float(fad.val(params.zeta)[i])
            out = detect.loco_pic_stage(filters, cons, det_prior, zeta=zeta_i)
        else:
            out = detect.mmse_pic_stage(prep, cons, det_prior)
        if keep_stage_outputs:
            stage_outputs.append(out.llr_e)
        llr_e = det_to_code(out.llr_e, cfg)
        llr_a_dec = _weighted_diff(params.delta[i], llr_e,
                                   params.epsilon[i], llr_a_det)
        if i > 0:
            g_i = params.gamma[i - 1]
            dec_state = ldpc.scale_state(dec_state, g_i)
            if not _is_const(g_i, 1.0):
                numkit.add_mults(f * cfg.users * code.n_edges)
        llr_dec, dec_state = ldpc.decode_siso(
            code, llr_a_dec, dec_state, params.n_inner[i],
            None if classical_mp else damping, j_offset=mp_offset)
        if not classical_mp:
            numkit.add_mults(3 * f * cfg.users * code.n_edges
                             * params.n_inner[i])
        mp_offset += params.n_inner[i]

    bits = ldpc.hard_decide(llr_dec)
    return RxResult(llr=llr_dec, bits=bits,
                    data_bits=bits[..., code.data_positions],
                    stage_llr_e=stage_outputs)
