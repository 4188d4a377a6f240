"""Statevector simulation and the quantum circuit Born machine.

Qubit 0 is the most significant bit of a basis-state index, matching the text
form of bitstrings. Kernels act in place on a ``(batch, 2**n)`` complex array so
a whole CMA-ES population is simulated in one pass.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .bitspace import TrainingSet, bits_to_codes, codes_to_bits
from .contract import as_rng
from .optim import CmaesState, ask, cmaes_init, tell

log = logging.getLogger(__name__)

SIM_CAP = 24
ONE_QUBIT = ("rx", "ry", "rz")
TWO_QUBIT = ("xx", "cnot", "cz")
PAPER_PARAMETER_COUNT = 256  # reported for 20 qubits, 8 layers, line topology

# at most this many amplitudes are held per simulation chunk
_CHUNK_AMPLITUDES = 1 << 22


class GateError(ValueError):
    pass


@dataclass
class Statevector:
    amplitudes: np.ndarray
    n_qubits: int

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        if n_qubits > SIM_CAP:
            raise GateError(f"{n_qubits} qubits exceeds simulation cap {SIM_CAP}")
        amp = np.zeros(2**n_qubits, dtype=np.complex128)
        amp[0] = 1.0
        return cls(amp, n_qubits)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def rotation_matrices(kind: str, angles: np.ndarray) -> np.ndarray:
    """``(B, 2, 2)`` rotation matrices for a vector of angles."""
    t = np.asarray(angles, dtype=np.float64).reshape(-1) / 2
    c, s = np.cos(t), np.sin(t)
    m = np.zeros((len(t), 2, 2), dtype=np.complex128)
    if kind == "rx":
        m[:, 0, 0] = m[:, 1, 1] = c
        m[:, 0, 1] = m[:, 1, 0] = -1j * s
    elif kind == "ry":
        m[:, 0, 0] = m[:, 1, 1] = c
        m[:, 0, 1], m[:, 1, 0] = -s, s
    elif kind == "rz":
        m[:, 0, 0], m[:, 1, 1] = np.exp(-1j * t), np.exp(1j * t)
    else:
        raise GateError(f"unsupported single-qubit gate {kind!r}")
    return m


def _apply_1q(psi: np.ndarray, n: int, q: int, m: np.ndarray) -> None:
    v = psi.reshape(psi.shape[0], 2**q, 2, 2 ** (n - q - 1))
    if v.shape[-1] > 1:
        v[...] = np.matmul(m[:, None], v)
        return
    a0 = v[:, :, 0, :].copy()
    a1 = v[:, :, 1, :]
    m = m[:, :, :, None, None]
    v[:, :, 0, :] = m[:, 0, 0] * a0 + m[:, 0, 1] * a1
    v[:, :, 1, :] = m[:, 1, 0] * a0 + m[:, 1, 1] * a1


def _apply_xx(psi: np.ndarray, n: int, q: int, angles: np.ndarray) -> None:
    """``exp(-i t/2 X(q) X(q+1))`` on adjacent qubits."""
    v = psi.reshape(psi.shape[0], 2**q, 4, 2 ** (n - q - 2))
    t = np.asarray(angles, dtype=np.float64).reshape(-1, 1, 1, 1) / 2
    flipped = v[:, :, ::-1, :].copy()
    v *= np.cos(t)
    v -= 1j * np.sin(t) * flipped


def _apply_controlled(psi: np.ndarray, n: int, kind: str, q0: int, q1: int) -> None:
    v = psi.reshape((psi.shape[0],) + (2,) * n)
    sel = [slice(None)] * (n + 1)
    sel[q0 + 1] = 1
    if kind == "cz":
        sel[q1 + 1] = 1
        v[tuple(sel)] *= -1
        return
    s0, s1 = list(sel), list(sel)
    s0[q1 + 1], s1[q1 + 1] = 0, 1
    tmp = v[tuple(s0)].copy()
    v[tuple(s0)] = v[tuple(s1)]
    v[tuple(s1)] = tmp


def _apply_batched(psi: np.ndarray, n: int, kind: str, qubits: tuple, angles=None) -> None:
    for q in qubits:
        if not 0 <= q < n:
            raise GateError(f"qubit {q} out of range for {n} qubits")
    if kind in ONE_QUBIT:
        if len(qubits) != 1:
            raise GateError(f"{kind} acts on one qubit")
        _apply_1q(psi, n, qubits[0], rotation_matrices(kind, np.broadcast_to(angles, psi.shape[0])))
    elif kind in TWO_QUBIT:
        if len(qubits) != 2 or qubits[0] == qubits[1]:
            raise GateError(f"{kind} acts on two distinct qubits")
        if kind == "xx":
            a, b = sorted(qubits)
            if b != a + 1:
                raise GateError("xx is only implemented on adjacent qubits")
            _apply_xx(psi, n, a, np.broadcast_to(angles, psi.shape[0]))
        else:
            _apply_controlled(psi, n, kind, *qubits)
    else:
        raise GateError(f"unsupported gate {kind!r}")


def apply_gate(state: Statevector, gate: str, qubits, angle: float | None = None) -> Statevector:
    """Return a new statevector with ``gate`` applied; the input is untouched."""
    qubits = tuple(np.atleast_1d(qubits).tolist())
    if gate in ONE_QUBIT + ("xx",) and angle is None:
        raise GateError(f"{gate} needs an angle")
    psi = state.amplitudes.copy()[None, :]
    _apply_batched(psi, state.n_qubits, gate, qubits, angle)
    return Statevector(psi[0], state.n_qubits)


# ---------------------------------------------------------------------------
# ansatz


@dataclass(frozen=True)
class CircuitAnsatz:
    n_qubits: int
    n_layers: int
    topology: str
    plan: tuple  # (kind, qubits, parameter index or None)

    @property
    def n_params(self) -> int:
        return sum(1 for _, _, p in self.plan if p is not None)

    def descriptor(self) -> str:
        return f"n_qubits={self.n_qubits} n_layers={self.n_layers} topology={self.topology}"


def line_ansatz(n_qubits: int, n_layers: int, entangle: bool = True,
                topology: str = "line") -> CircuitAnsatz:
    """Alternating blocks on a 1D chain.

    Odd blocks apply Rx then Rz to every qubit; even blocks apply a
    parameterized XX to every nearest-neighbour pair. With ``entangle=False``
    every block is a rotation block.
    """
    if topology != "line":
        raise NotImplementedError(f"topology {topology!r} is not implemented")
    if n_qubits < 1 or n_layers < 1:
        raise ValueError("need at least one qubit and one layer")
    plan, k = [], 0
    for layer in range(n_layers):
        if layer % 2 == 0 or not entangle or n_qubits == 1:
            for q in range(n_qubits):
                plan += [("rx", (q,), k), ("rz", (q,), k + 1)]
                k += 2
        else:
            for q in range(n_qubits - 1):
                plan.append(("xx", (q, q + 1), k))
                k += 1
    return CircuitAnsatz(n_qubits, n_layers, topology, tuple(plan))


def simulate(ansatz: CircuitAnsatz, thetas: np.ndarray) -> np.ndarray:
    """Final amplitudes ``(B, 2**n)`` for a ``(B, P)`` array of parameter vectors."""
    n = ansatz.n_qubits
    if n > SIM_CAP:
        raise GateError(f"{n} qubits exceeds simulation cap {SIM_CAP}")
    thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
    if thetas.shape[1] != ansatz.n_params:
        raise ValueError(f"expected {ansatz.n_params} parameters, got {thetas.shape[1]}")
    psi = np.zeros((thetas.shape[0], 2**n), dtype=np.complex128)
    psi[:, 0] = 1.0
    plan, i = ansatz.plan, 0
    while i < len(plan):
        kind, qubits, p = plan[i]
        if kind in ONE_QUBIT:
            # fuse consecutive rotations on the same qubit into one 2x2 product
            m = rotation_matrices(kind, thetas[:, p])
            while i + 1 < len(plan) and plan[i + 1][0] in ONE_QUBIT and plan[i + 1][1] == qubits:
                i += 1
                m = rotation_matrices(plan[i][0], thetas[:, plan[i][2]]) @ m
            _apply_1q(psi, n, qubits[0], m)
        else:
            angles = None if p is None else thetas[:, p]
            _apply_batched(psi, n, kind, qubits, angles)
        i += 1
    return psi


def born_table(ansatz: CircuitAnsatz, thetas: np.ndarray) -> np.ndarray:
    """Born probabilities ``(B, 2**n)``, simulated in memory-bounded chunks."""
    thetas = np.atleast_2d(thetas)
    chunk = max(1, _CHUNK_AMPLITUDES >> ansatz.n_qubits)
    out = [np.abs(simulate(ansatz, thetas[i:i + chunk])) ** 2 for i in range(0, len(thetas), chunk)]
    return np.concatenate(out)


def kl_from_probs(probs: np.ndarray, train: TrainingSet, delta: float = 1e-8) -> np.ndarray:
    """Clamped KL(P_train || P_model) for one or more probability tables."""
    probs = np.atleast_2d(probs)
    w = train.weights
    q = np.maximum(delta, probs[:, train.codes])
    return np.sum(w * (np.log(w) - np.log(q)), axis=1)


# ---------------------------------------------------------------------------
# QCBM


class QcbmModel:
    tag = "qcbm"
    exact_log_prob = True

    def __init__(self, n_var: int, n_layers: int = 8, seed: int | None = 0, sigma0: float = 0.1,
                 popsize: int | None = None, delta: float = 1e-8, entangle: bool = True,
                 theta: np.ndarray | None = None):
        self.n_var = n_var
        self.ansatz = line_ansatz(n_var, n_layers, entangle=entangle)
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        if theta is None:
            theta = self.rng.uniform(-np.pi / 2, np.pi / 2, self.ansatz.n_params)
        self.theta = np.array(theta, dtype=np.float64)
        if self.theta.shape != (self.ansatz.n_params,):
            raise ValueError(f"theta must have {self.ansatz.n_params} entries")
        self.sigma0 = sigma0
        self.popsize = popsize
        self.delta = delta
        self.cmaes: CmaesState | None = None
        self._probs: np.ndarray | None = None
        if n_var >= 16:
            log.info("QCBM n_qubits=%d n_layers=%d: %d parameters (reference count %d)",
                     n_var, n_layers, self.ansatz.n_params, PAPER_PARAMETER_COUNT)

    # -- exact quantities ---------------------------------------------------

    def born_probabilities(self) -> np.ndarray:
        if self._probs is None:
            self._probs = born_table(self.ansatz, self.theta)[0]
        return self._probs

    def log_prob(self, bits: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.born_probabilities()[bits_to_codes(bits)])

    def kl_loss(self, train: TrainingSet, delta: float | None = None) -> float:
        return float(kl_from_probs(self.born_probabilities(), train,
                                   self.delta if delta is None else delta)[0])

    # -- contract -------------------------------------------------------------

    def set_theta(self, theta: np.ndarray) -> None:
        self.theta = np.array(theta, dtype=np.float64)
        self._probs = None

    def sample(self, n: int, rng) -> np.ndarray:
        p = self.born_probabilities()
        codes = as_rng(rng).choice(len(p), size=n, p=p / p.sum())
        return codes_to_bits(codes, self.n_var)

    def train_step(self, train: TrainingSet) -> float:
        """One CMA-ES generation; the model keeps the best parameters seen so far."""
        if train.n_var != self.n_var:
            raise ValueError("training set and model disagree on n_var")
        if self.cmaes is None:
            self.cmaes = cmaes_init(self.theta, self.sigma0, self.popsize)
        xs = ask(self.cmaes, self.rng)
        fs = kl_from_probs(born_table(self.ansatz, xs), train, self.delta)
        prev = self.cmaes.best_f
        tell(self.cmaes, xs, fs)
        if self.cmaes.best_f < prev:
            self.set_theta(self.cmaes.best_x)
        return self.cmaes.best_f

    def parameter_count(self) -> int:
        return self.ansatz.n_params

    def hyperparameters(self) -> dict:
        return {
            "Number of layers": self.ansatz.n_layers,
            "Circuit topology": "Line topology",
            "Optimizer": f"CMA-ES optimizer with sigma0 = {self.sigma0}",
            "Initialization": "Random initialization between -pi/2 and pi/2",
            "Total number of parameters": self.parameter_count(),
        }

    # -- checkpoint -----------------------------------------------------------

    def save(self, path: str | Path) -> None:
        lines = ["# genrace-qcbm v1", self.ansatz.descriptor()]
        lines += [f"{t:.17g}" for t in self.theta]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path, **kw) -> "QcbmModel":
        header, desc, *values = Path(path).read_text().splitlines()
        if header != "# genrace-qcbm v1":
            raise ValueError(f"{path}: not a QCBM checkpoint")
        meta = dict(item.split("=") for item in desc.split())
        return cls(int(meta["n_qubits"]), int(meta["n_layers"]),
                   theta=np.array([float(v) for v in values]), **kw)


def train_qcbm(model: QcbmModel, train: TrainingSet, n_epochs: int, eval_interval: int = 100,
               eval_hook: Callable[[int, QcbmModel], None] | None = None) -> tuple[QcbmModel, list[float]]:
    """Run ``n_epochs`` CMA-ES generations, calling ``eval_hook(epoch, model)``
    at epoch 0 and every ``eval_interval`` generations."""
    trace = []
    if eval_hook:
        eval_hook(0, model)
    for epoch in range(1, n_epochs + 1):
        loss = model.train_step(train)
        if not math.isfinite(loss):
            raise FloatingPointError(f"QCBM loss became {loss} at epoch {epoch}; trace={trace[-5:]}")
        trace.append(loss)
        if eval_hook and epoch % eval_interval == 0:
            eval_hook(epoch, model)
    return model, trace
