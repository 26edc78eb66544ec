"""Dense computation substrate: parameters, kernels, optimizer, gradient checks.

Reverse-mode differentiation is delegated to torch autograd on CPU float64
tensors; everything else (Glorot init, masked softmax, Adam with L2 decay,
the finite-difference oracle, the checkpoint format) is implemented here
against the contracts the encoder and objective rely on.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import torch

from .errors import ContractError, DeterminismError, ShapeError

DTYPE = torch.float64

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class Parameter:
    """A named learnable matrix with an autograd-tracked value."""

    def __init__(self, name: str, value: torch.Tensor):
        if value.dim() != 2:
            raise ShapeError(f"parameter {name!r} must be 2-D, got shape {tuple(value.shape)}")
        self.name = name
        self.value = value.to(DTYPE).requires_grad_(True)

    @property
    def grad(self) -> torch.Tensor:
        g = self.value.grad
        return torch.zeros_like(self.value) if g is None else g

    def zero_grad(self) -> None:
        self.value.grad = None

    @property
    def shape(self) -> tuple[int, int]:
        return (self.value.shape[0], self.value.shape[1])


def glorot(rows: int, cols: int, gen: torch.Generator) -> torch.Tensor:
    """Glorot-uniform sample of shape (rows, cols)."""
    limit = (6.0 / (rows + cols)) ** 0.5
    return (torch.rand((rows, cols), generator=gen, dtype=DTYPE) * 2 - 1) * limit


class ParameterStore:
    """Ordered collection of named parameters; names are stable for checkpointing."""

    def __init__(self, seed: int = 0):
        self._params: dict[str, Parameter] = {}
        self.gen = torch.Generator().manual_seed(seed)

    def add(self, name: str, rows: int, cols: int, init: str = "glorot") -> Parameter:
        if name in self._params:
            raise ContractError(f"duplicate parameter name {name!r}")
        if init == "glorot":
            value = glorot(rows, cols, self.gen)
        elif init == "zeros":
            value = torch.zeros((rows, cols), dtype=DTYPE)
        else:
            raise ContractError(f"unknown init {init!r}")
        p = Parameter(name, value)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def parameters(self) -> list[Parameter]:
        return list(self._params.values())

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.zero_grad()


def jitter_parameters(store: "ParameterStore", scale: float = 0.05, seed: int = 0) -> None:
    """Offset every parameter by uniform noise.

    Moves zero-initialized biases and gates off piecewise-linear kinks, so
    finite-difference gradient checks run at a generic point.
    """
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in store.parameters():
            p.value += (torch.rand(p.value.shape, generator=gen, dtype=DTYPE) * 2 - 1) * scale


def linear(W: torch.Tensor, x: torch.Tensor, b: torch.Tensor | None = None) -> torch.Tensor:
    """W @ x (+ b), with b broadcast over the columns of the product."""
    if W.shape[1] != x.shape[0]:
        raise ShapeError(f"linear: inner dims disagree, W {tuple(W.shape)} vs x {tuple(x.shape)}")
    out = W @ x
    if b is not None:
        if b.shape[0] != out.shape[0]:
            raise ShapeError(f"linear: bias {tuple(b.shape)} vs output {tuple(out.shape)}")
        out = out + b
    return out


def softmax(v: torch.Tensor, mask: torch.Tensor | None = None, dim: int = -1) -> torch.Tensor:
    """Max-subtracted softmax; masked entries get weight exactly 0.

    Raises ContractError when a row has no unmasked entry.
    """
    if mask is not None:
        if mask.shape != v.shape:
            raise ShapeError(f"softmax: mask {tuple(mask.shape)} vs input {tuple(v.shape)}")
        if not bool(mask.any(dim=dim).all()):
            raise ContractError("softmax: empty support (all entries masked)")
        v = v.masked_fill(~mask, float("-inf"))
    elif v.numel() == 0:
        raise ContractError("softmax: empty support")
    shifted = v - v.max(dim=dim, keepdim=True).values
    expd = torch.exp(shifted)
    if mask is not None:
        expd = expd * mask.to(expd.dtype)
    return expd / expd.sum(dim=dim, keepdim=True)


def segment_softmax(scores: torch.Tensor, index: torch.Tensor, n_segments: int) -> torch.Tensor:
    """Softmax over entries sharing an index (leading dim groups), max-subtracted.

    Entries of segments that do not occur keep no weight; every occurring
    segment's weights sum to 1.
    """
    shape = (n_segments,) + tuple(scores.shape[1:])
    with torch.no_grad():
        # Shift constant per segment; mathematically cancels, so no grad needed.
        expanded = index.view(-1, *([1] * (scores.dim() - 1))).expand_as(scores)
        seg_max = torch.full(shape, float("-inf"), dtype=scores.dtype)
        seg_max = seg_max.scatter_reduce(0, expanded, scores.detach(), reduce="amax")
        seg_max = torch.where(torch.isinf(seg_max), torch.zeros_like(seg_max), seg_max)
    expd = torch.exp(scores - seg_max.index_select(0, index))
    denom = torch.zeros(shape, dtype=scores.dtype).index_add(0, index, expd)
    return expd / denom.index_select(0, index)


def relu(x: torch.Tensor) -> torch.Tensor:
    return torch.relu(x)


def leaky_relu(x: torch.Tensor, slope: float = 0.2) -> torch.Tensor:
    return torch.nn.functional.leaky_relu(x, negative_slope=slope)


def tanh(x: torch.Tensor) -> torch.Tensor:
    return torch.tanh(x)


def sigmoid(x: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(x)


def backward(loss: torch.Tensor) -> None:
    """Accumulate d(loss)/d(param) into every reachable Parameter's grad."""
    if loss.numel() != 1:
        raise ShapeError(f"backward expects a scalar loss, got shape {tuple(loss.shape)}")
    loss.backward(retain_graph=False)


@dataclass
class OptimizerState:
    """Adam accumulators; one slot per parameter, keyed by name."""

    lr: float = 1e-3
    weight_decay: float = 5e-4
    step_count: int = 0
    m: dict[str, torch.Tensor] = field(default_factory=dict)
    v: dict[str, torch.Tensor] = field(default_factory=dict)


def adam_step(state: OptimizerState, params: list[Parameter]) -> None:
    """One Adam update with bias correction and L2 decay folded into the gradient.

    Gradients are zeroed afterwards.
    """
    state.step_count += 1
    t = state.step_count
    with torch.no_grad():
        for p in params:
            g = p.grad + state.weight_decay * p.value
            m = state.m.setdefault(p.name, torch.zeros_like(p.value))
            v = state.v.setdefault(p.name, torch.zeros_like(p.value))
            m.mul_(ADAM_BETA1).add_(g, alpha=1 - ADAM_BETA1)
            v.mul_(ADAM_BETA2).addcmul_(g, g, value=1 - ADAM_BETA2)
            m_hat = m / (1 - ADAM_BETA1**t)
            v_hat = v / (1 - ADAM_BETA2**t)
            p.value -= state.lr * m_hat / (torch.sqrt(v_hat) + ADAM_EPS)
    for p in params:
        p.zero_grad()


@dataclass
class GradCheckReport:
    per_param: dict[str, float]
    max_rel_error: float
    tolerance: float
    passed: bool

    def lines(self) -> list[str]:
        out = [f"{name}: max rel err {err:.3e}" for name, err in self.per_param.items()]
        verdict = "PASS" if self.passed else "FAIL"
        out.append(f"overall: {self.max_rel_error:.3e} vs tolerance {self.tolerance:.1e} [{verdict}]")
        return out


def finite_diff_check(
    loss_fn,
    params: list[Parameter],
    h: float = 1e-6,
    tolerance: float = 1e-3,
    max_coords: int = 50,
    seed: int = 0,
) -> GradCheckReport:
    """Compare recorded gradients against central finite differences.

    ``loss_fn`` must be deterministic (dropout disabled); two baseline
    evaluations are compared to detect violations. At most ``max_coords``
    random coordinates are probed per parameter.
    """
    base_a = float(loss_fn().detach())
    base_b = float(loss_fn().detach())
    if base_a != base_b:
        raise DeterminismError(f"loss is not deterministic: {base_a!r} != {base_b!r}")

    for p in params:
        p.zero_grad()
    loss = loss_fn()
    backward(loss)

    gen = torch.Generator().manual_seed(seed)
    # The central difference carries absolute roundoff noise of order
    # eps * |loss| / h, so near-zero gradients cannot be compared in purely
    # relative terms; floor the denominator at the step-size scale instead.
    denom_floor = h * max(1.0, abs(base_a))
    per_param: dict[str, float] = {}
    for p in params:
        grad = p.grad.detach().clone()
        flat = p.value.detach().view(-1)
        n = flat.numel()
        coords = torch.randperm(n, generator=gen)[: min(max_coords, n)]
        worst = 0.0
        for idx in coords.tolist():
            orig = flat[idx].item()
            with torch.no_grad():
                flat[idx] = orig + h
                f_plus = float(loss_fn())
                flat[idx] = orig - h
                f_minus = float(loss_fn())
                flat[idx] = orig
            fd = (f_plus - f_minus) / (2 * h)
            g = grad.view(-1)[idx].item()
            err = abs(fd - g) / max(abs(fd), abs(g), denom_floor)
            worst = max(worst, err)
        per_param[p.name] = worst
    for p in params:
        p.zero_grad()
    overall = max(per_param.values()) if per_param else 0.0
    return GradCheckReport(
        per_param=per_param,
        max_rel_error=overall,
        tolerance=tolerance,
        passed=overall < tolerance,
    )


_CKPT_MAGIC = b"HTHGN1\x00\x00"


def save_checkpoint(store: ParameterStore, path) -> None:
    """Length-prefixed named float64 matrices, little-endian, manifest up front."""
    params = store.parameters()
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(params)))
        for p in params:
            name = p.name.encode("utf-8")
            fh.write(struct.pack("<H", len(name)))
            fh.write(name)
            fh.write(struct.pack("<II", p.shape[0], p.shape[1]))
        for p in params:
            data = p.value.detach().to(DTYPE).contiguous().numpy().astype("<f8").tobytes()
            fh.write(struct.pack("<Q", len(data)))
            fh.write(data)


def load_checkpoint(path, store: ParameterStore) -> None:
    """Restore values into an existing store; names and shapes must match."""
    import numpy as np

    with open(path, "rb") as fh:
        if fh.read(len(_CKPT_MAGIC)) != _CKPT_MAGIC:
            raise ContractError(f"{path}: not a checkpoint file")
        (count,) = struct.unpack("<I", fh.read(4))
        manifest = []
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            rows, cols = struct.unpack("<II", fh.read(8))
            manifest.append((name, rows, cols))
        for name, rows, cols in manifest:
            (n_bytes,) = struct.unpack("<Q", fh.read(8))
            data = np.frombuffer(fh.read(n_bytes), dtype="<f8").reshape(rows, cols)
            if name not in store:
                raise ContractError(f"checkpoint parameter {name!r} missing from store")
            p = store[name]
            if p.shape != (rows, cols):
                raise ShapeError(
                    f"checkpoint {name!r} has shape ({rows},{cols}), store has {p.shape}"
                )
            with torch.no_grad():
                p.value.copy_(torch.from_numpy(data.copy()))
