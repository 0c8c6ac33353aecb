"""Differentiable building blocks, optimizer and gradient checking.

Autodiff is delegated to torch; this module pins the conventions the rest of
the package relies on (causal padding, initialization, Adam, weighted BCE) and
provides a finite-difference oracle for checking gradients.
"""
from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from .errors import NumericError, ShapeError, StateError

DEFAULT_DTYPE = torch.float64
LEAKY_SLOPE = 0.01

DTYPES = {"float64": torch.float64, "float32": torch.float32}


def resolve_dtype(name: str | torch.dtype) -> torch.dtype:
    if isinstance(name, torch.dtype):
        return name
    try:
        return DTYPES[name]
    except KeyError:
        raise ShapeError(f"unsupported dtype {name!r}") from None


def leaky_relu(x: Tensor) -> Tensor:
    return F.leaky_relu(x, LEAKY_SLOPE)


def conv1d_causal(
    x: Tensor,
    weight: Tensor,
    bias: Tensor | None = None,
    dilation: int = 1,
    stride: int = 1,
) -> Tensor:
    """Causal 1-D convolution over the last axis.

    ``x`` is ``(batch, c_in, length)`` or ``(c_in, length)``; ``weight`` is
    ``(c_out, c_in, kernel)``. The input is left-padded by
    ``(kernel - 1) * dilation`` so output ``t`` sees inputs ``<= t`` only. With
    ``stride > 1`` the result equals the stride-1 output sampled at
    ``0, stride, 2*stride, ...``.
    """
    squeeze = x.dim() == 2
    if squeeze:
        x = x.unsqueeze(0)
    if x.dim() != 3 or weight.dim() != 3:
        raise ShapeError(f"expected 3-D input and weight, got {tuple(x.shape)} and {tuple(weight.shape)}")
    if x.shape[1] != weight.shape[1]:
        raise ShapeError(f"input has {x.shape[1]} channels, weight expects {weight.shape[1]}")
    kernel = weight.shape[2]
    if kernel < 1 or dilation < 1 or stride < 1:
        raise ShapeError("kernel, dilation and stride must be positive")
    pad = (kernel - 1) * dilation
    out = F.conv1d(F.pad(x, (pad, 0)), weight, bias, stride=stride, dilation=dilation)
    return out.squeeze(0) if squeeze else out


def kaiming_uniform_(t: Tensor, fan_in: int, generator: torch.Generator) -> Tensor:
    bound = math.sqrt(6.0 / ((1.0 + LEAKY_SLOPE**2) * fan_in))
    with torch.no_grad():
        t.uniform_(-bound, bound, generator=generator)
    return t


class CausalConv1d(nn.Module):
    def __init__(
        self,
        c_in: int,
        c_out: int,
        kernel_size: int,
        *,
        dilation: int = 1,
        stride: int = 1,
        bias: bool = True,
        generator: torch.Generator,
        dtype: torch.dtype = DEFAULT_DTYPE,
    ):
        super().__init__()
        self.dilation = int(dilation)
        self.stride = int(stride)
        self.kernel_size = int(kernel_size)
        self.weight = nn.Parameter(torch.empty(c_out, c_in, kernel_size, dtype=dtype))
        kaiming_uniform_(self.weight, c_in * kernel_size, generator)
        if bias:
            self.bias = nn.Parameter(torch.zeros(c_out, dtype=dtype))
        else:
            self.register_parameter("bias", None)

    def forward(self, x: Tensor) -> Tensor:
        return conv1d_causal(x, self.weight, self.bias, self.dilation, self.stride)


class Linear(nn.Module):
    def __init__(
        self,
        n_in: int,
        n_out: int,
        *,
        bias: bool = True,
        generator: torch.Generator,
        dtype: torch.dtype = DEFAULT_DTYPE,
    ):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(n_out, n_in, dtype=dtype))
        kaiming_uniform_(self.weight, n_in, generator)
        if bias:
            self.bias = nn.Parameter(torch.zeros(n_out, dtype=dtype))
        else:
            self.register_parameter("bias", None)

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every leaf that contributed to ``loss``.

    Raises StateError if the same forward graph is back-propagated twice.
    """
    if loss.numel() != 1:
        raise ShapeError("backward expects a scalar loss")
    if getattr(loss, "_chanfuse_consumed", False):
        raise StateError("backward called twice on the same forward pass; re-run forward first")
    loss.backward()
    loss._chanfuse_consumed = True


def class_weights(labels) -> tuple[float, float]:
    """Inverse class-frequency weights ``(w_neg, w_pos)`` normalized to mean 1."""
    labels = torch.as_tensor(labels)
    n = labels.numel()
    n_pos = int(labels.sum().item())
    n_neg = n - n_pos
    if n == 0:
        return 1.0, 1.0
    w_pos = n / (2.0 * n_pos) if n_pos else 0.0
    w_neg = n / (2.0 * n_neg) if n_neg else 0.0
    if not n_pos:
        w_neg = 1.0
    if not n_neg:
        w_pos = 1.0
    return w_neg, w_pos


def weighted_bce_with_logits(logits: Tensor, targets: Tensor, weights: tuple[float, float]) -> Tensor:
    targets = targets.to(logits.dtype)
    w = torch.where(targets > 0.5, weights[1], weights[0]).to(logits.dtype)
    return (w * F.binary_cross_entropy_with_logits(logits, targets, reduction="none")).mean()


class Adam:
    """Adam with bias correction; refuses to step on non-finite gradients.

    ``params`` is an iterable of ``(name, tensor)``; ``lr_scales`` maps a name
    prefix to a multiplier on the base rate. Moments are keyed by name so they
    can be serialized and restored.
    """

    def __init__(
        self,
        params: Iterable[tuple[str, Tensor]],
        lr: float,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        lr_scales: dict[str, float] | None = None,
    ):
        self.params = dict(params)
        self.lr = float(lr)
        self.beta1, self.beta2 = betas
        self.eps = float(eps)
        self.lr_scales = dict(lr_scales or {})
        self.step_count = 0
        self.steps = {n: 0 for n in self.params}
        self.exp_avg = {n: torch.zeros_like(p) for n, p in self.params.items()}
        self.exp_avg_sq = {n: torch.zeros_like(p) for n, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def _scale(self, name: str) -> float:
        for prefix, scale in self.lr_scales.items():
            if name.startswith(prefix):
                return scale
        return 1.0

    @torch.no_grad()
    def step(self) -> None:
        for name, p in self.params.items():
            if p.grad is not None and not torch.isfinite(p.grad).all():
                raise NumericError(f"non-finite gradient in parameter {name!r}")
        self.step_count += 1
        for name, p in self.params.items():
            if p.grad is None:
                continue
            # per-parameter step counts: key maps of subjects absent from a batch get no update
            self.steps[name] += 1
            t = self.steps[name]
            bc1 = 1.0 - self.beta1**t
            bc2 = 1.0 - self.beta2**t
            g = p.grad
            m = self.exp_avg[name]
            v = self.exp_avg_sq[name]
            m.mul_(self.beta1).add_(g, alpha=1.0 - self.beta1)
            v.mul_(self.beta2).addcmul_(g, g, value=1.0 - self.beta2)
            denom = (v / bc2).sqrt_().add_(self.eps)
            p.addcdiv_(m / bc1, denom, value=-self.lr * self._scale(name))

    def state_dict(self) -> dict[str, Tensor]:
        state = {"step": torch.tensor([self.step_count], dtype=torch.int64)}
        for n in self.params:
            state[f"t/{n}"] = torch.tensor([self.steps[n]], dtype=torch.int64)
            state[f"m/{n}"] = self.exp_avg[n]
            state[f"v/{n}"] = self.exp_avg_sq[n]
        return state

    def load_state_dict(self, state: dict[str, Tensor]) -> None:
        self.step_count = int(state["step"][0])
        for n in self.params:
            if f"m/{n}" in state:
                self.steps[n] = int(state[f"t/{n}"][0])
                self.exp_avg[n] = state[f"m/{n}"].clone().to(self.params[n].dtype)
                self.exp_avg_sq[n] = state[f"v/{n}"].clone().to(self.params[n].dtype)


def adam_step(optimizer: Adam, lr: float | None = None) -> None:
    if lr is not None:
        optimizer.lr = float(lr)
    optimizer.step()


# --- gradient checking -------------------------------------------------------


def relative_error(analytic: Tensor, numeric: Tensor, floor: float = 1e-8) -> Tensor:
    scale = torch.maximum(analytic.abs(), numeric.abs()).clamp_min(floor)
    return (analytic - numeric).abs() / scale


@torch.no_grad()
def central_differences(
    fn: Callable[[], Tensor],
    param: Tensor,
    indices: Sequence[int],
    h: float = 1e-5,
) -> Tensor:
    """Central-difference derivative of scalar ``fn()`` w.r.t. ``param`` at flat ``indices``."""
    flat = param.view(-1)
    out = torch.empty(len(indices), dtype=torch.float64)
    for j, i in enumerate(indices):
        orig = flat[i].item()
        flat[i] = orig + h
        plus = float(fn())
        flat[i] = orig - h
        minus = float(fn())
        flat[i] = orig
        out[j] = (plus - minus) / (2.0 * h)
    return out


def gradient_check(
    fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    h: float = 1e-5,
    max_entries: int | None = 24,
    generator: torch.Generator | None = None,
) -> dict[str, float]:
    """Compare autograd gradients of ``fn`` with central differences.

    Returns the max relative error per parameter. When ``max_entries`` is set,
    that many entries are sampled from each parameter.
    """
    for p in params.values():
        p.grad = None
    loss = fn()
    backward(loss)
    report = {}
    for name, p in params.items():
        n = p.numel()
        if max_entries is None or n <= max_entries:
            idx = list(range(n))
        else:
            idx = torch.randperm(n, generator=generator)[:max_entries].tolist()
        grad = p.grad if p.grad is not None else torch.zeros_like(p)
        analytic = grad.reshape(-1)[idx].to(torch.float64)
        numeric = central_differences(fn, p, idx, h)
        # entries far below the parameter's gradient scale are compared absolutely
        floor = max(1e-12, 1e-6 * float(grad.abs().max()))
        report[name] = float(relative_error(analytic, numeric, floor).max())
    return report
