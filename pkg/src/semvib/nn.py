"""Fully-connected networks, Adam, and a finite-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

ACTIVATIONS = ("relu", "identity", "softmax")


@dataclass
class Layer:
    """One affine layer with an activation tag."""

    W: Tensor
    b: Tensor
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.W.data.ndim != 2 or self.b.data.ndim != 1:
            raise ValueError("W must be 2-D and b 1-D")
        if self.W.data.shape[1] != self.b.data.shape[0]:
            raise ValueError("bias width must match W output width")
        if not (np.isfinite(self.W.data).all() and np.isfinite(self.b.data).all()):
            raise ValueError("layer parameters must be finite")


class Mlp:
    """Stack of affine layers applied row-wise to a batch matrix."""

    def __init__(self, layers: list[Layer]):
        for prev, nxt in zip(layers, layers[1:]):
            if prev.W.data.shape[1] != nxt.W.data.shape[0]:
                raise ValueError("consecutive layer dimensions must chain")
        self.layers = layers

    @classmethod
    def build(
        cls,
        dims: list[int],
        rng: np.random.Generator,
        hidden_activation: str = "relu",
        final_activation: str = "identity",
    ) -> "Mlp":
        """Glorot-uniform weights, zero biases; ``dims`` chains in->...->out."""
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            W = Tensor(rng.uniform(-bound, bound, size=(fan_in, fan_out)), requires_grad=True)
            b = Tensor(np.zeros(fan_out), requires_grad=True)
            act = final_activation if i == len(dims) - 2 else hidden_activation
            layers.append(Layer(W, b, act))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].W.data.shape[0]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].W.data.shape[1]

    def forward(self, x) -> Tensor:
        x = ad.as_tensor(x)
        if x.data.ndim != 2 or x.data.shape[1] != self.in_dim:
            raise ValueError(
                f"input width {x.data.shape} does not match first layer in_dim {self.in_dim}"
            )
        for layer in self.layers:
            x = ad.add(ad.matmul(x, layer.W), layer.b)
            if layer.activation == "relu":
                x = ad.relu(x)
            elif layer.activation == "softmax":
                x = ad.softmax_rows(x)
        return x

    __call__ = forward

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, layer in enumerate(self.layers):
            out[f"{prefix}l{i}.W"] = layer.W
            out[f"{prefix}l{i}.b"] = layer.b
        return out


def mlp_forward(mlp: Mlp, x) -> Tensor:
    """Functional alias for :meth:`Mlp.forward`."""
    return mlp.forward(x)


class Adam:
    """Bias-corrected Adam over a dict of named parameter tensors.

    ``step`` optionally restricts the update of a parameter to a set of
    rows (used for the consistent matrix, whose untouched rows must not
    move); the bias correction uses the shared step counter.
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.params = dict(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def step(self, row_masks: dict[str, np.ndarray] | None = None) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            rows = row_masks.get(k) if row_masks else None
            if rows is None:
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g
                p.data -= self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)
            else:
                gr = g[rows]
                self.m[k][rows] = self.beta1 * self.m[k][rows] + (1.0 - self.beta1) * gr
                self.v[k][rows] = self.beta2 * self.v[k][rows] + (1.0 - self.beta2) * gr * gr
                p.data[rows] -= (
                    self.lr * (self.m[k][rows] / bc1) / (np.sqrt(self.v[k][rows] / bc2) + self.eps)
                )

    def state_dict(self) -> dict:
        return {
            "t": self.t,
            "lr": self.lr,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "m": self.m,
            "v": self.v,
        }

    def load_state_dict(self, state: dict) -> None:
        self.t = int(state["t"])
        self.lr = float(state["lr"])
        self.beta1 = float(state["beta1"])
        self.beta2 = float(state["beta2"])
        self.eps = float(state["eps"])
        for k in self.params:
            self.m[k] = np.array(state["m"][k], dtype=np.float64)
            self.v[k] = np.array(state["v"][k], dtype=np.float64)


def adam_step(opt: Adam, row_masks: dict[str, np.ndarray] | None = None) -> None:
    """Functional alias for :meth:`Adam.step`."""
    opt.step(row_masks)


@dataclass
class GradientReport:
    """Outcome of comparing analytic gradients against central differences."""

    tol: float
    max_rel_err: dict[str, float] = field(default_factory=dict)
    n_checked: dict[str, int] = field(default_factory=dict)
    n_excluded: dict[str, int] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.max_rel_err.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return all(e <= self.tol for e in self.max_rel_err.values())

    def summary(self) -> str:
        lines = []
        for name, err in sorted(self.max_rel_err.items()):
            lines.append(
                f"{name}: max_rel_err={err:.3e} checked={self.n_checked[name]} "
                f"excluded={self.n_excluded[name]}"
            )
        lines.append(f"worst={self.worst:.3e} tol={self.tol:.1e} passed={self.passed}")
        return "\n".join(lines)


def check_gradients(
    objective,
    params: dict[str, Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    max_coords: int = 32,
    seed: int = 0,
) -> GradientReport:
    """Compare analytic gradients of ``objective()`` with central differences.

    ``objective`` is a zero-argument callable returning a scalar Tensor; it
    must be a pure function of ``params`` (freeze any noise draws before
    calling). Tensors larger than ``max_coords`` are subsampled (at least 32
    coordinates). Coordinates whose +/-h evaluations land on different sides
    of a ReLU/clip kink are excluded rather than failed.

    Relative error: |a - n| / max(1e-8, |a| + |n|).
    """
    plist = list(params.values())
    loss = objective()
    analytic = {
        k: g for k, g in zip(params.keys(), ad.gradients(loss, plist))
    }
    rng = np.random.default_rng(seed)
    report = GradientReport(tol=tol)
    for name, p in params.items():
        flat = p.data.ravel()
        n = flat.size
        if n <= max(max_coords, 32):
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=max(max_coords, 32), replace=False)
        worst = 0.0
        checked = 0
        excluded = 0
        for c in coords:
            orig = flat[c]
            flat[c] = orig + h
            with ad.kink_tracing() as trace_plus:
                f_plus = objective().item()
            pattern_plus = (
                np.concatenate(trace_plus) if trace_plus else np.empty(0, dtype=np.int8)
            )
            flat[c] = orig - h
            with ad.kink_tracing() as trace_minus:
                f_minus = objective().item()
            pattern_minus = (
                np.concatenate(trace_minus) if trace_minus else np.empty(0, dtype=np.int8)
            )
            flat[c] = orig
            if pattern_plus.shape != pattern_minus.shape or np.any(
                pattern_plus != pattern_minus
            ):
                excluded += 1
                continue
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = analytic[name].ravel()[c]
            rel = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, rel)
            checked += 1
        report.max_rel_err[name] = worst
        report.n_checked[name] = checked
        report.n_excluded[name] = excluded
    return report
