"""Minimal reverse-mode differentiation engine.

Tensors wrap float64 numpy arrays and record the graph; ops are fused at
array granularity (one backward closure per op, not per scalar). Exactly the
layer set the similarity networks need is provided: valid 1-D convolution,
dense, relu/tanh/sigmoid, inverted dropout, flatten, concat, Euclidean
distance, and an RMSE loss, plus an RMSProp optimizer with inverse-time
learning-rate decay.

Batching convention: every op accepts its natural unbatched shape or the same
shape with one leading batch axis (conv1d: (C,L) or (B,C,L); dense and the
vector ops: (n,) or (B,n)). flatten collapses everything after the first axis
when the input is 3-D or deeper, and the whole tensor when it is 1- or 2-D.
"""

import numpy as np


class Tensor:
    """Array node in the computation graph.

    grad accumulates across backward passes; parameter grads must be cleared
    between steps (RMSProp.zero_grad does this).
    """

    __slots__ = ("data", "grad", "_parents", "_backward")

    def __init__(self, data, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = np.zeros_like(self.data)
        self._parents = tuple(parents)
        self._backward = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape})"

    def backward(self) -> None:
        """Propagate d(self)/d(node) into every ancestor's grad slot.

        self must be a scalar (0-d) tensor, typically a loss.
        """
        if self.data.ndim != 0:
            raise ValueError("backward requires a scalar tensor")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                stack.append((parent, False))
        self.grad = self.grad + 1.0
        for node in reversed(order):
            if node._backward is not None:
                node._backward()


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _split_batch(data: np.ndarray, core_ndim: int) -> tuple[np.ndarray, bool]:
    """Promote to exactly core_ndim+1 dims by prepending a singleton batch."""
    if data.ndim == core_ndim:
        return data[None], False
    if data.ndim == core_ndim + 1:
        return data, True
    raise ValueError(f"expected {core_ndim}- or {core_ndim + 1}-d input, got {data.ndim}-d")


def conv1d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1) -> Tensor:
    """Valid (no padding) cross-correlation.

    x: (C, L) or (B, C, L); weight: (F, C, K); bias: (F,).
    Output length is (L - K)//stride + 1.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    w, b = weight.data, bias.data
    if w.ndim != 3 or b.shape != (w.shape[0],):
        raise ValueError("weight must be (filters, channels, kernel), bias (filters,)")
    xb, batched = _split_batch(x.data, 2)
    B, C, L = xb.shape
    F, Cw, K = w.shape
    if C != Cw:
        raise ValueError(f"input has {C} channels, kernels expect {Cw}")
    if L < K:
        raise ValueError(f"input length {L} shorter than kernel {K}")
    T = (L - K) // stride + 1
    taps = np.lib.stride_tricks.sliding_window_view(xb, K, axis=2)[:, :, ::stride, :]
    # (B*T, C*K) @ (C*K, F): one GEMM for the whole batch.
    taps_mat = taps.transpose(0, 2, 1, 3).reshape(B * T, C * K)
    out = (taps_mat @ w.reshape(F, C * K).T).reshape(B, T, F).transpose(0, 2, 1) + b[None, :, None]
    result = Tensor(out if batched else out[0], parents=(x, weight, bias))

    def backward():
        gy = result.grad if batched else result.grad[None]
        gy_mat = gy.transpose(0, 2, 1).reshape(B * T, F)
        weight.grad += (gy_mat.T @ taps_mat).reshape(F, C, K)
        bias.grad += gy.sum(axis=(0, 2))
        gx = np.zeros_like(xb)
        for k in range(K):
            # every output t reads input position t*stride + k
            contrib = (gy_mat @ w[:, :, k]).reshape(B, T, C).transpose(0, 2, 1)
            gx[:, :, k : k + stride * T : stride] += contrib
        x.grad += gx if batched else gx[0]

    result._backward = backward
    return result


def dense(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Affine map y = W x + b. x: (n,) or (B, n); weight: (m, n); bias: (m,)."""
    w, b = weight.data, bias.data
    if w.ndim != 2 or b.shape != (w.shape[0],):
        raise ValueError("weight must be (out, in), bias (out,)")
    xb, batched = _split_batch(x.data, 1)
    if xb.shape[1] != w.shape[1]:
        raise ValueError(f"input dim {xb.shape[1]} does not match weight dim {w.shape[1]}")
    out = xb @ w.T + b
    result = Tensor(out if batched else out[0], parents=(x, weight, bias))

    def backward():
        gy = result.grad if batched else result.grad[None]
        weight.grad += gy.T @ xb
        bias.grad += gy.sum(axis=0)
        gx = gy @ w
        x.grad += gx if batched else gx[0]

    result._backward = backward
    return result


def relu(x: Tensor) -> Tensor:
    result = Tensor(np.maximum(x.data, 0.0), parents=(x,))

    def backward():
        x.grad += result.grad * (x.data > 0.0)

    result._backward = backward
    return result


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    result = Tensor(y, parents=(x,))

    def backward():
        x.grad += result.grad * (1.0 - y * y)

    result._backward = backward
    return result


def sigmoid(x: Tensor) -> Tensor:
    y = 1.0 / (1.0 + np.exp(-x.data))
    result = Tensor(y, parents=(x,))

    def backward():
        x.grad += result.grad * y * (1.0 - y)

    result._backward = backward
    return result


def dropout(x: Tensor, rate: float, rng, training: bool = True) -> Tensor:
    """Inverted dropout: zero with probability rate, scale survivors by
    1/(1-rate). Identity outside training or at rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must be in [0, 1)")
    if not training or rate == 0.0:
        result = Tensor(x.data.copy(), parents=(x,))

        def backward_identity():
            x.grad += result.grad

        result._backward = backward_identity
        return result
    scale = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    result = Tensor(x.data * scale, parents=(x,))

    def backward():
        x.grad += result.grad * scale

    result._backward = backward
    return result


def flatten(x: Tensor) -> Tensor:
    """Collapse to a vector, or to (B, n) when the input has 3+ dims."""
    if x.data.ndim >= 3:
        shape = (x.data.shape[0], -1)
    else:
        shape = (-1,)
    result = Tensor(x.data.reshape(shape), parents=(x,))

    def backward():
        x.grad += result.grad.reshape(x.data.shape)

    result._backward = backward
    return result


def concat(parts: list[Tensor]) -> Tensor:
    """Join along the last axis; all leading axes must agree."""
    if not parts:
        raise ValueError("concat needs at least one tensor")
    datas = [p.data for p in parts]
    lead = datas[0].shape[:-1]
    if any(d.shape[:-1] != lead for d in datas):
        raise ValueError("concat inputs disagree on leading dimensions")
    result = Tensor(np.concatenate(datas, axis=-1), parents=tuple(parts))

    def backward():
        offset = 0
        for p in parts:
            width = p.data.shape[-1]
            p.grad += result.grad[..., offset : offset + width]
            offset += width

    result._backward = backward
    return result


def unsqueeze(x: Tensor) -> Tensor:
    """Append a trailing axis of size 1: () -> (1,), (B,) -> (B, 1)."""
    result = Tensor(x.data[..., None], parents=(x,))

    def backward():
        x.grad += result.grad[..., 0]

    result._backward = backward
    return result


def euclidean_distance(a: Tensor, b: Tensor) -> Tensor:
    """sqrt(sum((a-b)^2)) over the last axis; (n,)->scalar, (B,n)->(B,).

    At a == b the gradient is the zero subgradient.
    """
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch {a.data.shape} vs {b.data.shape}")
    diff = a.data - b.data
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    result = Tensor(dist, parents=(a, b))

    def backward():
        safe = np.where(dist > 0.0, dist, 1.0)
        scale = (result.grad / safe) * (dist > 0.0)
        g = diff * scale[..., None]
        a.grad += g
        b.grad -= g

    result._backward = backward
    return result


def rmse_loss(pred: Tensor, target) -> Tensor:
    """sqrt(mean((pred-target)^2)) over every element; zero loss has zero grad."""
    target = as_tensor(target)
    if pred.data.shape != target.data.shape:
        raise ValueError(f"shape mismatch {pred.data.shape} vs {target.data.shape}")
    diff = pred.data - target.data
    loss = float(np.sqrt(np.mean(diff * diff)))
    result = Tensor(loss, parents=(pred, target))

    def backward():
        if loss > 0.0:
            g = result.grad * diff / (diff.size * loss)
            pred.grad += g
            target.grad -= g

    result._backward = backward
    return result


def weighted_sum(x: Tensor, weights) -> Tensor:
    """Scalarizing reduction sum(w * x); the linear probe used by gradient checks."""
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != x.data.shape:
        raise ValueError("weights must match tensor shape")
    result = Tensor(float(np.sum(w * x.data)), parents=(x,))

    def backward():
        x.grad += result.grad * w

    result._backward = backward
    return result


def glorot_uniform(rng, shape: tuple[int, ...], fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Conv1dLayer:
    """Parameter holder for a valid 1-D convolution (defaults: 64 filters,
    kernel 3, stride 1)."""

    def __init__(self, in_channels: int, filters: int = 64, kernel: int = 3,
                 stride: int = 1, rng=None):
        rng = rng or np.random.default_rng(0)
        fan_in, fan_out = in_channels * kernel, filters * kernel
        self.weight = Tensor(glorot_uniform(rng, (filters, in_channels, kernel), fan_in, fan_out))
        self.bias = Tensor(np.zeros(filters))
        self.stride = stride

    def __call__(self, x: Tensor) -> Tensor:
        return conv1d(x, self.weight, self.bias, self.stride)

    def params(self) -> list[Tensor]:
        return [self.weight, self.bias]

    def out_length(self, in_length: int) -> int:
        return (in_length - self.weight.data.shape[2]) // self.stride + 1


class DenseLayer:
    """Parameter holder for an affine layer; weight (out, in), zero bias."""

    def __init__(self, in_dim: int, out_dim: int, rng=None):
        rng = rng or np.random.default_rng(0)
        self.weight = Tensor(glorot_uniform(rng, (out_dim, in_dim), in_dim, out_dim))
        self.bias = Tensor(np.zeros(out_dim))

    def __call__(self, x: Tensor) -> Tensor:
        return dense(x, self.weight, self.bias)

    def params(self) -> list[Tensor]:
        return [self.weight, self.bias]


class RMSProp:
    """Running square-gradient scaling with inverse-time learning-rate decay.

    lr_t = lr / (1 + decay * t) with t counting completed steps, so the first
    step uses the initial rate. cache <- rho*cache + (1-rho)*g^2;
    theta <- theta - lr_t * g / (sqrt(cache) + epsilon).
    """

    def __init__(self, params: list[Tensor], lr: float = 1e-5, decay: float = 1e-6,
                 rho: float = 0.9, epsilon: float = 1e-8):
        if lr <= 0.0:
            raise ValueError("learning rate must be positive")
        if not 0.0 <= rho < 1.0:
            raise ValueError("rho must be in [0, 1)")
        self.params = list(params)
        self.lr = lr
        self.decay = decay
        self.rho = rho
        self.epsilon = epsilon
        self.cache = [np.zeros_like(p.data) for p in self.params]
        self.step_count = 0

    def current_lr(self) -> float:
        return self.lr / (1.0 + self.decay * self.step_count)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = np.zeros_like(p.data)

    def step(self) -> None:
        lr_t = self.current_lr()
        for p, cache in zip(self.params, self.cache):
            cache *= self.rho
            cache += (1.0 - self.rho) * p.grad * p.grad
            p.data -= lr_t * p.grad / (np.sqrt(cache) + self.epsilon)
        self.step_count += 1
