"""One real SGD step under the hybrid partition semantics.

A tiny dense network is trained for a single step two ways: centrally
(classic mini-batch SGD) and split across the three roles exactly as the
scheduler's policies prescribe (sample blocks per role, forward handoffs at
the split points, backward handbacks, gradient push / averaged pull, and
independent local updates).  The two must agree to near machine precision;
this checks the training procedure itself, not its timing.

Gradients travel as per-sample sums and worker_o divides by the global batch
size, which makes the hybrid update mathematically identical to the
centralized one.  Loss is mean squared error over the batch; activations are
tanh except an identity final layer.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .latency import Policy

ACTIVATIONS = ("tanh", "identity")


@dataclass(frozen=True)
class DenseLayer:
    weights: np.ndarray   # (fan_out, fan_in)
    bias: np.ndarray      # (fan_out,)
    activation: str

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValidationError(f"unknown activation {self.activation!r}")
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValidationError("weight/bias shapes inconsistent")

    @property
    def fan_in(self) -> int:
        return self.weights.shape[1]

    @property
    def fan_out(self) -> int:
        return self.weights.shape[0]

    @property
    def param_count(self) -> int:
        return (self.fan_in + 1) * self.fan_out


@dataclass(frozen=True)
class DenseNet:
    layers: tuple[DenseLayer, ...]

    def __post_init__(self):
        if not self.layers:
            raise ValidationError("network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.fan_out != nxt.fan_in:
                raise ValidationError("consecutive layer dimensions must chain")

    @property
    def num_layers(self) -> int:
        return len(self.layers)


def random_dense_net(dims: list[int], seed: int = 0) -> DenseNet:
    """Random net with the given layer widths; tanh inside, identity last."""
    if len(dims) < 2:
        raise ValidationError("need at least input and output dims")
    rng = np.random.default_rng(seed)
    layers = []
    for i, (fi, fo) in enumerate(zip(dims, dims[1:])):
        act = "identity" if i == len(dims) - 2 else "tanh"
        layers.append(DenseLayer(
            weights=rng.normal(0.0, 1.0 / np.sqrt(fi), size=(fo, fi)),
            bias=rng.normal(0.0, 0.1, size=fo),
            activation=act,
        ))
    return DenseNet(tuple(layers))


@dataclass(frozen=True)
class ForwardCache:
    """Activations recorded by a forward pass over an inclusive layer range."""

    first_layer: int
    last_layer: int
    inputs: tuple[np.ndarray, ...]
    pre_activations: tuple[np.ndarray, ...]
    output: np.ndarray


@dataclass(frozen=True)
class GradientSet:
    """Per-layer gradient sums over `sample_count` samples."""

    first_layer: int
    weight_grads: tuple[np.ndarray, ...]
    bias_grads: tuple[np.ndarray, ...]
    sample_count: int

    @property
    def last_layer(self) -> int:
        return self.first_layer + len(self.weight_grads) - 1

    def layer(self, index: int) -> tuple[np.ndarray, np.ndarray]:
        i = index - self.first_layer
        return self.weight_grads[i], self.bias_grads[i]


def _check_kernel_range(net: DenseNet, first: int, last: int):
    if first < 1 or last > net.num_layers or first > last + 1:
        raise ValidationError(
            f"layer range {first}..{last} outside 1..{net.num_layers}")


def forward_with_cache(net: DenseNet, first_layer: int, last_layer: int,
                       activations: np.ndarray) -> ForwardCache:
    """Forward pass keeping the per-layer inputs needed by the backward pass."""
    _check_kernel_range(net, first_layer, last_layer)
    a = np.asarray(activations, dtype=float)
    inputs = []
    pres = []
    for idx in range(first_layer, last_layer + 1):
        layer = net.layers[idx - 1]
        if a.shape[-1] != layer.fan_in:
            raise ValidationError(
                f"layer {idx}: input dim {a.shape[-1]} != fan_in {layer.fan_in}")
        inputs.append(a)
        z = a @ layer.weights.T + layer.bias
        pres.append(z)
        a = np.tanh(z) if layer.activation == "tanh" else z
    return ForwardCache(first_layer, last_layer, tuple(inputs), tuple(pres), a)


def forward_range(net: DenseNet, first_layer: int, last_layer: int,
                  activations: np.ndarray) -> np.ndarray:
    """Run layers first..last on a batch; identity on an empty range."""
    return forward_with_cache(net, first_layer, last_layer, activations).output


def backward_range(net: DenseNet, from_layer: int, down_to_layer: int,
                   upstream_grad: np.ndarray,
                   cache: ForwardCache) -> tuple[GradientSet, np.ndarray]:
    """Backpropagate from `from_layer` down through `down_to_layer`.

    `upstream_grad` is the gradient w.r.t. the output of `from_layer`, as a
    per-sample sum convention (no batch averaging).  Returns the gradient
    sums for the range plus the gradient w.r.t. the range's input, which is
    the payload handed further down.
    """
    if down_to_layer > from_layer:
        # empty range: nothing owned, gradient passes through
        empty = GradientSet(from_layer + 1, (), (), int(upstream_grad.shape[0]))
        return empty, np.asarray(upstream_grad, dtype=float)
    _check_kernel_range(net, down_to_layer, from_layer)
    if cache.first_layer > down_to_layer or cache.last_layer < from_layer:
        raise ValidationError(
            f"cache covers {cache.first_layer}..{cache.last_layer}, "
            f"needed {down_to_layer}..{from_layer}")
    grad = np.asarray(upstream_grad, dtype=float)
    w_grads = []
    b_grads = []
    for idx in range(from_layer, down_to_layer - 1, -1):
        layer = net.layers[idx - 1]
        pos = idx - cache.first_layer
        z = cache.pre_activations[pos]
        a_in = cache.inputs[pos]
        if layer.activation == "tanh":
            dz = grad * (1.0 - np.tanh(z) ** 2)
        else:
            dz = grad
        w_grads.append(dz.T @ a_in)
        b_grads.append(dz.sum(axis=0))
        grad = dz @ layer.weights
    w_grads.reverse()
    b_grads.reverse()
    return GradientSet(down_to_layer, tuple(w_grads), tuple(b_grads),
                       int(grad.shape[0])), grad


def mse_loss(outputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean over the batch of the per-sample squared-error sums."""
    diff = outputs - targets
    return float(np.mean(np.sum(diff * diff, axis=1)))


def _loss_grad_sums(outputs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    # gradient of the per-sample squared error (sum convention)
    return 2.0 * (outputs - targets)


def _apply_update(layers, avg_w, avg_b, lr):
    out = []
    for layer, gw, gb in zip(layers, avg_w, avg_b):
        out.append(DenseLayer(layer.weights - lr * gw,
                              layer.bias - lr * gb, layer.activation))
    return out


def centralized_step(net: DenseNet, inputs: np.ndarray, targets: np.ndarray,
                     lr: float) -> DenseNet:
    """Classic mini-batch SGD step: w <- w - lr * (1/B) * sum of gradients."""
    if inputs.shape[0] == 0:
        raise ValidationError("batch must be nonempty")
    batch = inputs.shape[0]
    n = net.num_layers
    cache = forward_with_cache(net, 1, n, inputs)
    grads, _ = backward_range(net, n, 1, _loss_grad_sums(cache.output, targets),
                              cache)
    avg_w = [g / batch for g in grads.weight_grads]
    avg_b = [g / batch for g in grads.bias_grads]
    return DenseNet(tuple(_apply_update(net.layers, avg_w, avg_b, lr)))


@dataclass(frozen=True)
class Message:
    src: str
    dst: str
    kind: str   # activations | activation_grads | grad_sums | avg_grads
    elems: int


@dataclass
class WorkerState:
    """Post-step view of one role: owned layer copies and its message log."""

    role: str
    owned_layers: tuple[int, int]   # inclusive range, (1, 0) when none owned
    layers: tuple[DenseLayer, ...]
    inbox: list[Message]
    outbox: list[Message]


def _send(src: WorkerState, dst: WorkerState, kind: str, elems: int):
    msg = Message(src.role, dst.role, kind, elems)
    src.outbox.append(msg)
    dst.inbox.append(msg)


def hybrid_step(net: DenseNet, policy: Policy, inputs: np.ndarray,
                targets: np.ndarray, lr: float
                ) -> tuple[DenseNet, dict[str, WorkerState]]:
    """One SGD step executed under the hybrid partition.

    The batch is split in order: the first b_o samples belong to worker_o,
    the next b_s to worker_s, the rest to worker_l.  Helpers run their layer
    prefixes and hand activations to worker_o, which finishes the forward
    pass, starts the backward pass, and hands intermediate gradients back.
    Gradient sums are pushed to worker_o, averaged over the full batch in
    fixed (o, s, l) order, pulled back, and applied independently.

    Returns worker_o's updated full model plus the per-role worker states
    (owned-layer copies and message logs).
    """
    n = net.num_layers
    if policy.m_l > n:
        raise ValidationError(f"m_l={policy.m_l} exceeds network depth {n}")
    batch = inputs.shape[0]
    if policy.batch != batch:
        raise ValidationError(
            f"policy allocates {policy.batch} samples, batch has {batch}")
    if inputs.shape[1] != net.layers[0].fan_in:
        raise ValidationError("input width does not match the first layer")
    m_s, m_l = policy.m_s, policy.m_l
    b_o, b_s, b_l = policy.b_o, policy.b_s, policy.b_l

    state_o = WorkerState("o", (1, n), net.layers, [], [])
    state_s = WorkerState("s", (1, m_s), net.layers[:m_s], [], [])
    state_l = WorkerState("l", (1, m_l), net.layers[:m_l], [], [])

    x_o, x_s, x_l = (inputs[:b_o], inputs[b_o:b_o + b_s], inputs[b_o + b_s:])
    y_o, y_s, y_l = (targets[:b_o], targets[b_o:b_o + b_s],
                     targets[b_o + b_s:])

    # forward: helpers run their prefix and hand activations to worker_o
    cache_o = forward_with_cache(net, 1, n, x_o) if b_o else None
    cache_s = cache_s_tail = None
    if b_s:
        cache_s = forward_with_cache(net, 1, m_s, x_s)
        _send(state_s, state_o, "activations", cache_s.output.size)
        cache_s_tail = forward_with_cache(net, m_s + 1, n, cache_s.output)
    cache_l = cache_l_tail = None
    if b_l:
        cache_l = forward_with_cache(net, 1, m_l, x_l)
        _send(state_l, state_o, "activations", cache_l.output.size)
        cache_l_tail = forward_with_cache(net, m_l + 1, n, cache_l.output)

    # backward: worker_o first, handing intermediate gradients back; each
    # block contributes per-sample gradient sums
    n_layers = net.num_layers
    total_w = [np.zeros_like(layer.weights) for layer in net.layers]
    total_b = [np.zeros_like(layer.bias) for layer in net.layers]

    def accumulate(grads: GradientSet):
        for idx in range(grads.first_layer, grads.last_layer + 1):
            gw, gb = grads.layer(idx)
            total_w[idx - 1] += gw
            total_b[idx - 1] += gb

    frag_s = frag_l = None
    if b_o:
        grads_o, _ = backward_range(
            net, n_layers, 1, _loss_grad_sums(cache_o.output, y_o), cache_o)
        accumulate(grads_o)
    if b_s:
        grads_tail, down = backward_range(
            net, n_layers, m_s + 1,
            _loss_grad_sums(cache_s_tail.output, y_s), cache_s_tail)
        accumulate(grads_tail)
        _send(state_o, state_s, "activation_grads", down.size)
        frag_s, _ = backward_range(net, m_s, 1, down, cache_s)
        accumulate(frag_s)
    if b_l:
        grads_tail, down = backward_range(
            net, n_layers, m_l + 1,
            _loss_grad_sums(cache_l_tail.output, y_l), cache_l_tail)
        accumulate(grads_tail)
        _send(state_o, state_l, "activation_grads", down.size)
        frag_l, _ = backward_range(net, m_l, 1, down, cache_l)
        accumulate(frag_l)

    param_elems = lambda m: sum(layer.param_count for layer in net.layers[:m])
    if m_s >= 1:
        _send(state_s, state_o, "grad_sums", param_elems(m_s))
    if m_l >= 1:
        _send(state_l, state_o, "grad_sums", param_elems(m_l))

    # layer-wise averaging over the whole batch, then pull + local updates
    avg_w = [g / batch for g in total_w]
    avg_b = [g / batch for g in total_b]
    if m_s >= 1:
        _send(state_o, state_s, "avg_grads", param_elems(m_s))
    if m_l >= 1:
        _send(state_o, state_l, "avg_grads", param_elems(m_l))

    new_layers = _apply_update(net.layers, avg_w, avg_b, lr)
    state_o.layers = tuple(new_layers)
    state_s.layers = tuple(_apply_update(net.layers[:m_s], avg_w[:m_s],
                                         avg_b[:m_s], lr))
    state_l.layers = tuple(_apply_update(net.layers[:m_l], avg_w[:m_l],
                                         avg_b[:m_l], lr))
    return DenseNet(tuple(new_layers)), {"o": state_o, "s": state_s,
                                         "l": state_l}
