"""Residual 2-D CNN over (channels x F x T) feature maps, with a task head.

Layout: one 3x3 stem conv into 32 maps, six residual blocks at widths
32, 32, 64, 64, 128, 128 (stride-2 downsampling entering blocks 3 and 5,
with a 1x1 conv on the skip whenever shape changes), then global average
pooling and two fully connected layers. The network emits raw logits;
losses apply their own sigmoid/softmax.

Layers are train/eval stateful only through batch norm; everything else is
pure. He-style initialization from a caller-supplied generator keeps model
construction deterministic per seed.
"""

import numpy as np

from . import tensor as T
from .tensor import Tensor

WIDTHS = (32, 32, 64, 64, 128, 128)
STRIDES = (1, 1, 2, 1, 2, 1)
HIDDEN = 128
_BN_MOMENTUM = 0.9
_BN_EPS = 1e-5


class Conv2d:
    def __init__(self, in_ch: int, out_ch: int, kernel: int, stride, padding,
                 rng, dtype=T.DEFAULT_DTYPE, bias: bool = True):
        std = np.sqrt(2.0 / (in_ch * kernel * kernel))
        w = rng.normal(0.0, std, size=(out_ch, in_ch, kernel, kernel))
        self.weight = Tensor(w.astype(dtype), requires_grad=True)
        # a bias feeding straight into batch norm is canceled exactly by the
        # mean subtraction, so such convs are built without one
        self.bias = Tensor(np.zeros(out_ch, dtype), requires_grad=True) if bias else None
        self.stride = stride
        self.padding = padding

    def __call__(self, x: Tensor) -> Tensor:
        out = T.conv2d(x, self.weight, stride=self.stride, padding=self.padding)
        if self.bias is None:
            return out
        b = T.reshape(self.bias, (1, self.bias.shape[0], 1, 1))
        return T.add(out, b)

    def parameters(self) -> dict:
        if self.bias is None:
            return {"weight": self.weight}
        return {"weight": self.weight, "bias": self.bias}


class BatchNorm2d:
    """Per-channel normalization with running statistics for inference.

    Training batches normalize by their own mean/var (biased) and fold the
    same statistics into the running buffers. Inference uses the buffers
    and refuses to run before any batch has populated them.
    """

    def __init__(self, n_ch: int, dtype=T.DEFAULT_DTYPE):
        self.gamma = Tensor(np.ones(n_ch, dtype), requires_grad=True)
        self.beta = Tensor(np.zeros(n_ch, dtype), requires_grad=True)
        self.running_mean = np.zeros(n_ch, dtype)
        self.running_var = np.ones(n_ch, dtype)
        self.batches_seen = 0
        self.training = True

    def __call__(self, x: Tensor) -> Tensor:
        c = x.shape[1]
        if c != self.gamma.shape[0]:
            raise T.ShapeError(f"batch norm built for {self.gamma.shape[0]} channels, got {c}")
        if self.training:
            mu = T.mean(x, axis=(0, 2, 3), keepdims=True)
            centered = T.sub(x, mu)
            var = T.mean(T.mul(centered, centered), axis=(0, 2, 3), keepdims=True)
            self.running_mean = (
                _BN_MOMENTUM * self.running_mean
                + (1 - _BN_MOMENTUM) * mu.data.reshape(-1)
            ).astype(self.running_mean.dtype)
            self.running_var = (
                _BN_MOMENTUM * self.running_var
                + (1 - _BN_MOMENTUM) * var.data.reshape(-1)
            ).astype(self.running_var.dtype)
            self.batches_seen += 1
            normed = T.div(centered, T.sqrt(T.add(var, _BN_EPS)))
        else:
            if self.batches_seen == 0:
                raise RuntimeError(
                    "batch norm evaluated before any training batch set its statistics"
                )
            mu = self.running_mean.reshape(1, c, 1, 1)
            sd = np.sqrt(self.running_var + _BN_EPS).reshape(1, c, 1, 1)
            normed = T.div(T.sub(x, Tensor(mu)), Tensor(sd))
        g = T.reshape(self.gamma, (1, c, 1, 1))
        b = T.reshape(self.beta, (1, c, 1, 1))
        return T.add(T.mul(normed, g), b)

    def parameters(self) -> dict:
        return {"gamma": self.gamma, "beta": self.beta}

    def buffers(self) -> dict:
        return {
            "running_mean": self.running_mean,
            "running_var": self.running_var,
            "batches_seen": np.array([self.batches_seen], dtype=np.int64),
        }

    def load_buffers(self, buffers: dict) -> None:
        self.running_mean = buffers["running_mean"].copy()
        self.running_var = buffers["running_var"].copy()
        self.batches_seen = int(buffers["batches_seen"][0])


class Linear:
    def __init__(self, in_dim: int, out_dim: int, rng, dtype=T.DEFAULT_DTYPE):
        std = np.sqrt(2.0 / in_dim)
        w = rng.normal(0.0, std, size=(in_dim, out_dim))
        self.weight = Tensor(w.astype(dtype), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim, dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return T.linear(x, self.weight, self.bias)

    def parameters(self) -> dict:
        return {"weight": self.weight, "bias": self.bias}


class ResidualBlock:
    def __init__(self, in_ch: int, out_ch: int, stride: int, rng,
                 dtype=T.DEFAULT_DTYPE):
        self.conv1 = Conv2d(in_ch, out_ch, 3, (stride, stride), (1, 1), rng, dtype,
                            bias=False)
        self.bn1 = BatchNorm2d(out_ch, dtype)
        self.conv2 = Conv2d(out_ch, out_ch, 3, (1, 1), (1, 1), rng, dtype,
                            bias=False)
        self.bn2 = BatchNorm2d(out_ch, dtype)
        if stride != 1 or in_ch != out_ch:
            self.skip = Conv2d(in_ch, out_ch, 1, (stride, stride), (0, 0), rng, dtype)
        else:
            self.skip = None

    def __call__(self, x: Tensor) -> Tensor:
        out = self.bn2(self.conv2(T.relu(self.bn1(self.conv1(x)))))
        shortcut = x if self.skip is None else self.skip(x)
        return T.relu(T.add(out, shortcut))

    def sublayers(self) -> dict:
        layers = {"conv1": self.conv1, "bn1": self.bn1,
                  "conv2": self.conv2, "bn2": self.bn2}
        if self.skip is not None:
            layers["skip"] = self.skip
        return layers


class ResNetBackend:
    def __init__(self, in_channels: int, n_classes: int, rng=None,
                 dtype=T.DEFAULT_DTYPE):
        if rng is None:
            rng = np.random.default_rng(0)
        self.in_channels = in_channels
        self.n_classes = n_classes
        self.stem = Conv2d(in_channels, WIDTHS[0], 3, (1, 1), (1, 1), rng, dtype)
        self.blocks = []
        prev = WIDTHS[0]
        for width, stride in zip(WIDTHS, STRIDES):
            self.blocks.append(ResidualBlock(prev, width, stride, rng, dtype))
            prev = width
        self.fc1 = Linear(WIDTHS[-1], HIDDEN, rng, dtype)
        fc2 = Linear(HIDDEN, n_classes, rng, dtype)
        fc2.weight.data *= 0.1  # keep initial logits near zero
        self.fc2 = fc2
        self.training = True

    # -- mode handling ------------------------------------------------------
    def _batch_norms(self):
        for block in self.blocks:
            yield block.bn1
            yield block.bn2

    def train(self):
        self.training = True
        for bn in self._batch_norms():
            bn.training = True
        return self

    def eval(self):
        self.training = False
        for bn in self._batch_norms():
            bn.training = False
        return self

    # -- forward ------------------------------------------------------------
    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise T.ShapeError(
                f"expected [B, {self.in_channels}, F, T] input, got {x.shape}"
            )
        out = self.stem(x)
        for block in self.blocks:
            out = block(out)
        out = T.global_avg_pool(out)
        out = T.relu(self.fc1(out))
        return self.fc2(out)

    # -- parameter plumbing --------------------------------------------------
    def _named_layers(self) -> dict:
        layers = {"stem": self.stem}
        for i, block in enumerate(self.blocks):
            for sub, layer in block.sublayers().items():
                layers[f"block{i + 1}.{sub}"] = layer
        layers["fc1"] = self.fc1
        layers["fc2"] = self.fc2
        return layers

    def parameters(self) -> dict:
        out = {}
        for prefix, layer in self._named_layers().items():
            for name, p in layer.parameters().items():
                out[f"{prefix}.{name}"] = p
        return out

    def buffers(self) -> dict:
        out = {}
        for prefix, layer in self._named_layers().items():
            if isinstance(layer, BatchNorm2d):
                for name, b in layer.buffers().items():
                    out[f"{prefix}.{name}"] = b
        return out

    def load_buffers(self, buffers: dict) -> None:
        for prefix, layer in self._named_layers().items():
            if isinstance(layer, BatchNorm2d):
                layer.load_buffers({
                    name: buffers[f"{prefix}.{name}"]
                    for name in ("running_mean", "running_var", "batches_seen")
                })

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters().values())
