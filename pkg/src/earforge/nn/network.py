"""Network graphs, shape propagation and the published architectures.

A network is an ordered list of nodes forming a small DAG: every node names
its input nodes (index -1 is the network input, default is the previous
node), which is just enough structure for the descriptor net's two-branch
flatten/concat tail.  ``scale_factor`` divides channel and hidden-unit widths
to make desk-scale training practical; 1 reproduces the published tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ShapeMismatchError
from . import layers as L

#: Landmark-detector input side and output width (55 x/y pairs).
DETECTOR_INPUT = 96
LANDMARK_OUTPUTS = 110
#: Descriptor-net input side and feature width.
DESCRIPTOR_INPUT = 128
DESCRIPTOR_WIDTH = 512


@dataclass(frozen=True)
class LayerSpec:
    """One node: kind in {conv, maxpool, fc, flatten, concat, dropout}."""

    kind: str
    filters: int = 0
    kernel: tuple = (3, 3)
    stride: int = 1
    width: int = 0
    relu: bool = True
    rate: float = 0.0
    inputs: tuple = None  # node indices; None means (previous,)

    def build(self):
        if self.kind == "conv":
            return L.ConvRelu(self.filters, self.kernel, self.stride, self.relu)
        if self.kind == "maxpool":
            return L.MaxPool(pool=self.kernel[0] if self.kernel else 2)
        if self.kind == "fc":
            return L.Dense(self.width, relu=self.relu)
        if self.kind == "flatten":
            return L.Flatten()
        if self.kind == "concat":
            return L.Concat()
        if self.kind == "dropout":
            return L.Dropout(self.rate)
        raise ValueError(f"unknown layer kind {self.kind!r}")


@dataclass(frozen=True)
class NetworkSpec:
    """Input shape (h, w, c) plus the ordered node list."""

    input_shape: tuple
    nodes: tuple
    scale_factor: int = 1

    def node_inputs(self, idx):
        spec = self.nodes[idx]
        return spec.inputs if spec.inputs is not None else (idx - 1,)

    def output_shapes(self):
        """Per-node output shapes; raises if the chain is inconsistent."""
        impls = [spec.build() for spec in self.nodes]
        shapes = []
        for idx, impl in enumerate(impls):
            in_shapes = [self.input_shape if j < 0 else shapes[j]
                         for j in self.node_inputs(idx)]
            shapes.append(impl.out_shape(in_shapes))
        return shapes

    @property
    def output_width(self):
        final = self.output_shapes()[-1]
        if len(final) != 1:
            raise ShapeMismatchError(f"network output is not flat: {final}")
        return final[0]


class Network:
    """Executable network: parameter init, cached forward, backward."""

    def __init__(self, spec: NetworkSpec):
        self.spec = spec
        self.impls = [node.build() for node in spec.nodes]
        self.shapes = spec.output_shapes()

    @property
    def input_shape(self):
        return self.spec.input_shape

    @property
    def output_width(self):
        return self.shapes[-1][0]

    def param_name(self, node_idx, key):
        return f"n{node_idx:02d}_{key}"

    def init_params(self, rng_or_seed, dtype=np.float32):
        rng = np.random.default_rng(rng_or_seed) if not isinstance(
            rng_or_seed, np.random.Generator) else rng_or_seed
        params = {}
        for idx, impl in enumerate(self.impls):
            in_shapes = [self.input_shape if j < 0 else self.shapes[j]
                         for j in self.spec.node_inputs(idx)]
            for key, val in impl.init_params(in_shapes, rng, dtype).items():
                params[self.param_name(idx, key)] = val
        return params

    def _node_params(self, params, idx):
        prefix = f"n{idx:02d}_"
        return {k[len(prefix):]: v for k, v in params.items() if k.startswith(prefix)}

    def _check_input(self, x):
        x = np.asarray(x)
        if x.ndim == 3:  # (n, h, w) grayscale: add the channel axis
            x = x[..., None]
        if x.ndim != 4 or x.shape[1:] != tuple(self.input_shape):
            raise ShapeMismatchError(
                f"expected input (n, {self.input_shape}), got {x.shape}")
        return x

    def forward_cached(self, params, x, train=False, rng=None):
        x = self._check_input(x)
        outputs, caches = [], []
        for idx, impl in enumerate(self.impls):
            xs = [x if j < 0 else outputs[j] for j in self.spec.node_inputs(idx)]
            y, cache = impl.forward(self._node_params(params, idx), xs, train, rng)
            outputs.append(y)
            caches.append(cache)
        return outputs[-1], (outputs, caches, x.shape)

    def forward(self, params, x, train=False, rng=None):
        y, _ = self.forward_cached(params, x, train=train, rng=rng)
        return y

    def backward(self, params, cache_bundle, dy):
        """Accumulate gradients for every parameter given d(loss)/d(output)."""
        outputs, caches, x_shape = cache_bundle
        n_nodes = len(self.impls)
        grads_out = [None] * n_nodes
        grads_out[-1] = dy
        param_grads = {}
        for idx in range(n_nodes - 1, -1, -1):
            g = grads_out[idx]
            if g is None:
                continue
            impl = self.impls[idx]
            dxs, dps = impl.backward(self._node_params(params, idx), caches[idx], g)
            for key, val in dps.items():
                param_grads[self.param_name(idx, key)] = val
            for j, dx in zip(self.spec.node_inputs(idx), dxs):
                if j < 0:
                    continue
                grads_out[j] = dx if grads_out[j] is None else grads_out[j] + dx
        # Parameters with no gradient path still need zero entries.
        for key, val in params.items():
            if key not in param_grads:
                param_grads[key] = np.zeros_like(val)
        return param_grads


def _div(width, scale_factor):
    return max(width // scale_factor, 1)


def landmark_network(scale_factor=1, input_size=DETECTOR_INPUT, outputs=LANDMARK_OUTPUTS):
    """Landmark-regression architecture (conv/pool trunk, three fc layers).

    ``outputs`` stays fixed (it encodes 55 coordinate pairs, or 2 classes for
    the side-classifier variant); ``scale_factor`` shrinks channels and
    hidden widths only.
    """
    if input_size % 8 != 0:
        raise ValueError("input_size must be divisible by 8 (three 2x2 pools)")
    f = lambda c: _div(c, scale_factor)
    nodes = (
        LayerSpec("conv", filters=f(32), kernel=(3, 3)),
        LayerSpec("maxpool", kernel=(2, 2)),
        LayerSpec("dropout", rate=0.10),
        LayerSpec("conv", filters=f(64), kernel=(2, 2)),
        LayerSpec("maxpool", kernel=(2, 2)),
        LayerSpec("dropout", rate=0.20),
        LayerSpec("conv", filters=f(128), kernel=(2, 2)),
        LayerSpec("maxpool", kernel=(2, 2)),
        LayerSpec("dropout", rate=0.30),
        LayerSpec("flatten"),
        LayerSpec("fc", width=f(1000), relu=True),
        LayerSpec("dropout", rate=0.50),
        LayerSpec("fc", width=f(1000), relu=True),
        LayerSpec("fc", width=outputs, relu=False),
    )
    return NetworkSpec((input_size, input_size, 1), nodes, scale_factor)


def side_network(scale_factor=1, input_size=DETECTOR_INPUT):
    """Two-class (left/right) variant of the landmark architecture."""
    return landmark_network(scale_factor=scale_factor, input_size=input_size, outputs=2)


def descriptor_network(scale_factor=1, input_size=DESCRIPTOR_INPUT):
    """Feature-extraction architecture with the dual flatten/concat tail.

    The last pooled map and the final conv map (both 8x8x256 at paper scale)
    are flattened and concatenated before the feature fc layer.
    """
    if input_size % 16 != 0:
        raise ValueError("input_size must be divisible by 16 (four 2x2 pools)")
    f = lambda c: _div(c, scale_factor)
    nodes = (
        LayerSpec("conv", filters=f(128), kernel=(3, 3)),   # 0
        LayerSpec("conv", filters=f(128), kernel=(3, 3)),   # 1
        LayerSpec("maxpool", kernel=(2, 2)),                # 2
        LayerSpec("dropout", rate=0.10),                    # 3
        LayerSpec("conv", filters=f(128), kernel=(3, 3)),   # 4
        LayerSpec("maxpool", kernel=(2, 2)),                # 5
        LayerSpec("dropout", rate=0.20),                    # 6
        LayerSpec("conv", filters=f(256), kernel=(3, 3)),   # 7
        LayerSpec("maxpool", kernel=(2, 2)),                # 8
        LayerSpec("dropout", rate=0.30),                    # 9
        LayerSpec("conv", filters=f(256), kernel=(3, 3)),   # 10
        LayerSpec("maxpool", kernel=(2, 2)),                # 11
        LayerSpec("conv", filters=f(256), kernel=(3, 3)),   # 12
        LayerSpec("flatten", inputs=(11,)),                 # 13: pooled branch
        LayerSpec("flatten", inputs=(12,)),                 # 14: conv branch
        LayerSpec("concat", inputs=(13, 14)),               # 15
        LayerSpec("fc", width=_div(DESCRIPTOR_WIDTH, scale_factor), relu=False),
    )
    return NetworkSpec((input_size, input_size, 1), nodes, scale_factor)
