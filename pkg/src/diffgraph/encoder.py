"""Message-passing encoder, parameter store, Adam updates, checkpoints.

The encoder stacks ``layers`` rounds of smoothing + affine map + relu and a
final linear projection.  Both pretraining paradigms share one parameter
store holding every learnable tensor by name; training code builds Tensor
leaves from the store, runs a tape forward, and applies the collected
gradients with :func:`optimizer_step`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DataError, TrainingDivergedError
from .graphs import Graph, Hypergraph, Structure, graph_smoothing, hypergraph_smoothing
from .rng import stream_rng
from .sparse import SparseMatrix

CHECKPOINT_FORMAT_VERSION = 1

STRUCTURE_KINDS = ("graph", "hypergraph")


@dataclass(frozen=True)
class EncoderConfig:
    """Shapes and wiring of the encoder plus its auxiliary heads."""

    feature_dim: int
    hidden_dim: int = 64
    out_dim: int = 64
    layers: int = 2
    activation: str = "relu"
    structure_kind: str = "graph"

    def validate(self) -> None:
        for name in ("feature_dim", "hidden_dim", "out_dim", "layers"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
            if value < 1:
                raise ConfigError(f"{name} must be >= 1, got {value}")
        if self.activation != "relu":
            raise ConfigError(f"unsupported activation {self.activation!r}")
        if self.structure_kind not in STRUCTURE_KINDS:
            raise ConfigError(f"unknown structure_kind {self.structure_kind!r}")

    def to_dict(self) -> dict:
        return {
            "feature_dim": int(self.feature_dim),
            "hidden_dim": int(self.hidden_dim),
            "out_dim": int(self.out_dim),
            "layers": int(self.layers),
            "activation": self.activation,
            "structure_kind": self.structure_kind,
        }

    @staticmethod
    def from_dict(data: dict) -> "EncoderConfig":
        known = {
            "feature_dim",
            "hidden_dim",
            "out_dim",
            "layers",
            "activation",
            "structure_kind",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown encoder config keys {sorted(unknown)}")
        missing = known - set(data)
        if missing:
            raise ConfigError(f"missing encoder config keys {sorted(missing)}")
        config = EncoderConfig(**data)
        config.validate()
        return config


def _layer_dims(config: EncoderConfig) -> list[tuple[int, int]]:
    dims = []
    fan_in = config.feature_dim
    for layer in range(config.layers):
        fan_out = config.out_dim if layer == config.layers - 1 else config.hidden_dim
        dims.append((fan_in, fan_out))
        fan_in = fan_out
    return dims


def parameter_shapes(config: EncoderConfig) -> dict[str, tuple[int, ...]]:
    """Names and shapes of every learnable tensor, in canonical order."""
    shapes: dict[str, tuple[int, ...]] = {}
    for layer, (fan_in, fan_out) in enumerate(_layer_dims(config)):
        shapes[f"encoder.layer{layer}.weight"] = (fan_in, fan_out)
        shapes[f"encoder.layer{layer}.bias"] = (fan_out,)
    shapes["decoder.weight"] = (config.out_dim, config.feature_dim)
    shapes["decoder.bias"] = (config.feature_dim,)
    shapes["readout.attention"] = (config.out_dim,)
    shapes["structure_head.weight"] = (config.out_dim,)
    shapes["structure_head.bias"] = ()
    shapes["mask_token"] = (config.feature_dim,)
    return shapes


@dataclass
class ParameterStore:
    """All learnable tensors plus Adam state and an rng bookkeeping record."""

    config: EncoderConfig
    tensors: dict[str, np.ndarray]
    opt_m: dict[str, np.ndarray]
    opt_v: dict[str, np.ndarray]
    step: int = 0
    rng_state: dict = field(default_factory=dict)

    def clone(self) -> "ParameterStore":
        return ParameterStore(
            config=self.config,
            tensors={k: v.copy() for k, v in self.tensors.items()},
            opt_m={k: v.copy() for k, v in self.opt_m.items()},
            opt_v={k: v.copy() for k, v in self.opt_v.items()},
            step=self.step,
            rng_state=dict(self.rng_state),
        )

    def to_dict(self) -> dict:
        tensors = {
            name: {"shape": list(value.shape), "values": value.ravel().tolist()}
            for name, value in self.tensors.items()
        }
        return {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "config": self.config.to_dict(),
            "tensors": tensors,
            "optimizer_state": {
                "step": int(self.step),
                "m": {k: v.ravel().tolist() for k, v in self.opt_m.items()},
                "v": {k: v.ravel().tolist() for k, v in self.opt_v.items()},
            },
            "rng_state": dict(self.rng_state),
        }

    @staticmethod
    def from_dict(data: dict) -> "ParameterStore":
        if not isinstance(data, dict):
            raise DataError("checkpoint must be a mapping")
        version = data.get("format_version")
        if version != CHECKPOINT_FORMAT_VERSION:
            raise DataError(f"unsupported checkpoint format_version {version!r}")
        required = {"format_version", "config", "tensors", "optimizer_state", "rng_state"}
        unknown = set(data) - required
        if unknown:
            raise DataError(f"unknown checkpoint keys {sorted(unknown)}")
        missing = required - set(data)
        if missing:
            raise DataError(f"missing checkpoint keys {sorted(missing)}")
        try:
            config = EncoderConfig.from_dict(data["config"])
        except ConfigError as exc:
            raise DataError(str(exc)) from exc
        shapes = parameter_shapes(config)
        raw = data["tensors"]
        if set(raw) != set(shapes):
            raise DataError(
                f"checkpoint tensors {sorted(raw)} do not match expected {sorted(shapes)}"
            )
        tensors = {}
        for name, shape in shapes.items():
            entry = raw[name]
            if list(entry.get("shape", [])) != list(shape):
                raise DataError(f"tensor {name} has shape {entry.get('shape')}, expected {list(shape)}")
            values = np.asarray(entry["values"], dtype=np.float64).reshape(shape)
            if not np.all(np.isfinite(values)):
                raise DataError(f"tensor {name} holds non-finite values")
            tensors[name] = values
        opt = data["optimizer_state"]
        if set(opt) != {"step", "m", "v"}:
            raise DataError("optimizer_state must hold exactly step, m, v")
        step = opt["step"]
        if not isinstance(step, int) or step < 0:
            raise DataError(f"optimizer step must be a non-negative integer, got {step!r}")
        opt_m, opt_v = {}, {}
        for slot, target in (("m", opt_m), ("v", opt_v)):
            entries = opt[slot]
            if set(entries) != set(shapes):
                raise DataError(f"optimizer {slot} tensors do not match parameter names")
            for name, shape in shapes.items():
                values = np.asarray(entries[name], dtype=np.float64).reshape(shape)
                if not np.all(np.isfinite(values)):
                    raise DataError(f"optimizer {slot}[{name}] holds non-finite values")
                target[name] = values
        return ParameterStore(
            config=config,
            tensors=tensors,
            opt_m=opt_m,
            opt_v=opt_v,
            step=step,
            rng_state=dict(data["rng_state"]),
        )


def init_encoder(config: EncoderConfig, seed: int) -> ParameterStore:
    """Xavier-uniform weights, zero biases and mask token, fresh Adam state.

    Draws come from one named stream in the canonical parameter order, so
    the initial tensors depend only on (config, seed).
    """
    config.validate()
    rng = stream_rng(seed, "init")
    shapes = parameter_shapes(config)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in shapes.items():
        if name.endswith(".bias") or name == "mask_token":
            tensors[name] = np.zeros(shape, dtype=np.float64)
            continue
        if len(shape) == 2:
            fan_in, fan_out = shape
        else:
            # vector heads: one output unit
            fan_in, fan_out = shape[0], 1
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        tensors[name] = rng.uniform(-bound, bound, size=shape).astype(np.float64)
    opt_m = {name: np.zeros(shape, dtype=np.float64) for name, shape in shapes.items()}
    opt_v = {name: np.zeros(shape, dtype=np.float64) for name, shape in shapes.items()}
    return ParameterStore(
        config=config,
        tensors=tensors,
        opt_m=opt_m,
        opt_v=opt_v,
        step=0,
        rng_state={"seed": int(seed), "epochs_completed": 0},
    )


def propagation_operator(structure: Structure) -> SparseMatrix:
    """Symmetric smoothing operator the encoder propagates with."""
    if isinstance(structure, Graph):
        return graph_smoothing(structure)
    if isinstance(structure, Hypergraph):
        return hypergraph_smoothing(structure)
    raise TypeError(f"unsupported structure {type(structure).__name__}")


def make_leaves(store: ParameterStore) -> dict[str, Tensor]:
    """Tensor leaves over the store's current values, ready for a tape."""
    return {name: ad.leaf(value) for name, value in store.tensors.items()}


def _check_features(config: EncoderConfig, x: np.ndarray, n_nodes: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape != (n_nodes, config.feature_dim):
        raise DataError(
            f"features must have shape ({n_nodes}, {config.feature_dim}), got {x.shape}"
        )
    return x


def encode_tape(
    leaves: dict[str, Tensor],
    x: Tensor,
    operator: SparseMatrix,
    config: EncoderConfig,
) -> Tensor:
    """Differentiable forward pass: layers of smooth->affine->relu, linear last."""
    h = x
    for layer in range(config.layers):
        weight = leaves[f"encoder.layer{layer}.weight"]
        bias = leaves[f"encoder.layer{layer}.bias"]
        h = ad.spmm(operator, h) @ weight + bias
        if layer < config.layers - 1:
            h = ad.relu(h)
    return h


def encode(store: ParameterStore, x: np.ndarray, structure: Structure) -> np.ndarray:
    """Plain numpy forward pass with the store's frozen parameters."""
    x = _check_features(store.config, x, structure.n_nodes)
    operator = propagation_operator(structure)
    h = x
    for layer in range(store.config.layers):
        weight = store.tensors[f"encoder.layer{layer}.weight"]
        bias = store.tensors[f"encoder.layer{layer}.bias"]
        h = operator.dense_matmul(h) @ weight + bias
        if layer < store.config.layers - 1:
            h = np.maximum(h, 0.0)
    return h


def decode_tape(leaves: dict[str, Tensor], z: Tensor) -> Tensor:
    return z @ leaves["decoder.weight"] + leaves["decoder.bias"]


def decode_features(store: ParameterStore, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return z @ store.tensors["decoder.weight"] + store.tensors["decoder.bias"]


def collect_gradients(
    leaves: dict[str, Tensor], store: ParameterStore
) -> dict[str, np.ndarray]:
    """Named gradients after a backward pass; untouched tensors get zeros."""
    grads = {}
    for name, value in store.tensors.items():
        grad = leaves[name].grad
        grads[name] = np.zeros_like(value) if grad is None else grad
    return grads


def accumulate_gradients(
    total: dict[str, np.ndarray], part: dict[str, np.ndarray]
) -> None:
    for name, grad in part.items():
        total[name] = total[name] + grad if name in total else grad.copy()


def optimizer_step(
    store: ParameterStore,
    grads: dict[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update over every parameter, in place.

    Bias-corrected first and second moments; eps is added after the square
    root.  Raises TrainingDivergedError on non-finite gradients or updates.
    """
    if set(grads) != set(store.tensors):
        raise ConfigError("gradient names do not match parameter names")
    step = store.step + 1
    corr1 = 1.0 - beta1**step
    corr2 = 1.0 - beta2**step
    for name in store.tensors:
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != store.tensors[name].shape:
            raise ConfigError(f"gradient for {name} has shape {grad.shape}")
        if not np.all(np.isfinite(grad)):
            raise TrainingDivergedError(f"non-finite gradient for {name}")
        m = store.opt_m[name]
        v = store.opt_v[name]
        m[...] = beta1 * m + (1.0 - beta1) * grad
        v[...] = beta2 * v + (1.0 - beta2) * grad * grad
        update = (m / corr1) / (np.sqrt(v / corr2) + eps)
        new_value = store.tensors[name] - lr * update
        if not np.all(np.isfinite(new_value)):
            raise TrainingDivergedError(f"non-finite update for {name}")
        store.tensors[name] = new_value
    store.step = step


def with_feature_dim(config: EncoderConfig, feature_dim: int) -> EncoderConfig:
    """Copy of config with feature_dim resolved from data."""
    return replace(config, feature_dim=feature_dim)
