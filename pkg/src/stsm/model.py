"""Spatial-temporal forecasting network.

Tensors are laid out ``[batch, nodes, time, channels]``. Each block runs a
causal dilated TCN and a two-adjacency gated GCN in parallel and sums them.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .errors import ConfigError

ACTIVATIONS = {
    "relu": torch.relu,
    "sigmoid": torch.sigmoid,
    "tanh": torch.tanh,
    "identity": lambda x: x,
}


@dataclass
class ModelConfig:
    in_channels: int = 1
    hidden: int = 32
    blocks: int = 2
    gcn_layers: int = 2
    kernel_size: int = 2
    T: int = 24
    T_prime: int = 24
    steps_per_day: int = 288
    activation: str = "relu"
    output_activation: str = "identity"
    time_encoding: str = "scalar"  # "scalar" or "onehot"
    cl_dim: int = 32
    tcn_layers: int = 0  # 0 -> ceil(log2 T)

    def __post_init__(self):
        if self.blocks < 1 or self.gcn_layers < 1:
            raise ConfigError("need at least one block and one GCN layer")
        if self.T != self.T_prime:
            raise ConfigError(f"T ({self.T}) must equal T' ({self.T_prime})")
        if self.kernel_size < 1:
            raise ConfigError("kernel_size must be >= 1")
        for name in (self.activation, self.output_activation):
            if name not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {name!r}")
        if self.time_encoding not in ("scalar", "onehot"):
            raise ConfigError(f"unknown time encoding {self.time_encoding!r}")

    @property
    def n_tcn_layers(self) -> int:
        return self.tcn_layers or max(1, math.ceil(math.log2(self.T)))

    @property
    def dilations(self) -> list[int]:
        return [2 ** j for j in range(self.n_tcn_layers)]


def propagation_matrix(A: torch.Tensor) -> torch.Tensor:
    """Normalised aggregation matrix for ``out = P @ Z``.

    ``A`` uses the ``A[src, dst]`` convention. Symmetric inputs get
    ``D^-1/2 (A+I) D^-1/2``; asymmetric ones are transposed to receiver rows
    and row-normalised so each row sums to one.
    """
    A_tilde = A + torch.eye(A.shape[-1], dtype=A.dtype, device=A.device)
    if torch.equal(A, A.transpose(-1, -2)):
        d = A_tilde.sum(dim=-1).rsqrt()
        return d[..., :, None] * A_tilde * d[..., None, :]
    R = A_tilde.transpose(-1, -2)
    return R / R.sum(dim=-1, keepdim=True)


def gcn(A: torch.Tensor, Z: torch.Tensor, W: torch.Tensor, P: torch.Tensor | None = None) -> torch.Tensor:
    """One graph convolution ``Norm(A+I) Z W`` over the node axis ``-2``."""
    if P is None:
        P = propagation_matrix(A)
    return P @ Z @ W


class TimeFusion(nn.Module):
    """Multiplies a projection of the inputs by a projection of the interval ids."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.encoding = cfg.time_encoding
        self.steps_per_day = cfg.steps_per_day
        self.phi1 = nn.Linear(cfg.in_channels, cfg.hidden)
        n_te = 1 if cfg.time_encoding == "scalar" else cfg.steps_per_day
        self.phi2 = nn.Linear(n_te, cfg.hidden)

    def encode(self, TE: torch.Tensor) -> torch.Tensor:
        if self.encoding == "scalar":
            return (TE.to(self.phi2.weight.dtype) / self.steps_per_day)[..., None]
        return F.one_hot(TE.long(), self.steps_per_day).to(self.phi2.weight.dtype)

    def forward(self, X: torch.Tensor, TE: torch.Tensor) -> torch.Tensor:
        # X [B, N, T, C], TE [B, T]
        return self.phi1(X) * self.phi2(self.encode(TE))[:, None, :, :]


class DilatedTCN(nn.Module):
    """Stacked causal 1-D convolutions with dilations 1, 2, 4, ...

    Tap ``i`` of a width-``k`` kernel reads ``x[t - (k-1-i) * d]``; positions
    before the series start read zeros.
    """

    def __init__(self, cfg: ModelConfig, activation: str | None = None):
        super().__init__()
        self.kernel_size = cfg.kernel_size
        self.dilations = cfg.dilations
        self.act = ACTIVATIONS[activation or cfg.activation]
        self.weights = nn.ParameterList()
        self.biases = nn.ParameterList()
        for _ in self.dilations:
            conv = nn.Conv1d(cfg.hidden, cfg.hidden, cfg.kernel_size)  # borrowed for its default init
            self.weights.append(nn.Parameter(conv.weight.detach().permute(2, 1, 0).contiguous()))  # [k, C_in, C_out]
            self.biases.append(nn.Parameter(conv.bias.detach().clone()))

    def forward(self, H: torch.Tensor) -> torch.Tensor:
        x = H  # [B, N, T, C]
        T = x.shape[-2]
        for W, b, d in zip(self.weights, self.biases, self.dilations):
            out = b
            for i in range(self.kernel_size):
                lag = (self.kernel_size - 1 - i) * d
                if lag >= T:
                    continue
                xs = x if lag == 0 else F.pad(x[..., :T - lag, :], (0, 0, lag, 0))
                out = out + xs @ W[i]
            x = self.act(out)
        return x


class GCNL(nn.Module):
    """Gated pair of parallel graph convolutions."""

    def __init__(self, c_in: int, c_out: int):
        super().__init__()
        self.W_value = nn.Parameter(torch.empty(c_in, c_out))
        self.W_gate = nn.Parameter(torch.empty(c_in, c_out))
        nn.init.xavier_uniform_(self.W_value)
        nn.init.xavier_uniform_(self.W_gate)

    def forward(self, P: torch.Tensor, Z: torch.Tensor) -> torch.Tensor:
        # Z [B, N, T, C]: each time slot is convolved separately
        B, N, T, C = Z.shape
        PZ = (P @ Z.reshape(B, N, T * C)).reshape(B, N, T, C)
        return (PZ @ self.W_value) * torch.sigmoid(PZ @ self.W_gate)


class GCNBlock(nn.Module):
    """``k`` chained GCNL layers per adjacency; max over layers, then over
    adjacencies. Weights are shared across time slots."""

    def __init__(self, cfg: ModelConfig, n_adjacency: int = 2):
        super().__init__()
        self.branches = nn.ModuleList(
            nn.ModuleList(GCNL(cfg.hidden, cfg.hidden) for _ in range(cfg.gcn_layers))
            for _ in range(n_adjacency)
        )

    def forward(self, H: torch.Tensor, props: list[torch.Tensor]) -> torch.Tensor:
        if len(props) != len(self.branches):
            raise RuntimeError(f"expected {len(self.branches)} adjacencies, got {len(props)}")
        N = H.shape[1]
        outs = []
        for P, layers in zip(props, self.branches):
            if P.shape != (N, N):
                raise RuntimeError(f"adjacency of shape {tuple(P.shape)} does not match {N} nodes")
            Z, layer_outs = H, []
            for layer in layers:
                Z = layer(P, Z)
                layer_outs.append(Z)
            outs.append(torch.stack(layer_outs).amax(dim=0))
        return torch.stack(outs).amax(dim=0)


class STBlock(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.tcn = DilatedTCN(cfg)
        self.gcn = GCNBlock(cfg)

    def forward(self, H, props):
        return block_combine(self.gcn(H, props), self.tcn(H))


def block_combine(H_gcn: torch.Tensor, H_tcn: torch.Tensor) -> torch.Tensor:
    if H_gcn.shape != H_tcn.shape:
        raise RuntimeError(f"branch shapes differ: {tuple(H_gcn.shape)} vs {tuple(H_tcn.shape)}")
    return H_gcn + H_tcn


class OutputHead(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.phi3 = nn.Linear(cfg.hidden, cfg.hidden)
        self.phi4 = nn.Linear(cfg.hidden, cfg.in_channels)
        self.act = ACTIVATIONS[cfg.activation]
        self.out_act = ACTIVATIONS[cfg.output_activation]

    def forward(self, H: torch.Tensor) -> torch.Tensor:
        return self.out_act(self.phi4(self.act(self.phi3(H))))


class ContrastiveHead(nn.Module):
    """Two linear maps with a ReLU between, applied to a node-sum."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.phi_a = nn.Linear(cfg.hidden, cfg.cl_dim)
        self.phi_b = nn.Linear(cfg.cl_dim, cfg.cl_dim)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        # h [B, N, C'] -> [B, cl_dim]
        return self.phi_b(torch.relu(self.phi_a(h.sum(dim=-2))))


class STModel(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.fuse = TimeFusion(cfg)
        self.blocks = nn.ModuleList(STBlock(cfg) for _ in range(cfg.blocks))
        self.head = OutputHead(cfg)
        self.cl_head = ContrastiveHead(cfg)

    def forward(self, X: torch.Tensor, TE: torch.Tensor, A_s: torch.Tensor, A_dtw: torch.Tensor,
                props: list[torch.Tensor] | None = None):
        """Returns predictions ``[B, N, T', C]`` and the last-block,
        last-step node vectors ``[B, N, C']``.

        ``props`` may carry precomputed propagation matrices for
        ``(A_s, A_dtw)``; the adjacencies are then ignored.
        """
        squeeze = X.dim() == 3
        if squeeze:
            X, TE = X[None], TE[None]
        if props is None:
            props = [propagation_matrix(A_s.to(X.dtype)), propagation_matrix(A_dtw.to(X.dtype))]
        H = self.fuse(X, TE)
        for block in self.blocks:
            H = block(H, props)
        X_hat = self.head(H)
        h_last = H[:, :, -1, :]
        if squeeze:
            return X_hat[0], h_last[0]
        return X_hat, h_last


def build_model(cfg: ModelConfig, seed: int = 0, dtype=torch.float32) -> STModel:
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        model = STModel(cfg)
    return model.to(dtype)


# ---------------------------------------------------------------------------
# checkpoints

CONFIG_KEY = "__config__"


def save_checkpoint(model: STModel, path, extra: dict | None = None) -> None:
    """Single ``.npz`` archive: every parameter plus the config as JSON."""
    arrays = {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}
    meta = {"model": asdict(model.cfg), "dtype": str(next(model.parameters()).dtype).replace("torch.", ""),
            "extra": extra or {}}
    arrays[CONFIG_KEY] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
    with open(Path(path), "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[STModel, dict]:
    with np.load(Path(path)) as z:
        meta = json.loads(bytes(z[CONFIG_KEY]).decode())
        cfg = ModelConfig(**meta["model"])
        model = build_model(cfg, dtype=getattr(torch, meta["dtype"]))
        state = model.state_dict()
        loaded = {}
        for k, ref in state.items():
            if k not in z.files:
                raise ConfigError(f"checkpoint is missing tensor {k!r}")
            arr = z[k]
            if tuple(arr.shape) != tuple(ref.shape):
                raise ConfigError(f"tensor {k!r} has shape {arr.shape}, config expects {tuple(ref.shape)}")
            loaded[k] = torch.from_numpy(arr.copy())
        extra_keys = set(z.files) - set(state) - {CONFIG_KEY}
        if extra_keys:
            raise ConfigError(f"checkpoint has unexpected tensors {sorted(extra_keys)}")
    model.load_state_dict(loaded)
    return model, meta.get("extra", {})
