"""Small feed-forward policy and value networks, trained without autograd.

The policy head is Gaussian with a state-independent log standard
deviation; the value head is a separate network sharing no weights.
Backpropagation is written out by hand so the training loop stays free of
deep-learning dependencies and the analytic gradients can be checked
against finite differences.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from ..errors import ConfigError

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0

_LOG_2PI = math.log(2.0 * math.pi)


class Mlp:
    """Dense tanh network; linear output layer."""

    def __init__(self, sizes, rng: np.random.Generator | None = None, out_scale: float = 1.0):
        self.sizes = list(sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        if rng is None:
            rng = np.random.default_rng(0)
        n = len(self.sizes) - 1
        for i in range(n):
            nin, nout = self.sizes[i], self.sizes[i + 1]
            scale = math.sqrt(2.0 / (nin + nout))
            if i == n - 1:
                scale *= out_scale
            self.weights.append(rng.normal(0.0, scale, size=(nout, nin)))
            self.biases.append(np.zeros(nout))

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        """Output and the per-layer inputs needed for `backward`."""
        acts = [x]
        h = x
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w.T + b
            if i < last:
                h = np.tanh(z)
                acts.append(h)
            else:
                h = z
        return h, acts

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(
        self, acts: list[np.ndarray], dout: np.ndarray
    ) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Gradients of the scalar objective wrt weights and biases, given
        the gradient wrt the network output."""
        gw = [np.zeros_like(w) for w in self.weights]
        gb = [np.zeros_like(b) for b in self.biases]
        dz = dout
        for i in reversed(range(len(self.weights))):
            gw[i] = dz.T @ acts[i]
            gb[i] = dz.sum(axis=0)
            if i > 0:
                da = dz @ self.weights[i]
                dz = da * (1.0 - acts[i] ** 2)  # acts[i] = tanh of layer i-1 preact
        return gw, gb

    def param_arrays(self) -> list[np.ndarray]:
        return self.weights + self.biases


class PolicyNet:
    """Gaussian policy plus an independent value function."""

    def __init__(
        self,
        obs_dim: int,
        action_dim: int,
        hidden=(64, 64),
        log_std_init: float = -0.7,
        rng: np.random.Generator | None = None,
    ):
        if rng is None:
            rng = np.random.default_rng(0)
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.hidden = tuple(hidden)
        # small final layer keeps the initial policy near zero torque
        self.mean_net = Mlp([obs_dim, *hidden, action_dim], rng, out_scale=0.01)
        self.value_net = Mlp([obs_dim, *hidden, 1], rng)
        self.log_std = np.full(action_dim, float(log_std_init))

    # -- policy ------------------------------------------------------------

    def mean(self, obs: np.ndarray) -> np.ndarray:
        return self.mean_net(np.atleast_2d(obs))

    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    def sample_action(self, obs, rng: np.random.Generator) -> tuple[np.ndarray, float]:
        mean = self.mean(obs)[0]
        std = self.std()
        action = mean + std * rng.standard_normal(self.action_dim)
        return action, float(self.log_prob(mean[None, :], action[None, :])[0])

    def mean_action(self, obs) -> np.ndarray:
        return self.mean(obs)[0]

    def log_prob(self, mean: np.ndarray, actions: np.ndarray) -> np.ndarray:
        z = (actions - mean) / self.std()
        return -0.5 * (z * z).sum(axis=1) - self.log_std.sum() - 0.5 * self.action_dim * _LOG_2PI

    def entropy(self) -> float:
        """Per-sample policy entropy (state-independent for this head)."""
        return float(self.log_std.sum() + 0.5 * self.action_dim * (1.0 + _LOG_2PI))

    # -- value -------------------------------------------------------------

    def value(self, obs: np.ndarray) -> np.ndarray:
        return self.value_net(np.atleast_2d(obs))[:, 0]

    # -- parameter plumbing --------------------------------------------------

    def param_arrays(self) -> list[np.ndarray]:
        return self.mean_net.param_arrays() + [self.log_std] + self.value_net.param_arrays()

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.param_arrays()])

    def set_flat_params(self, flat: np.ndarray):
        i = 0
        for p in self.param_arrays():
            p.flat[:] = flat[i:i + p.size]
            i += p.size

    def clamp_log_std(self):
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)

    # -- persistence ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "obs_dim": self.obs_dim,
            "action_dim": self.action_dim,
            "hidden": list(self.hidden),
            "log_std": self.log_std.tolist(),
            "policy": {
                "weights": [w.tolist() for w in self.mean_net.weights],
                "biases": [b.tolist() for b in self.mean_net.biases],
            },
            "value": {
                "weights": [w.tolist() for w in self.value_net.weights],
                "biases": [b.tolist() for b in self.value_net.biases],
            },
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @staticmethod
    def from_dict(doc: dict) -> "PolicyNet":
        try:
            net = PolicyNet(
                doc["obs_dim"], doc["action_dim"], tuple(doc["hidden"])
            )
            net.log_std = np.asarray(doc["log_std"], dtype=float)
            for mlp, key in ((net.mean_net, "policy"), (net.value_net, "value")):
                mlp.weights = [np.asarray(w, dtype=float) for w in doc[key]["weights"]]
                mlp.biases = [np.asarray(b, dtype=float) for b in doc[key]["biases"]]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed policy file: {exc}") from exc
        if not all(np.isfinite(p).all() for p in net.param_arrays()):
            raise ConfigError("policy file contains non-finite parameters")
        return net

    @staticmethod
    def load(path) -> "PolicyNet":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"policy file not found: {path}")
        return PolicyNet.from_dict(json.loads(path.read_text()))
