"""
Two-layer feed forward network (p -> hidden ReLU -> 1) and its training loop.

Training is full-batch Adam on an MSE loss with a held-out calibration split;
the parameters from the epoch with the lowest calibration loss are kept. For
binary labels the loss is taken on sigmoid(output) while the stored network
still returns the pre-link value.
"""
import copy
import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
import torch
from torch import nn

from .errors import DataError, NumericalError
from .schemas import MlpConfig, ResponseKind

logger = logging.getLogger(__name__)

MIN_TRAIN_ROWS = 10


class TwoLayerNet(nn.Module):
    """
    l1: Linear(p, hidden) + ReLU, l2: Linear(hidden, 1). Output is the pre-link score.
    """

    def __init__(self, input_dim: int, hidden: int):
        super().__init__()
        self.l1 = nn.Linear(input_dim, hidden, dtype=torch.float64)
        self.l2 = nn.Linear(hidden, 1, dtype=torch.float64)
        self.activation = nn.ReLU()

    def forward(self, X: torch.Tensor) -> torch.Tensor:
        """
        :param X: (n, input_dim)
        :return: (n,)
        """
        return self.l2(self.activation(self.l1(X))).squeeze(-1)

    def xavier_init(self, generator: torch.Generator) -> None:
        for layer in (self.l1, self.l2):
            nn.init.xavier_uniform_(layer.weight, generator=generator)
            nn.init.zeros_(layer.bias)

    def to_arrays(self) -> Dict[str, np.ndarray]:
        """Parameters as plain arrays: W1 (hidden, p), b1 (hidden,), w2 (hidden,), b2 (1,)."""
        with torch.no_grad():
            return {
                "W1": self.l1.weight.detach().cpu().numpy().copy(),
                "b1": self.l1.bias.detach().cpu().numpy().copy(),
                "w2": self.l2.weight.detach().cpu().numpy().reshape(-1).copy(),
                "b2": self.l2.bias.detach().cpu().numpy().reshape(-1).copy(),
            }

    @classmethod
    def from_arrays(cls, params: Dict[str, np.ndarray]) -> "TwoLayerNet":
        W1 = np.asarray(params["W1"], dtype=float)
        net = cls(W1.shape[1], W1.shape[0])
        with torch.no_grad():
            net.l1.weight.copy_(torch.from_numpy(W1))
            net.l1.bias.copy_(torch.from_numpy(np.asarray(params["b1"], dtype=float)))
            net.l2.weight.copy_(torch.from_numpy(np.asarray(params["w2"], dtype=float).reshape(1, -1)))
            net.l2.bias.copy_(torch.from_numpy(np.asarray(params["b2"], dtype=float).reshape(1)))
        return net


def forward_numpy(params: Dict[str, np.ndarray], X: np.ndarray) -> np.ndarray:
    """Forward pass from stored arrays; used for scoring so no torch state is needed."""
    hidden = np.maximum(X @ params["W1"].T + params["b1"], 0.0)
    return hidden @ params["w2"] + params["b2"][0]


def calibration_split(n: int, fraction: float, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """(train rows, calibration rows), drawn once from rng; both sorted."""
    if n < MIN_TRAIN_ROWS:
        raise DataError(f"network training needs at least {MIN_TRAIN_ROWS} rows for a calibration split, got {n}")
    n_cal = min(max(1, int(round(fraction * n))), n - 1)
    perm = rng.permutation(n)
    return np.sort(perm[n_cal:]), np.sort(perm[:n_cal])


class NetworkTrainer:
    """
    Full-batch Adam with early stopping on a calibration split.

    The loss trace starts with the untrained (or warm-started) network as
    epoch 0, so the selected epoch can never be worse than the starting point.
    """

    def __init__(self, cfg: MlpConfig, response_kind: ResponseKind):
        self.cfg = cfg
        self.response_kind = response_kind
        self.loss_fn = nn.MSELoss()

        self._logger_prefix = (
            f"{self.__class__.__module__}."
            f"{self.__class__.__name__}"
        )

    def _get_logger(self, method_name: str):
        return logging.getLogger(f"{self._logger_prefix}.{method_name}")

    def _loss(self, net: TwoLayerNet, X: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        out = net(X)
        if self.response_kind == "binary":
            out = torch.sigmoid(out)
        return self.loss_fn(out, y)

    def calibration_loss(self, net: TwoLayerNet, X: np.ndarray, y: np.ndarray) -> float:
        with torch.no_grad():
            return float(self._loss(net, torch.from_numpy(X), torch.from_numpy(y)))

    def train(
        self,
        net: TwoLayerNet,
        X: np.ndarray,
        y: np.ndarray,
        rng: np.random.Generator,
        trainable: Optional[List[nn.Parameter]] = None,
    ) -> Tuple[TwoLayerNet, Dict]:
        """
        Train net in place and return the best-epoch copy plus bookkeeping.

        Args:
            net: initialized network
            X, y: (already standardized) features and labels
            rng: draws the calibration split
            trainable: parameters handed to the optimizer; all of them when None

        Returns:
            (best network, {"best_epoch", "calibration_loss", "calibration_trace", "calibration_rows"})
        """
        logger = self._get_logger("train")
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        train_rows, cal_rows = calibration_split(X.shape[0], self.cfg.calibration_fraction, rng)
        X_tr, y_tr = torch.from_numpy(X[train_rows]), torch.from_numpy(y[train_rows])
        X_cal, y_cal = torch.from_numpy(X[cal_rows]), torch.from_numpy(y[cal_rows])

        params = list(trainable) if trainable is not None else list(net.parameters())
        optimizer = torch.optim.Adam(
            params,
            lr=self.cfg.learning_rate,
            betas=(self.cfg.beta1, self.cfg.beta2),
            eps=self.cfg.eps,
        )
        logger.info(
            f"Training {sum(p.numel() for p in params)} parameters for {self.cfg.epochs} epochs "
            f"({len(train_rows)} train / {len(cal_rows)} calibration rows, {self.response_kind})"
        )

        with torch.no_grad():
            best_loss = float(self._loss(net, X_cal, y_cal))
        trace = [best_loss]
        best_epoch = 0
        best_state = copy.deepcopy(net.state_dict())

        for epoch in range(1, self.cfg.epochs + 1):
            optimizer.zero_grad()
            loss = self._loss(net, X_tr, y_tr)
            if not torch.isfinite(loss):
                raise NumericalError(f"non-finite training loss at epoch {epoch}")
            loss.backward()
            optimizer.step()

            with torch.no_grad():
                cal_loss = float(self._loss(net, X_cal, y_cal))
            if not np.isfinite(cal_loss):
                raise NumericalError(f"non-finite calibration loss at epoch {epoch}")
            trace.append(cal_loss)
            if cal_loss < best_loss:
                best_loss, best_epoch = cal_loss, epoch
                best_state = copy.deepcopy(net.state_dict())

        net.load_state_dict(best_state)
        logger.info(f"Best calibration loss {best_loss:.6g} at epoch {best_epoch}")
        return net, {
            "best_epoch": best_epoch,
            "calibration_loss": best_loss,
            "calibration_trace": trace,
            "calibration_rows": [int(i) for i in cal_rows],
        }


def torch_generator(seed: int) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(int(seed))
    return gen
