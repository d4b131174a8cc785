"""Training session: datasets, SGD training with checkpoint resume.

Search-scale defaults follow the usual cell-search recipe: SGD with momentum
0.9, lr 0.1 under a single-period cosine schedule, batch size 128, weight
decay 3e-4, standard crop/flip augmentation, and a 90/10 train/validation
split of the CIFAR-10 training set. The `synthetic` dataset swaps in a few
hundred random tensors with CIFAR shapes so protocol and resume behavior can
be exercised without any data download.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

import torch
from torch import nn
from torch.utils.data import DataLoader, Subset, TensorDataset

from .model import build_model

logger = logging.getLogger(__name__)

SYNTHETIC_TRAIN = 256
SYNTHETIC_VAL = 64


class BuildError(RuntimeError):
    pass


def _synthetic_datasets(seed: int):
    gen = torch.Generator().manual_seed(seed)
    images = torch.randn(SYNTHETIC_TRAIN + SYNTHETIC_VAL, 3, 32, 32, generator=gen)
    labels = torch.randint(0, 10, (SYNTHETIC_TRAIN + SYNTHETIC_VAL,), generator=gen)
    train = TensorDataset(images[:SYNTHETIC_TRAIN], labels[:SYNTHETIC_TRAIN])
    val = TensorDataset(images[SYNTHETIC_TRAIN:], labels[SYNTHETIC_TRAIN:])
    return train, val


def _cifar10_datasets(data_dir: Path, seed: int):
    from torchvision import datasets, transforms

    mean = (0.4914, 0.4822, 0.4465)
    std = (0.2470, 0.2435, 0.2616)
    train_tf = transforms.Compose([
        transforms.RandomCrop(32, padding=4),
        transforms.RandomHorizontalFlip(),
        transforms.ToTensor(),
        transforms.Normalize(mean, std),
    ])
    val_tf = transforms.Compose([transforms.ToTensor(), transforms.Normalize(mean, std)])
    train_full = datasets.CIFAR10(str(data_dir), train=True, download=True, transform=train_tf)
    val_full = datasets.CIFAR10(str(data_dir), train=True, download=False, transform=val_tf)
    n = len(train_full)
    split = int(n * 0.9)
    order = torch.randperm(n, generator=torch.Generator().manual_seed(seed)).tolist()
    return Subset(train_full, order[:split]), Subset(val_full, order[split:])


class TrainerSession:
    def __init__(
        self,
        dataset: str = "synthetic",
        data_dir: str | Path = "data",
        checkpoint_dir: str | Path = "checkpoints",
        max_epochs: int = 25,
        batch_size: int = 128,
        lr: float = 0.1,
        momentum: float = 0.9,
        weight_decay: float = 3e-4,
        seed: int = 0,
        device: str = "cpu",
    ):
        self.dataset = dataset
        self.data_dir = Path(data_dir)
        self.checkpoint_dir = Path(checkpoint_dir)
        self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        self.max_epochs = max_epochs
        self.batch_size = batch_size
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.seed = seed
        self.device = torch.device(device)
        self._data = None  # loaded lazily so hello works without a dataset

    def _loaders(self):
        if self._data is None:
            torch.manual_seed(self.seed)
            if self.dataset == "synthetic":
                train, val = _synthetic_datasets(self.seed)
            elif self.dataset == "cifar10":
                train, val = _cifar10_datasets(self.data_dir, self.seed)
            else:
                raise BuildError(f"unknown dataset {self.dataset!r}")
            self._data = (
                DataLoader(train, batch_size=self.batch_size, shuffle=True,
                           generator=torch.Generator().manual_seed(self.seed)),
                DataLoader(val, batch_size=self.batch_size, shuffle=False),
            )
        return self._data

    def _checkpoint_path(self, checkpoint_id: str) -> Path:
        safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in checkpoint_id)
        return self.checkpoint_dir / f"{safe}.pt"

    def _lr_at(self, epoch: int) -> float:
        # Single-period cosine over max_epochs, indexed by completed epochs.
        t = min(epoch, self.max_epochs) / self.max_epochs
        return 0.5 * self.lr * (1.0 + math.cos(math.pi * t))

    def evaluate(self, request: dict) -> dict:
        gid = request["id"]
        target_epochs = int(request["epochs"])
        checkpoint_id = str(request["checkpoint_id"])
        resume = bool(request["resume"])
        if target_epochs < 1:
            raise BuildError(f"epochs must be >= 1, got {target_epochs}")

        torch.manual_seed(self.seed)
        try:
            model = build_model(request["network"]).to(self.device)
        except (KeyError, TypeError, ValueError) as exc:
            raise BuildError(f"cannot build network: {exc}") from exc
        optimizer = torch.optim.SGD(
            model.parameters(), lr=self.lr, momentum=self.momentum,
            weight_decay=self.weight_decay,
        )

        start_epoch = 0
        path = self._checkpoint_path(checkpoint_id)
        if resume:
            if not path.exists():
                raise BuildError(f"resume requested but no checkpoint {checkpoint_id!r}")
            state = torch.load(path, map_location=self.device, weights_only=True)
            model.load_state_dict(state["model"])
            optimizer.load_state_dict(state["optimizer"])
            start_epoch = int(state["epochs_trained"])
        if start_epoch > target_epochs:
            raise BuildError(
                f"checkpoint {checkpoint_id!r} already at {start_epoch} epochs "
                f"> target {target_epochs}"
            )

        train_loader, val_loader = self._loaders()
        loss_fn = nn.CrossEntropyLoss()
        model.train()
        for epoch in range(start_epoch, target_epochs):
            lr_now = self._lr_at(epoch)
            for group in optimizer.param_groups:
                group["lr"] = lr_now
            for images, labels in train_loader:
                images = images.to(self.device)
                labels = labels.to(self.device)
                optimizer.zero_grad()
                loss = loss_fn(model(images), labels)
                loss.backward()
                optimizer.step()
            logger.info("%s: epoch %d done (lr %.4f)", gid, epoch + 1, lr_now)

        val_error = self._validation_error(model, val_loader)
        torch.save(
            {
                "model": model.state_dict(),
                "optimizer": optimizer.state_dict(),
                "epochs_trained": target_epochs,
            },
            path,
        )
        return {
            "type": "result",
            "id": gid,
            "val_error": val_error,
            "epochs_trained": target_epochs,
            "checkpoint_id": checkpoint_id,
        }

    @torch.no_grad()
    def _validation_error(self, model: nn.Module, val_loader) -> float:
        model.eval()
        correct = total = 0
        for images, labels in val_loader:
            images = images.to(self.device)
            labels = labels.to(self.device)
            predictions = model(images).argmax(dim=1)
            correct += int((predictions == labels).sum())
            total += int(labels.numel())
        model.train()
        return 1.0 - correct / total
