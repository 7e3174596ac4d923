"""
训练运行记录

记录一路流训练的状态与逐 epoch 损失，写出 run.json 与 loss_log.csv。
记录中不含时间戳，相同配置与种子得到逐字节相同的文件。
"""

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional


class RunStatus(Enum):
    """训练状态枚举"""
    STARTING = "starting"  # 初始化中
    RUNNING = "running"    # 训练中
    COMPLETED = "completed"  # 已完成
    ERROR = "error"        # 出错


@dataclass
class EpochLoss:
    """单个 epoch 的平均损失"""
    epoch: int
    mean_loss: float
    mean_main: float
    mean_context: float

    def csv_row(self) -> str:
        return f"{self.epoch},{self.mean_loss:.9g},{self.mean_main:.9g},{self.mean_context:.9g}"


@dataclass
class TrainingRun:
    """一路流的训练过程"""

    stream: str
    num_examples: int = 0
    num_parameters: int = 0
    status: RunStatus = RunStatus.STARTING
    epochs_completed: int = 0
    epoch_log: List[EpochLoss] = field(default_factory=list)
    error: Optional[str] = None

    def __post_init__(self):
        if isinstance(self.status, str):
            self.status = RunStatus(self.status)

    def mark_running(self):
        self.status = RunStatus.RUNNING

    def record_epoch(self, entry: EpochLoss):
        self.epoch_log.append(entry)
        self.epochs_completed = entry.epoch

    def mark_completed(self):
        self.status = RunStatus.COMPLETED

    def mark_error(self, error: str):
        """标记为错误

        Args:
            error: 错误信息
        """
        self.status = RunStatus.ERROR
        self.error = error

    @property
    def final_loss(self) -> Optional[float]:
        return self.epoch_log[-1].mean_loss if self.epoch_log else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "stream": self.stream,
            "status": self.status.value,
            "num_examples": self.num_examples,
            "num_parameters": self.num_parameters,
            "epochs_completed": self.epochs_completed,
            "final_loss": self.final_loss,
            "error": self.error,
        }

    def loss_log_csv(self) -> str:
        lines = ["epoch,mean_loss,mean_Lm,mean_Lc"]
        lines.extend(entry.csv_row() for entry in self.epoch_log)
        return "\n".join(lines) + "\n"

    def save(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "loss_log.csv"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.loss_log_csv())
        with open(os.path.join(out_dir, "run.json"), "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
