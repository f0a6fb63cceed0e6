"""
軌跡ログモジュール
1ティック1行のCSV形式で、列順固定・単位付きヘッダ・17桁精度で保存する
"""

import csv
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np

from leg_kinematics import LEG_NAMES

BASE_COLUMNS = (
    ("t", "s"),
    ("com_x", "m"),
    ("com_y", "m"),
    ("com_z", "m"),
    ("yaw", "rad"),
    ("roll", "rad"),
    ("pitch", "rad"),
    ("cmd_com_x", "m"),
    ("cmd_com_y", "m"),
    ("cmd_com_z", "m"),
    ("v_cmd", "m/s"),
    ("omega_cmd", "rad/s"),
)

LEG_COLUMNS = tuple(
    (f"{leg}_{name}", unit)
    for leg in LEG_NAMES
    for name, unit in (("contact", "1"), ("foot_x", "m"), ("foot_y", "m"), ("foot_z", "m"))
)

COLUMNS = BASE_COLUMNS + LEG_COLUMNS
COLUMN_NAMES = tuple(name for name, _ in COLUMNS)
HEADER = tuple(f"{name}[{unit}]" for name, unit in COLUMNS)


class TrajectoryLog:
    """ティックごとの記録を保持するログ"""

    def __init__(self, records: Sequence[Sequence[float]] = ()):
        self.records: List[List[float]] = []
        for record in records:
            self.append(record)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: Sequence[float]):
        """
        1行追加

        Raises:
            ValueError: 列数が合わない、または時刻が単調増加でない
        """
        if len(record) != len(COLUMNS):
            raise ValueError(f"Record has {len(record)} fields, expected {len(COLUMNS)}")
        if self.records and not record[0] > self.records[-1][0]:
            raise ValueError("Log time stamps must be strictly increasing")
        self.records.append([float(v) for v in record])

    def to_array(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, len(COLUMNS)))
        return np.asarray(self.records, dtype=float)

    def column(self, name: str) -> np.ndarray:
        return self.to_array()[:, COLUMN_NAMES.index(name)]

    def columns(self, *names: str) -> Dict[str, np.ndarray]:
        data = self.to_array()
        return {name: data[:, COLUMN_NAMES.index(name)] for name in names}

    def write_csv(self, path: str):
        """CSVに保存（浮動小数は %.17g）"""
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(HEADER)
            for record in self.records:
                writer.writerow(["%.17g" % value for value in record])

    @classmethod
    def read_csv(cls, path: str) -> "TrajectoryLog":
        """
        CSVを読み込む

        Raises:
            ValueError: ヘッダが既定の列と一致しない
        """
        with open(Path(path), 'r', encoding='utf-8', newline='') as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or tuple(header) != HEADER:
                raise ValueError(f"Unexpected trajectory log header in {path}")
            return cls([float(value) for value in row] for row in reader if row)
