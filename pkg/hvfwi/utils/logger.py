import csv
import os
from abc import ABC, abstractmethod
from typing import Any, List, Mapping, Sequence


class Writer(ABC):
    def __init__(self, path: str):
        self.path = path
        self.values = {}

    def record(self, key: str, value: Any) -> None:
        self.values[key] = value

    def dump(self, step: int) -> None:
        self._dump(step)

    @abstractmethod
    def _dump(self, step: int) -> None:
        raise NotImplementedError

    @abstractmethod
    def close(self) -> None:
        raise NotImplementedError


class TensorBoardWriter(Writer):
    def __init__(self, path: str):
        super().__init__(path)
        # Imported here so runs that only log to csv never load torch.
        from torch.utils.tensorboard import SummaryWriter

        self.writer = SummaryWriter(self.path)

    def _dump(self, step: int) -> None:
        for k in self.values.keys():
            self.writer.add_scalar(k, self.values[k], step)
        self.writer.flush()
        self.values.clear()

    def close(self) -> None:
        self.writer.close()


class CSVWriter(Writer):
    def __init__(self, path: str):
        super().__init__(path)
        self.csv_file_handler = None
        self.csv_logger = None
        self.fieldnames = []
        self.rows = []

    def _reset_csv_handler(self) -> None:
        if self.csv_file_handler is not None:
            self.csv_file_handler.close()
        self.csv_file_handler = open(os.path.join(self.path, "log.csv"), "w", newline="")
        self.csv_logger = csv.DictWriter(self.csv_file_handler, fieldnames=self.fieldnames, restval="")
        self.csv_logger.writeheader()
        # Rewrite earlier rows so the file always has a single consistent header.
        for row in self.rows:
            self.csv_logger.writerow(row)

    def _dump(self, step: int) -> None:
        self.values["step"] = step
        new_keys = [k for k in self.values.keys() if k not in self.fieldnames]
        if self.csv_logger is None or len(new_keys) > 0:
            self.fieldnames.extend(new_keys)
            self._reset_csv_handler()
        row = dict(self.values)
        self.rows.append(row)
        self.csv_logger.writerow(row)
        self.csv_file_handler.flush()
        self.values.clear()

    def close(self) -> None:
        if self.csv_file_handler is not None:
            self.csv_file_handler.close()


WRITERS = {"tb": TensorBoardWriter, "csv": CSVWriter}


class Logger(object):
    def __init__(self, path: str, writers: Sequence[str] = ("csv",)):
        os.makedirs(path, exist_ok=True)
        self.path = path
        self.writers: List[Writer] = []
        for writer in writers:
            if writer not in WRITERS:
                raise ValueError("Unknown log writer " + repr(writer) + ", expected one of " + str(list(WRITERS)))
            self.writers.append(WRITERS[writer](path))

    def record(self, key: str, value: Any) -> None:
        for writer in self.writers:
            writer.record(key, value)

    def record_dict(self, values: Mapping[str, Any]) -> None:
        for key, value in values.items():
            self.record(key, value)

    def dump(self, step: int) -> None:
        for writer in self.writers:
            writer.dump(step)

    def close(self) -> None:
        for writer in self.writers:
            writer.close()
