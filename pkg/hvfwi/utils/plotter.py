import os
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
import seaborn as sns
from matplotlib import pyplot as plt

LOG_FILE_NAME = "log.csv"

sns.set_context(context="paper", font_scale=0.68)
sns.set_style("white", {"font.family": "serif"})


def _color_map(labels: List[str], color_map: Optional[Dict] = None) -> Dict:
    if color_map is None:
        color_map = {labels[i]: i % len(sns.color_palette()) for i in range(len(labels))}
    for k in color_map.keys():
        if isinstance(color_map[k], int):
            color_map[k] = sns.color_palette()[color_map[k]]
    return color_map


def _finish(ax, title: Optional[str], xlabel: Optional[str], ylabel: Optional[str]) -> None:
    ax.set_title(title, pad=1)
    ax.tick_params(axis="y", pad=-2, labelsize=5)
    ax.tick_params(axis="x", pad=-2, labelsize=5)
    if xlabel is not None:
        ax.set_xlabel(xlabel)
    if ylabel is not None:
        ax.set_ylabel(ylabel, labelpad=0)
    sns.despine(ax=ax)


def plot_scan(
    scan: Union[str, pd.DataFrame],
    ax=None,
    x_key: Optional[str] = None,
    y_keys: Optional[List[str]] = None,
    normalize: bool = True,
    title: Optional[str] = None,
    color_map: Optional[Dict] = None,
    xlabel: Optional[str] = None,
    ylabel: Optional[str] = None,
) -> None:
    """Plots scan curves from a table whose first column is the scanned parameter."""
    df = pd.read_csv(scan) if isinstance(scan, str) else scan
    ax = plt.gca() if ax is None else ax
    x_key = df.columns[0] if x_key is None else x_key
    y_keys = [c for c in df.columns if c != x_key] if y_keys is None else y_keys
    color_map = _color_map(y_keys, color_map)
    for y_key in y_keys:
        if y_key not in df:
            print("[hvfwi] Warning: y_key", y_key, "was not in the scan, skipping")
            continue
        y = df[y_key].to_numpy()
        if normalize and np.max(np.abs(y)) > 0:
            y = y / np.max(np.abs(y))
        ax.plot(df[x_key], y, color=color_map[y_key], label=y_key)
    ax.legend()
    _finish(ax, title, xlabel if xlabel is not None else x_key, ylabel)


def plot_run(
    paths: List[str],
    name: str,
    ax=None,
    x_key: str = "step",
    y_keys: List[str] = ["misfit"],
    log_scale: bool = False,
    **kwargs,
) -> None:
    for path in paths:
        assert LOG_FILE_NAME in os.listdir(path), "Did not find log file, found " + " ".join(os.listdir(path))
    for y_key in y_keys:
        xs, ys = [], []
        for path in paths:
            df = pd.read_csv(os.path.join(path, LOG_FILE_NAME))
            if y_key not in df:
                print("[hvfwi] Warning: y_key was not in run, skipping plot", path)
                continue
            xs.append(df[x_key].to_numpy())
            ys.append(df[y_key].to_numpy())
        if len(ys) == 0:
            print("[hvfwi] Warning: had no runs for y_key", y_key, "skipping.")
            continue
        plot_df = pd.DataFrame({x_key: np.concatenate(xs), y_key: np.concatenate(ys)})
        label = name + " " + y_key if len(y_keys) > 1 else name
        sns.lineplot(ax=ax, x=x_key, y=y_key, data=plot_df, sort=True, label=label, **kwargs)
        if log_scale:
            (plt.gca() if ax is None else ax).set_yscale("log")


def create_plot(
    paths: List[str],
    labels: List[str],
    ax=None,
    title: Optional[str] = None,
    color_map: Optional[Dict] = None,
    xlabel: Optional[str] = None,
    ylabel: Optional[str] = None,
    **kwargs,
):
    """Residual curves of inversion runs, one line per label."""
    assert len(paths) == len(labels), "The length of paths must the same as the length of labels"
    ax = plt.gca() if ax is None else ax
    color_map = _color_map(labels, color_map)
    for path, label in zip(paths, labels):
        if LOG_FILE_NAME not in os.listdir(path):
            # One sub-directory per metric, as written by the phantom experiment.
            run_paths = [os.path.join(path, run) for run in sorted(os.listdir(path))]
        else:
            run_paths = [path]
        plot_run(run_paths, label, ax=ax, color=color_map[label], **kwargs)
    _finish(ax, title, xlabel, ylabel)
