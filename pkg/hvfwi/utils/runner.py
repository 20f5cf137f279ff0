"""Builds components from a RunConfig and runs the command-line workflows.

Every workflow returns a flat summary dict. A non-empty "flags" entry marks a result that was
produced but did not converge.
"""
import sys
from typing import Callable, Dict, List, Optional

import numpy as np

import hvfwi
from hvfwi.experiments import (
    count_spurious_extrema,
    count_strict_local_minima,
    phantom_experiment,
    ricker_shift_scan,
    scan_constant_velocity,
    score,
)
from hvfwi.inversion import InversionConfig, add_noise, fwi_invert, measured_snr_db
from hvfwi.metrics import Misfit
from hvfwi.metrics.baselines import w2_misfit_complex, w2_misfit_real
from hvfwi.metrics.hv import ComplexGridSignal, GridSignal, HVParams, hv_distance, hvc_distance
from hvfwi.physics import AcquisitionGeometry, PMLSpec, VelocityModel2D, forward_data

from .config import RunConfig, check_keys, check_kwargs
from .errors import ConfigError
from .io import export_image, read_gathers, read_grid, read_model, read_signal, write_frame, write_gathers, write_grid
from .logger import Logger


def _lookup(module, name: str, section: str):
    try:
        return vars(module)[name]
    except (KeyError, TypeError):
        raise ConfigError("Unknown {} {}".format(section, repr(name)))


def _require_path(config: RunConfig, key: str) -> str:
    path = config["paths"][key]
    if path is None:
        raise ConfigError("paths.{} must be set".format(key))
    return path


def _linspace(spec, section: str) -> np.ndarray:
    """A scan grid given either as a list or as {start, stop, num}."""
    if isinstance(spec, dict):
        check_keys(spec, ("start", "stop", "num"), section)
        return np.linspace(**spec)
    return np.asarray(spec, dtype=np.float64)


def get_frequencies(config: RunConfig, fallback: Optional[List[float]] = None) -> List[float]:
    freqs = config["frequencies"] or fallback
    if not freqs:
        raise ConfigError("frequencies must list at least one frequency")
    return [float(f) for f in freqs]


def get_pml(config: RunConfig) -> PMLSpec:
    check_kwargs(PMLSpec, config["pml_kwargs"], "pml_kwargs")
    return PMLSpec(**config["pml_kwargs"])


def get_model(config: RunConfig, key: str = "model") -> VelocityModel2D:
    """Builds the model by name when one is configured, otherwise reads it from paths.<key>."""
    if config[key] is None:
        return read_model(_require_path(config, key))
    builder = _lookup(hvfwi.physics, config[key], key)
    check_kwargs(builder, config[key + "_kwargs"], key + "_kwargs")
    return builder(**config[key + "_kwargs"])


def get_geometry(config: RunConfig, model: VelocityModel2D) -> AcquisitionGeometry:
    if config["geometry"] is None:
        raise ConfigError("geometry must name an acquisition builder")
    builder = _lookup(hvfwi.physics, config["geometry"], "geometry")
    check_kwargs(builder, config["geometry_kwargs"], "geometry_kwargs", exclude=("model", "peak_frequency_hz"))
    check_keys(config["wavelet_kwargs"], ("peak_frequency_hz",), "wavelet_kwargs")
    return builder(model, **config["geometry_kwargs"], **config["wavelet_kwargs"])


def get_misfit(name: str, kwargs: Dict, section: str = "metric_kwargs") -> Misfit:
    misfit_class = _lookup(hvfwi.metrics, name, "metric")
    if not (isinstance(misfit_class, type) and issubclass(misfit_class, Misfit)):
        raise ConfigError("metric {} is not a misfit".format(repr(name)))
    check_kwargs(misfit_class, kwargs, section)
    return misfit_class(**kwargs)


def get_inversion_config(config: RunConfig, frequencies: List[float]) -> InversionConfig:
    optim_class = _lookup(hvfwi.inversion, config["optim"], "optim")
    check_kwargs(optim_class, config["optim_kwargs"], "optim_kwargs")
    check_kwargs(InversionConfig, config["inversion_kwargs"], "inversion_kwargs", exclude=("optimizer", "pml"))
    kwargs = dict(frequency_schedule=frequencies)
    kwargs.update(config["inversion_kwargs"])
    return InversionConfig(optimizer=optim_class(**config["optim_kwargs"]), pml=get_pml(config), **kwargs)


def _noise_level(config: RunConfig) -> Optional[float]:
    check_kwargs(add_noise, config["noise_kwargs"], "noise_kwargs", exclude=("data", "seed"))
    snr_db = config["noise_kwargs"].get("snr_db")
    return None if snr_db is None else float(snr_db)


def forward(config: RunConfig) -> Dict:
    model = get_model(config, "model")
    if config["model"] is not None and config["paths"]["model"] is not None:
        write_grid(config["paths"]["model"], model)
    geometry = get_geometry(config, model)
    freqs = get_frequencies(config)
    gathers = forward_data(model, geometry, freqs, get_pml(config))
    snr_db = _noise_level(config)
    if snr_db is not None:
        gathers = add_noise(gathers, snr_db, seed=config["seed"])
    path = _require_path(config, "data")
    write_gathers(path, gathers, geometry)
    return dict(
        command="forward",
        data=path,
        n_sources=geometry.n_sources,
        n_receivers=geometry.n_receivers,
        freqs_hz=freqs,
        snr_db=snr_db,
        flags=[],
    )


def invert(config: RunConfig) -> Dict:
    observed, geometry = read_gathers(_require_path(config, "data"))
    initial_model = get_model(config, "initial_model")
    freqs = get_frequencies(config, fallback=sorted(set(g.freq_hz for g in observed)))
    misfit = get_misfit(config["metric"], config["metric_kwargs"])
    inversion_config = get_inversion_config(config, freqs)
    output = _require_path(config, "output")

    logger = None
    if config["paths"]["logs"] is not None:
        logger = Logger(config["paths"]["logs"], writers=config["writers"])
        config.save(config["paths"]["logs"])
    print("[hvfwi] Inverting with", type(misfit).__name__, "over", freqs, "Hz", file=sys.stderr)
    try:
        report = fwi_invert(initial_model, observed, geometry, misfit, inversion_config, logger=logger)
    finally:
        if logger is not None:
            logger.close()
    write_grid(output, report.final_model)

    summary = dict(
        command="invert",
        output=output,
        metric=config["metric"],
        iterations=sum(1 for record in report.history if record["iteration"] > 0),
        initial_misfit=report.misfits[0] if len(report.misfits) > 0 else None,
        final_misfit=report.misfits[-1] if len(report.misfits) > 0 else None,
        seconds=float(sum(report.stage_seconds.values())),
        warnings=report.warnings,
        flags=report.flags,
    )
    if config["paths"]["reference"] is not None:
        quality = score(report.final_model, read_model(config["paths"]["reference"]))
        summary.update(rmse=quality.rmse, psnr=quality.psnr)
    return summary


def _read_pair(config: RunConfig):
    a, step = read_signal(_require_path(config, "signal_a"))
    b, _ = read_signal(_require_path(config, "signal_b"))
    if a.shape != b.shape:
        raise ConfigError("signal_a and signal_b must have the same length")
    return a, b, step


def hv_dist(config: RunConfig) -> Dict:
    check_kwargs(HVParams, config["metric_kwargs"], "metric_kwargs")
    params = HVParams(**config["metric_kwargs"])
    a, b, step = _read_pair(config)
    if np.iscomplexobj(a) or np.iscomplexobj(b):
        distance, re_result, im_result = hvc_distance(
            ComplexGridSignal.from_array(a, step=step), ComplexGridSignal.from_array(b, step=step), params
        )
        results = [re_result, im_result]
    else:
        result = hv_distance(GridSignal(a, step=step), GridSignal(b, step=step), params)
        distance, results = result.distance, [result]
    converged = all(r.converged for r in results)
    return dict(
        command="hv-dist",
        distance=float(distance),
        action=float(sum(r.action for r in results)),
        iterations=int(sum(r.iterations for r in results)),
        converged=converged,
        flags=[] if converged else ["hv_not_converged"],
    )


def w2_dist(config: RunConfig) -> Dict:
    check_kwargs(hvfwi.metrics.W2, config["metric_kwargs"], "metric_kwargs")
    a, b, _ = _read_pair(config)
    if np.iscomplexobj(a) or np.iscomplexobj(b):
        result = w2_misfit_complex(a, b, **config["metric_kwargs"])
    else:
        result = w2_misfit_real(a, b, **config["metric_kwargs"])
    return dict(command="w2-dist", w2_squared=result.value, distance=float(np.sqrt(result.value)), flags=[])


def _scan_metrics(config: RunConfig, spec: Optional[Dict]) -> Dict[str, Misfit]:
    if spec is None:
        return {config["metric"].lower(): get_misfit(config["metric"], config["metric_kwargs"])}
    metrics = {}
    for label, entry in spec.items():
        check_keys(entry, ("metric", "metric_kwargs"), "scan_kwargs.metrics." + label)
        if "metric" not in entry:
            raise ConfigError("scan_kwargs.metrics.{} must name a metric".format(label))
        metrics[label] = get_misfit(entry["metric"], entry.get("metric_kwargs") or {}, "scan_kwargs.metrics." + label)
    return metrics


def scan_velocity(config: RunConfig) -> Dict:
    kwargs = dict(config["scan_kwargs"])
    check_kwargs(scan_constant_velocity, kwargs, "scan_kwargs", exclude=("pml",))
    if "c_values" not in kwargs or "c_star" not in kwargs:
        raise ConfigError("scan_kwargs must set c_values and c_star")
    kwargs["c_values"] = _linspace(kwargs["c_values"], "scan_kwargs.c_values")
    kwargs["metrics"] = _scan_metrics(config, kwargs.get("metrics"))
    if "freq_hz" not in kwargs and len(config["frequencies"]) > 0:
        kwargs["freq_hz"] = float(config["frequencies"][0])
    result = scan_constant_velocity(pml=get_pml(config), **kwargs)
    output = _require_path(config, "output")
    write_frame(output, result.to_frame())
    return dict(
        command="scan-velocity",
        output=output,
        argmin={label: result.argmin(label) for label in result.curves},
        spurious_extrema={label: count_spurious_extrema(values) for label, values in result.curves.items()},
        warnings=result.warnings,
        flags=[],
    )


def scan_ricker(config: RunConfig) -> Dict:
    kwargs = dict(config["scan_kwargs"])
    check_kwargs(ricker_shift_scan, kwargs, "scan_kwargs")
    if "shift_values" not in kwargs:
        raise ConfigError("scan_kwargs must set shift_values")
    kwargs["shift_values"] = _linspace(kwargs["shift_values"], "scan_kwargs.shift_values")
    param_sets = kwargs.get("hv_param_sets") or [dict()]
    for params in param_sets:
        check_kwargs(HVParams, params, "scan_kwargs.hv_param_sets")
    kwargs["hv_param_sets"] = param_sets
    result = ricker_shift_scan(**kwargs)
    output = _require_path(config, "output")
    write_frame(output, result.to_frame())
    return dict(
        command="scan-ricker",
        output=output,
        local_minima={label: count_strict_local_minima(values) for label, values in result.curves.items()},
        warnings=result.warnings,
        flags=[],
    )


def noise(config: RunConfig) -> Dict:
    snr_db = _noise_level(config)
    if snr_db is None:
        raise ConfigError("noise_kwargs.snr_db must be set")
    gathers, geometry = read_gathers(_require_path(config, "data"))
    noisy = add_noise(gathers, snr_db, seed=config["seed"])
    output = _require_path(config, "output")
    write_gathers(output, noisy, geometry)
    clean = np.concatenate([g.values for g in gathers])
    measured = measured_snr_db(clean, np.concatenate([g.values for g in noisy])) if np.isfinite(snr_db) else snr_db
    return dict(command="noise", output=output, snr_db=snr_db, measured_snr_db=float(measured), flags=[])


def score_models(config: RunConfig) -> Dict:
    model = read_grid(_require_path(config, "model"))
    reference = read_grid(_require_path(config, "reference"))
    quality = score(model.values, reference.values)
    return dict(command="score", flags=[], **quality.to_dict())


def export(config: RunConfig) -> Dict:
    output = _require_path(config, "output")
    low, high = export_image(read_grid(_require_path(config, "model")), output)
    return dict(command="export-image", output=output, min=low, max=high, flags=[])


def phantom(config: RunConfig) -> Dict:
    if config["model"] not in (None, "gaussian_inclusion_model"):
        raise ConfigError("The phantom experiment builds gaussian_inclusion_model, got " + repr(config["model"]))
    check_kwargs(hvfwi.physics.gaussian_inclusion_model, config["model_kwargs"], "model_kwargs")
    modes = dict(ring_geometry="ring", line_geometry="line")
    if config["geometry"] not in modes:
        raise ConfigError("geometry must be ring_geometry or line_geometry for the phantom experiment")
    builder = _lookup(hvfwi.physics, config["geometry"], "geometry")
    check_kwargs(builder, config["geometry_kwargs"], "geometry_kwargs", exclude=("model",))
    misfit = get_misfit(config["metric"], config["metric_kwargs"])
    outcomes = phantom_experiment(
        phantom_spec=config["model_kwargs"],
        geometry_mode=modes[config["geometry"]],
        metrics={config["metric"].lower(): misfit},
        snr_db=_noise_level(config),
        seed=config["seed"],
        config=get_inversion_config(config, get_frequencies(config)),
        geometry_kwargs=dict(config["geometry_kwargs"], **config["wavelet_kwargs"]),
        log_path=config["paths"]["logs"],
    )
    outcome = outcomes[config["metric"].lower()]
    if config["paths"]["output"] is not None:
        write_grid(config["paths"]["output"], outcome.report.final_model)
    return dict(
        command="phantom",
        metric=config["metric"],
        initial_rmse=outcome.initial_score.rmse,
        rmse=outcome.score.rmse,
        psnr=outcome.score.psnr,
        rmse_ratio=outcome.rmse_ratio,
        seconds=outcome.seconds,
        warnings=outcome.report.warnings,
        flags=outcome.report.flags,
    )


WORKFLOWS: Dict[str, Callable[[RunConfig], Dict]] = {
    "forward": forward,
    "invert": invert,
    "hv-dist": hv_dist,
    "w2-dist": w2_dist,
    "scan-velocity": scan_velocity,
    "scan-ricker": scan_ricker,
    "noise": noise,
    "score": score_models,
    "export-image": export,
    "phantom": phantom,
}
