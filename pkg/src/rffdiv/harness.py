"""End-to-end experiment orchestration.

Reproduces the cross-receiver evaluation protocol in simulation: simulate
per-device captures through per-link channels, run the acquisition chain,
extract fingerprints, train per train-receiver set, and evaluate on test
receivers. Every random draw derives from the master seed through a
documented splittable scheme, so a rerun with the same config produces a
byte-identical report.

Seed scheme: every consumer builds
`numpy.random.SeedSequence((master_seed, stream, repeat, device_idx,
receiver_idx, frame_idx))`, where `stream` distinguishes channel draws,
noise, start jitter, and model-capture variants. Devices and receivers are
indexed by their position in the config.

Reference-division protocol: each receiver's model spectra come from a
fresh capture of the reference device made through that same receiver
(the run loop asserts the pairing structurally); model captures refresh per
repeat and are never shared across receivers.

Frames that fail detection, sync, or hit a degenerate denominator are
dropped and counted; drop rates are first-class outputs. Within each
(device, receiver) cell the first half of the frame indices feeds the
training pool and the second half the test pool, so same-receiver cells
stay honest.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as scipy_stats

from . import classify as cl
from . import data_io
from .channel import ChannelKind, ChannelRealization, apply_channel, sample_channel
from .features import (
    Extractor,
    FeatureVector,
    Field,
    centered_cosine_similarity,
    cosine_similarity,
    extract_dv,
    extract_hl,
    extract_rd,
    field_spectrum,
)
from .impairments import DeviceProfile, Role, apply_receiver, apply_transmitter, sample_profile
from .preprocess import (
    DetectionConfig,
    EstimationFailedError,
    NotDetectedError,
    SyncFailedError,
    noise_floor_threshold,
    synchronize_and_compensate,
)
from .refselect import eta_lf
from .signals import ComplexSignal
from .waveform import PreambleFormat, PreambleSpec, generate_preamble, occupied_tones, tone_to_bin


class ConfigError(ValueError):
    pass


class PipelineError(RuntimeError):
    pass


# Channel parameter presets behind the scenario labels. Static scenarios
# hold one realization per (device, receiver) link for a whole repeat;
# "mobile" redraws per frame.
SCENARIOS = {
    "flat": {"kind": "flat"},
    "los": {"kind": "selective", "n_taps": 4, "decay": 0.8, "rice_k_db": 10.0},
    "nlos": {"kind": "selective", "n_taps": 8, "decay": 3.0, "rice_k_db": None},
    "mobile": {"kind": "selective", "n_taps": 8, "decay": 3.0, "rice_k_db": None,
               "per_frame": True},
    "corridor": {"kind": "selective", "n_taps": 6, "decay": 1.5, "rice_k_db": 5.0},
}

# Stream tags for the seed scheme.
_S_CHANNEL = 1
_S_NOISE = 2
_S_JITTER = 3
_S_MODEL_CHANNEL = 4
_S_MODEL_NOISE = 5

LEAD_PAD = 256
TAIL_PAD = 120
MAX_JITTER = 40
MODEL_CAPTURE_ATTEMPTS = 8


def derive_seed(master: int, stream: int, repeat: int = 0, device: int = 0,
                receiver: int = 0, frame: int = 0) -> int:
    ss = np.random.SeedSequence((master, stream, repeat, device, receiver, frame))
    return int(ss.generate_state(1)[0])


@dataclass(frozen=True)
class ExperimentConfig:
    master_seed: int
    devices: list
    receivers: list
    extractors: list
    train_receivers: list
    test_receivers: list
    snr_db: list
    channel: dict = field(default_factory=lambda: {"scenario": "flat"})
    reference_device: dict | None = None
    frames_per_device: int = 200
    repeats: int = 5
    classifier: cl.TrainConfig = field(default_factory=cl.TrainConfig)
    detection_window: int = 80
    detection_multiplier: float = 6.0
    detection_metric: str = "magnitude"

    def scenario(self) -> str:
        return self.channel.get("scenario", "flat")


# Explicit per-profile keys the config may carry instead of (or on top of)
# a draw seed. Complex values are written as [real, imag] pairs.
_PROFILE_KEYS = ("dc_offset", "iq_gain_imbalance", "iq_phase_imbalance",
                 "fir_taps", "pa_coeffs", "cfo_hz", "band_tilt")


def _expand_entities(spec, prefix: str) -> list[dict]:
    """Device/receiver lists may be explicit dicts or a {count, base_seed}
    shorthand."""
    if isinstance(spec, dict):
        count = int(spec["count"])
        base = int(spec.get("base_seed", 0))
        fd = bool(spec.get("field_distinct", False))
        return [
            {"id": f"{prefix}{i:02d}", "seed": base + i, "field_distinct": fd}
            for i in range(count)
        ]
    out = []
    for i, d in enumerate(spec):
        d = dict(d)
        d.setdefault("id", f"{prefix}{i:02d}")
        if "seed" not in d and not any(k in d for k in _PROFILE_KEYS):
            raise ConfigError(f"{prefix} entry {i} needs a seed or explicit parameters")
        out.append(d)
    return out


def load_config(doc: dict) -> ExperimentConfig:
    """Validate a config document and normalize its shorthands."""
    try:
        devices = _expand_entities(doc["devices"], "dev")
        receivers = _expand_entities(doc["receivers"], "rx")
        extractors = [str(e).upper() for e in doc.get("extractors", ["RD", "HL", "DV"])]
        snr = doc.get("snr_db", 30.0)
        snr_list = [float(s) for s in (snr if isinstance(snr, (list, tuple)) else [snr])]
        train = doc.get("train_receivers") or [receivers[0]["id"]]
        test = doc.get("test_receivers") or [r["id"] for r in receivers]
        cfg = ExperimentConfig(
            master_seed=int(doc["master_seed"]),
            devices=devices,
            receivers=receivers,
            extractors=extractors,
            train_receivers=list(train),
            test_receivers=[str(t) for t in test],
            snr_db=snr_list,
            channel=dict(doc.get("channel", {"scenario": "flat"})),
            reference_device=doc.get("reference_device"),
            frames_per_device=int(doc.get("frames_per_device", 200)),
            repeats=int(doc.get("repeats", 5)),
            classifier=cl.TrainConfig(**doc.get("classifier", {})),
            detection_window=int(doc.get("detection", {}).get("window_w", 80)),
            detection_multiplier=float(doc.get("detection", {}).get("threshold_multiplier", 6.0)),
            detection_metric=str(doc.get("detection", {}).get("metric", "magnitude")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad experiment config: {exc}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if len(cfg.devices) < 2:
        raise ConfigError("need at least two devices")
    if not cfg.receivers:
        raise ConfigError("need at least one receiver")
    known = {e.value for e in Extractor} | {"RD"}
    for e in cfg.extractors:
        if e not in known:
            raise ConfigError(f"unknown extractor {e!r}")
    if any(e in ("RD", "RD_STF", "RD_LTF") for e in cfg.extractors) and not cfg.reference_device:
        raise ConfigError("reference-division extraction needs a reference_device")
    if cfg.scenario() not in SCENARIOS:
        raise ConfigError(f"unknown channel scenario {cfg.scenario()!r}")
    rx_ids = {r["id"] for r in cfg.receivers}
    for entry in cfg.train_receivers:
        ids = entry if isinstance(entry, (list, tuple)) else [entry]
        for rid in ids:
            if rid not in rx_ids:
                raise ConfigError(f"train receiver {rid!r} not in receivers")
    for rid in cfg.test_receivers:
        if rid not in rx_ids:
            raise ConfigError(f"test receiver {rid!r} not in receivers")
    if cfg.frames_per_device < 2:
        raise ConfigError("frames_per_device must be at least 2")
    if cfg.repeats < 1:
        raise ConfigError("repeats must be at least 1")
    if cfg.reference_device is not None and "seed" not in cfg.reference_device \
            and not any(k in cfg.reference_device for k in _PROFILE_KEYS):
        raise ConfigError("reference_device needs a seed or explicit parameters")


def _as_complex(v):
    return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)


def profile_from_entry(entry: dict, role: str, default_field_distinct: bool) -> DeviceProfile:
    """Build a profile from a config entry: a drawn profile when only a
    seed is given, with any explicit impairment keys overriding the draw."""
    explicit = {k: entry[k] for k in _PROFILE_KEYS if k in entry}
    base = sample_profile(
        int(entry.get("seed", 0)), role,
        field_distinct=bool(entry.get("field_distinct", default_field_distinct)),
        device_id=entry.get("id", "dev"),
    )
    if not explicit:
        return base
    kwargs = {
        "device_id": base.device_id,
        "dc_offset": base.dc_offset,
        "iq_gain_imbalance": base.iq_gain_imbalance,
        "iq_phase_imbalance": base.iq_phase_imbalance,
        "fir_taps": base.fir_taps,
        "pa_coeffs": base.pa_coeffs,
        "cfo_hz": base.cfo_hz,
        "band_tilt": base.band_tilt,
        "seed": base.seed,
    }
    if "dc_offset" in explicit:
        kwargs["dc_offset"] = _as_complex(explicit["dc_offset"])
    for key in ("iq_gain_imbalance", "iq_phase_imbalance", "cfo_hz"):
        if key in explicit:
            kwargs[key] = float(explicit[key])
    for key in ("fir_taps", "pa_coeffs"):
        if key in explicit:
            kwargs[key] = np.array([_as_complex(v) for v in explicit[key]])
    if "band_tilt" in explicit:
        tilt = explicit["band_tilt"]
        kwargs["band_tilt"] = None if tilt is None else np.asarray(tilt, dtype=float)
    return DeviceProfile(**kwargs)


def profile_to_entry(profile: DeviceProfile) -> dict:
    """Config-schema form of a profile (round-trips through
    `profile_from_entry`)."""
    return {
        "id": profile.device_id,
        "seed": profile.seed,
        "dc_offset": [profile.dc_offset.real, profile.dc_offset.imag],
        "iq_gain_imbalance": profile.iq_gain_imbalance,
        "iq_phase_imbalance": profile.iq_phase_imbalance,
        "fir_taps": [[t.real, t.imag] for t in profile.fir_taps],
        "pa_coeffs": [[c.real, c.imag] for c in profile.pa_coeffs],
        "cfo_hz": profile.cfo_hz,
        "band_tilt": None if profile.band_tilt is None else profile.band_tilt.tolist(),
    }


def _profiles(cfg: ExperimentConfig):
    devices = [
        profile_from_entry(d, Role.TRANSMITTER, default_field_distinct=True)
        for d in cfg.devices
    ]
    receivers = [
        profile_from_entry(r, Role.RECEIVER, default_field_distinct=False)
        for r in cfg.receivers
    ]
    reference = None
    if cfg.reference_device:
        reference = profile_from_entry(
            {**cfg.reference_device, "id": cfg.reference_device.get("id", "ref")},
            Role.TRANSMITTER, default_field_distinct=False,
        )
    return devices, receivers, reference


def _draw_channel(cfg: ExperimentConfig, snr_db: float, seed: int) -> ChannelRealization:
    params = SCENARIOS[cfg.scenario()] | {
        k: v for k, v in cfg.channel.items() if k not in ("scenario",)
    }
    if params["kind"] == "flat":
        return sample_channel(ChannelKind.FLAT, snr_db, seed)
    return sample_channel(
        ChannelKind.SELECTIVE, snr_db, seed,
        n_taps=int(params.get("n_taps", 4)),
        decay=float(params.get("decay", 1.0)),
        rice_k_db=params.get("rice_k_db"),
    )


def _channel_per_frame(cfg: ExperimentConfig) -> bool:
    preset = SCENARIOS[cfg.scenario()].get("per_frame", False)
    return bool(cfg.channel.get("per_frame", preset))


_FRAME = generate_preamble(PreambleSpec(PreambleFormat.HTMF))


def simulate_capture(
    tx: DeviceProfile,
    rx: DeviceProfile,
    chan: ChannelRealization,
    noise_seed: int,
    jitter_seed: int,
) -> tuple[ComplexSignal, int]:
    """One frame: pad with a randomized lead gap, run transmitter, channel
    with fresh noise, receiver. Returns the capture and the true frame
    start (for diagnostics; the pipeline re-estimates it)."""
    jitter = int(np.random.default_rng(jitter_seed).integers(0, MAX_JITTER + 1))
    lead = LEAD_PAD + jitter
    x = apply_transmitter(tx, _FRAME)
    padded = ComplexSignal(
        np.concatenate([
            np.zeros(lead, dtype=np.complex128),
            x.samples,
            np.zeros(TAIL_PAD, dtype=np.complex128),
        ]),
        x.sample_rate,
    )
    y = apply_channel(chan, padded, noise_rng=np.random.default_rng(noise_seed))
    return apply_receiver(rx, y), lead


_DROP_ERRORS = (NotDetectedError, SyncFailedError, EstimationFailedError, ValueError)


def acquire_spectra(capture: ComplexSignal, cfg: ExperimentConfig, fields) -> dict:
    """Detection through field spectra; raises the pipeline errors the
    caller counts as drops."""
    thr = noise_floor_threshold(capture, cfg.detection_window, cfg.detection_multiplier,
                                cfg.detection_metric)
    det = DetectionConfig(cfg.detection_window, thr, cfg.detection_metric)
    compensated, sync, _ = synchronize_and_compensate(capture, det)
    return {f: field_spectrum(compensated, sync.frame_start_n1, f) for f in fields}


@dataclass
class ModelCapture:
    """Reference-device spectra captured through one specific receiver."""

    receiver_id: str
    spectra: dict
    lltf_csi: np.ndarray
    attempts: int


def _capture_model(cfg, reference, rx_profile, rx_idx, repeat, snr_db) -> ModelCapture:
    for attempt in range(MODEL_CAPTURE_ATTEMPTS):
        ch_seed = derive_seed(cfg.master_seed, _S_MODEL_CHANNEL, repeat, attempt, rx_idx)
        chan = _draw_channel(cfg, snr_db, ch_seed)
        noise_seed = derive_seed(cfg.master_seed, _S_MODEL_NOISE, repeat, attempt, rx_idx)
        jitter_seed = derive_seed(cfg.master_seed, _S_JITTER, repeat, attempt, rx_idx, 999)
        capture, _ = simulate_capture(reference, rx_profile, chan, noise_seed, jitter_seed)
        try:
            spectra = acquire_spectra(capture, cfg, (Field.LSTF, Field.LLTF))
        except _DROP_ERRORS:
            continue
        bins = tone_to_bin(occupied_tones(Field.LLTF))
        csi = np.abs(spectra[Field.LLTF].bins[bins])
        return ModelCapture(rx_profile.device_id, spectra, csi, attempt + 1)
    raise PipelineError(
        f"model capture failed {MODEL_CAPTURE_ATTEMPTS} times on {rx_profile.device_id}"
    )


def _extract_all(spectra: dict, extractors, model: ModelCapture | None,
                 rx_id: str, device_id: str) -> dict[str, FeatureVector]:
    out = {}
    if any(e in ("RD", "RD_STF", "RD_LTF") for e in extractors):
        if model is None:
            raise PipelineError("reference-division extraction without a model capture")
        # structural isolation: the model must have been captured through
        # the receiver whose frames it divides
        assert model.receiver_id == rx_id, (model.receiver_id, rx_id)
        out["RD_STF"] = extract_rd(spectra[Field.LSTF], model.spectra[Field.LSTF], device_id)
        out["RD_LTF"] = extract_rd(spectra[Field.LLTF], model.spectra[Field.LLTF], device_id)
    if "HL" in extractors:
        out["HL"] = extract_hl(spectra[Field.LLTF], spectra[Field.HTLTF], device_id)
    if "DV" in extractors:
        out["DV"] = extract_dv(spectra[Field.LSTF], spectra[Field.LLTF], device_id)
    return out


@dataclass
class ExperimentReport:
    config: dict
    cells: list
    drop_rates: dict
    feature_records: dict
    model_info: dict

    def to_json_doc(self) -> dict:
        return {
            "format_version": 1,
            "config": self.config,
            "cells": self.cells,
            "drop_rates": self.drop_rates,
            "model_info": self.model_info,
        }


def _config_doc(cfg: ExperimentConfig) -> dict:
    doc = asdict(cfg)
    doc["classifier"] = asdict(cfg.classifier)
    return doc


def _needed_fields(extractors) -> tuple:
    fields = set()
    if any(e in ("RD", "RD_STF", "RD_LTF") for e in extractors):
        fields.update((Field.LSTF, Field.LLTF))
    if "HL" in extractors:
        fields.update((Field.LLTF, Field.HTLTF))
    if "DV" in extractors:
        fields.update((Field.LSTF, Field.LLTF))
    return tuple(sorted(fields, key=lambda f: f.value))


def _simulate_cells(cfg, devices, receivers, reference, snr_db, repeat):
    """All successful frames for one (snr, repeat): returns
    {(dev_id, rx_id): [(frame_idx, {tag: FeatureVector})]}, drop counts,
    and the per-receiver model captures."""
    per_frame_channel = _channel_per_frame(cfg)
    fields = _needed_fields(cfg.extractors)
    models: dict[str, ModelCapture] = {}
    if reference is not None and any(e.startswith("RD") for e in cfg.extractors):
        for rj, rx in enumerate(receivers):
            models[rx.device_id] = _capture_model(cfg, reference, rx, rj, repeat, snr_db)
    features = {}
    drops = {}
    for di, dev in enumerate(devices):
        for rj, rx in enumerate(receivers):
            got = []
            dropped = 0
            link_seed = derive_seed(cfg.master_seed, _S_CHANNEL, repeat, di, rj)
            link_channel = None if per_frame_channel else _draw_channel(cfg, snr_db, link_seed)
            for fi in range(cfg.frames_per_device):
                chan = (
                    _draw_channel(
                        cfg, snr_db, derive_seed(cfg.master_seed, _S_CHANNEL, repeat, di, rj, fi)
                    )
                    if per_frame_channel
                    else link_channel
                )
                noise_seed = derive_seed(cfg.master_seed, _S_NOISE, repeat, di, rj, fi)
                jitter_seed = derive_seed(cfg.master_seed, _S_JITTER, repeat, di, rj, fi)
                capture, _ = simulate_capture(dev, rx, chan, noise_seed, jitter_seed)
                try:
                    spectra = acquire_spectra(capture, cfg, fields)
                    feats = _extract_all(
                        spectra, cfg.extractors, models.get(rx.device_id),
                        rx.device_id, dev.device_id,
                    )
                except _DROP_ERRORS:
                    dropped += 1
                    continue
                got.append((fi, feats))
            features[(dev.device_id, rx.device_id)] = got
            drops[(dev.device_id, rx.device_id)] = dropped
    return features, drops, models


def _branch_tags(extractor: str):
    return ("RD_STF", "RD_LTF") if extractor == "RD" else (extractor,)


def _train_eval(cfg, features, extractor, train_ids, test_id):
    """Train on the train receivers' first-half frames, evaluate on the test
    receiver's second-half frames."""
    half = cfg.frames_per_device // 2
    tags = _branch_tags(extractor)
    train_feats = {t: [] for t in tags}
    for (dev_id, rx_id), frames in features.items():
        if rx_id not in train_ids:
            continue
        for fi, feats in frames:
            if fi < half:
                for t in tags:
                    train_feats[t].append(feats[t])
    test_pairs = []
    for (dev_id, rx_id), frames in features.items():
        if rx_id != test_id:
            continue
        for fi, feats in frames:
            if fi >= half:
                test_pairs.append(tuple(feats[t] for t in tags))
    if any(not v for v in train_feats.values()) or not test_pairs:
        raise PipelineError(
            f"empty train or test pool for extractor {extractor} "
            f"(train={train_ids}, test={test_id})"
        )
    models = [cl.train(train_feats[t], cfg.classifier) for t in tags]
    if len(models) == 2:
        return cl.evaluate_fused(tuple(models), test_pairs)
    return cl.evaluate(models[0], [p[0] for p in test_pairs])


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Full grid: per (snr, extractor, train set, test receiver) accuracy,
    aggregated as mean and sample std over the repeats."""
    validate_config(cfg)
    devices, receivers, reference = _profiles(cfg)
    cells_acc = {}
    drop_acc = {}
    feature_records = {}
    model_info = {}
    for snr in cfg.snr_db:
        for rep in range(cfg.repeats):
            features, drops, models = _simulate_cells(
                cfg, devices, receivers, reference, snr, rep
            )
            for key, n_drop in drops.items():
                drop_acc.setdefault((snr,) + key, []).append(n_drop / cfg.frames_per_device)
            for rx_id, mc in models.items():
                model_info.setdefault(f"snr{snr:g}/{rx_id}", []).append(
                    {"attempts": mc.attempts, "eta_lf": eta_lf(mc.lltf_csi).eta_lf}
                )
            for (dev_id, rx_id), frames in features.items():
                for fi, feats in frames:
                    for tag, fv in feats.items():
                        feature_records.setdefault(tag, []).append(
                            data_io.FeatureRecord(
                                extractor=tag, device=dev_id, receiver=rx_id,
                                channel_scenario=cfg.scenario(),
                                trial=rep * cfg.frames_per_device + fi,
                                snr_db=snr, values=fv.values,
                            )
                        )
            for extractor in cfg.extractors:
                for train_entry in cfg.train_receivers:
                    train_ids = (
                        set(train_entry) if isinstance(train_entry, (list, tuple))
                        else {train_entry}
                    )
                    train_label = "+".join(sorted(train_ids))
                    for test_id in cfg.test_receivers:
                        acc = _train_eval(cfg, features, extractor, train_ids, test_id)
                        cells_acc.setdefault(
                            (snr, extractor, train_label, test_id), []
                        ).append(acc)
    cells = [
        {
            "snr_db": snr,
            "extractor": ext,
            "train": train_label,
            "test": test_id,
            "mean_accuracy": float(np.mean(accs)),
            "std_accuracy": float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0,
            "repeats": len(accs),
        }
        for (snr, ext, train_label, test_id), accs in sorted(cells_acc.items())
    ]
    drop_rates = {
        f"snr{snr:g}/{dev}/{rx}": float(np.mean(rates))
        for (snr, dev, rx), rates in sorted(drop_acc.items())
    }
    return ExperimentReport(
        config=_config_doc(cfg),
        cells=cells,
        drop_rates=drop_rates,
        feature_records=feature_records,
        model_info={k: v for k, v in sorted(model_info.items())},
    )


def run_feature_stability(cfg: ExperimentConfig) -> dict:
    """Per-device, per-extractor similarity statistics.

    A stability trial always redraws the channel (a trial means an
    independent capture), so the statistics measure robustness to both
    noise and channel variation. Two pair populations are reported:
    `cross_receiver` (pairs from different receivers) and `trial_to_trial`
    (same receiver, different frames); each carries the plain cosine and
    the mean-centered cosine. Plain cosine of nonnegative unit vectors is
    dominated by the shared flat component, so the centered variant is the
    discriminative stability measure.
    """
    validate_config(cfg)
    devices, receivers, reference = _profiles(cfg)
    fields = _needed_fields(cfg.extractors)
    snr = cfg.snr_db[0]
    models = {}
    if reference is not None and any(e.startswith("RD") for e in cfg.extractors):
        for rj, rx in enumerate(receivers):
            models[rx.device_id] = _capture_model(cfg, reference, rx, rj, 0, snr)
    out = {"snr_db": snr, "scenario": cfg.scenario(), "devices": {}}
    for di, dev in enumerate(devices):
        per_rx = {}
        drops = 0
        for rj, rx in enumerate(receivers):
            feats = []
            for fi in range(cfg.frames_per_device):
                chan = _draw_channel(
                    cfg, snr, derive_seed(cfg.master_seed, _S_CHANNEL, 0, di, rj, fi)
                )
                noise_seed = derive_seed(cfg.master_seed, _S_NOISE, 0, di, rj, fi)
                jitter_seed = derive_seed(cfg.master_seed, _S_JITTER, 0, di, rj, fi)
                capture, _ = simulate_capture(dev, rx, chan, noise_seed, jitter_seed)
                try:
                    spectra = acquire_spectra(capture, cfg, fields)
                    feats.append(_extract_all(
                        spectra, cfg.extractors, models.get(rx.device_id),
                        rx.device_id, dev.device_id,
                    ))
                except _DROP_ERRORS:
                    drops += 1
            per_rx[rx.device_id] = feats
        tags = set()
        for feats in per_rx.values():
            for f in feats:
                tags.update(f.keys())
        dev_stats = {}
        for tag in sorted(tags):
            flat = [
                (rx_id, f[tag]) for rx_id, feats in per_rx.items() for f in feats if tag in f
            ]
            cross_p, cross_c, same_p, same_c = [], [], [], []
            for i in range(len(flat)):
                for j in range(i + 1, len(flat)):
                    p = cosine_similarity(flat[i][1], flat[j][1])
                    c = centered_cosine_similarity(flat[i][1], flat[j][1])
                    if flat[i][0] == flat[j][0]:
                        same_p.append(p)
                        same_c.append(c)
                    else:
                        cross_p.append(p)
                        cross_c.append(c)
            dev_stats[tag] = {
                "cross_receiver": {
                    "plain": float(np.mean(cross_p)) if cross_p else None,
                    "centered": float(np.mean(cross_c)) if cross_c else None,
                },
                "trial_to_trial": {
                    "plain": float(np.mean(same_p)) if same_p else None,
                    "centered": float(np.mean(same_c)) if same_c else None,
                },
            }
        out["devices"][dev.device_id] = {"stats": dev_stats, "drops": drops}
    tags = sorted({t for d in out["devices"].values() for t in d["stats"]})
    out["mean"] = {
        tag: {
            pop: {
                kind: float(np.mean([
                    d["stats"][tag][pop][kind]
                    for d in out["devices"].values()
                    if d["stats"].get(tag, {}).get(pop, {}).get(kind) is not None
                ]))
                for kind in ("plain", "centered")
            }
            for pop in ("cross_receiver", "trial_to_trial")
        }
        for tag in tags
    }
    return out


def pearson_r_p(x, y) -> tuple[float, float]:
    """Two-sided Pearson correlation; degenerate (constant) inputs report
    r=0, p=1 instead of NaN."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ConfigError("Pearson p-value needs at least 3 points")
    if np.std(x) == 0.0 or np.std(y) == 0.0:
        return 0.0, 1.0
    r, p = scipy_stats.pearsonr(x, y)
    return float(r), float(p)


def run_reference_sweep(cfg: ExperimentConfig, candidates) -> dict:
    """Repeat the reference-division experiment once per candidate reference
    device and correlate each candidate's low-frequency energy ratio with
    its mean accuracy."""
    cands = _expand_entities(candidates, "cand")
    if len(cands) < 3:
        raise ConfigError("reference sweep needs at least 3 candidates")
    rows = []
    for cand in cands:
        base = asdict(cfg)
        base["classifier"] = cfg.classifier
        base["reference_device"] = cand
        base["extractors"] = ["RD"]
        report = run_experiment(ExperimentConfig(**base))
        mean_acc = float(np.mean([c["mean_accuracy"] for c in report.cells]))
        etas = [
            rec["eta_lf"]
            for key, recs in report.model_info.items()
            for rec in recs
        ]
        rows.append({
            "candidate": cand["id"],
            "eta_lf": float(np.mean(etas)),
            "mean_accuracy": mean_acc,
        })
    r, p = pearson_r_p([r_["eta_lf"] for r_ in rows], [r_["mean_accuracy"] for r_ in rows])
    return {"candidates": rows, "pearson_r": r, "p_value": p}


def write_report(report: ExperimentReport, out_dir) -> None:
    """report.json plus one feature CSV and an accuracy CSV; deterministic
    bytes for a fixed config."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps(report.to_json_doc(), sort_keys=True, indent=2) + "\n"
    )
    lines = ["snr_db,extractor,train,test,mean_accuracy,std_accuracy,repeats"]
    for c in report.cells:
        lines.append(
            f"{c['snr_db']:g},{c['extractor']},{c['train']},{c['test']},"
            f"{c['mean_accuracy']:.6f},{c['std_accuracy']:.6f},{c['repeats']}"
        )
    (out / "accuracy.csv").write_text("\n".join(lines) + "\n")
    for tag, records in sorted(report.feature_records.items()):
        data_io.write_features(out / f"features_{tag.lower()}.csv", records)
