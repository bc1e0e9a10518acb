"""Flat run configuration merged from defaults, a config file, and CLI flags.

Config files are UTF-8 lines of `key = value` with `#` comments. Unknown
keys are rejected. Every run echoes its fully resolved configuration to
resolved-config.txt in the output directory; that file is itself a valid
config file and suffices to reproduce the run bit-identically.
"""
from __future__ import annotations


class ConfigError(ValueError):
    """Unknown key or unparsable value in a run configuration."""


# key -> default; the default's type drives value coercion
DEFAULTS = {
    # synthetic corpus
    "n_bags": 16,
    "n_relations": 4,
    "sentences_per_doc": 24,
    "paths_per_bag": 2,
    "dim": 48,
    "noise_sigma": 0.05,
    "na_bag_fraction": 0.5,
    "na_path_fraction": 0.25,
    "evidence_offset_min": 8,
    "tokens_per_sentence": 25,
    "seed": 7,
    # selection
    "T": 15,
    "token_cap": 512,
    "selector": "reic",
    "snippet_window": 1_000_000,
    "filter_cap": 25,
    # training
    "lr_policy": 3e-3,
    "lr_re": 3e-5,
    "epochs": 4,
    "batch_size": 4,
    "grad_clip": 5.0,
    "master_seed": 0,
    "eval_mode": "argmax",
    "hidden_dim": 512,
    "head_hidden": 512,
    "optimizer": "adamw",
    "epoch_eval": False,
    # scoring head and rewards
    "head": "end2end",
    "theta": 0.0,
    "train_theta": False,
    "lambda_positive": 10.0,
    "lambda_na": 1.0,
    "clip_negative": "auto",
    # evaluation
    "p_at_k": "50,100",
}


def _coerce(key: str, raw, default):
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc


def parse_config_text(text: str) -> dict:
    """Raw key -> string-value pairs from `key = value` lines."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def resolve(file_values: dict | None = None, flag_values: dict | None = None) -> dict:
    """Defaults <- config file <- flags, with unknown keys rejected."""
    cfg = dict(DEFAULTS)
    for source in (file_values or {}, flag_values or {}):
        for key, raw in source.items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            if raw is None:
                continue
            cfg[key] = _coerce(key, raw, DEFAULTS[key])
    return cfg


def load_config_file(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def resolved_text(cfg: dict) -> str:
    return "".join(f"{key} = {_fmt(cfg[key])}\n" for key in sorted(cfg))


def to_synthetic_config(cfg: dict):
    from .synth import SyntheticConfig

    return SyntheticConfig(
        n_bags=cfg["n_bags"],
        n_relations=cfg["n_relations"],
        sentences_per_doc=cfg["sentences_per_doc"],
        paths_per_bag=cfg["paths_per_bag"],
        dim=cfg["dim"],
        noise_sigma=cfg["noise_sigma"],
        na_bag_fraction=cfg["na_bag_fraction"],
        na_path_fraction=cfg["na_path_fraction"],
        evidence_offset_min=cfg["evidence_offset_min"],
        tokens_per_sentence=cfg["tokens_per_sentence"],
        seed=cfg["seed"],
    )


def to_train_config(cfg: dict):
    from .rltrain import TrainConfig

    return TrainConfig(
        lr_policy=cfg["lr_policy"],
        lr_re=cfg["lr_re"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch_size"],
        grad_clip=cfg["grad_clip"],
        master_seed=cfg["master_seed"],
        T=cfg["T"],
        eval_mode=cfg["eval_mode"],
        token_cap=cfg["token_cap"],
        hidden_dim=cfg["hidden_dim"],
        head_hidden=cfg["head_hidden"],
        selector=cfg["selector"],
        optimizer=cfg["optimizer"],
        theta=cfg["theta"],
        train_theta=cfg["train_theta"],
        snippet_window=cfg["snippet_window"],
        filter_cap=cfg["filter_cap"],
        epoch_eval=cfg["epoch_eval"],
    )


def to_reward_config(cfg: dict):
    from .rltrain import RewardConfig

    clip = cfg["clip_negative"]
    if isinstance(clip, str):
        clip = {"auto": None, "true": True, "false": False}.get(clip.lower())
        if clip is None and cfg["clip_negative"].lower() != "auto":
            raise ConfigError(f"clip_negative must be auto/true/false, got {cfg['clip_negative']!r}")
    return RewardConfig(
        lambda_positive=cfg["lambda_positive"],
        lambda_na=cfg["lambda_na"],
        variant=cfg["head"],
        clip_negative=clip,
    )


def p_at_ks(cfg: dict) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in str(cfg["p_at_k"]).split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError(f"bad p_at_k list {cfg['p_at_k']!r}") from exc
