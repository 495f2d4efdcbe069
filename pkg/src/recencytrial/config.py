"""Design configuration files.

Grammar (one item per line, ``#`` starts a comment)::

    key = value                 # global settings, before the table
    [strata]                    # starts the stratum table
    name proportion incidence_pct prevalence_pct subtype mdri_days mdri_rse_pct frr_pct
    US-Black 0.185 5.9 15 B 142 10 1.5
    "Cape Town" 0.033 4.7 25 C 118 7 1.0
    Bangkok 0.091 5.2 15 A/E NA NA NA

Global keys: ``cutoff_T_years``, ``frr_rse_pct``, ``enroll_rate``,
``followup_tau_years`` (comma-separated list), ``alpha``, ``power``, ``r0``,
``r1`` and optionally ``legacy_inctools_variance`` (true/false).

Table rows are split shell-style, so names containing spaces are quoted.
``proportion`` and ``enroll_rate`` are fractions; every ``*_pct`` value is
a percentage and converted to a fraction here. The three assay columns are
either all numbers or all ``NA``.
"""

from __future__ import annotations

import shlex
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .domain import AssayProperties, DesignContext, HypothesisSpec, PopulationStratum
from .errors import ConfigError, ValidationError
from .population import pool_strata

STRATA_COLUMNS = ("name", "proportion", "incidence_pct", "prevalence_pct", "subtype",
                  "mdri_days", "mdri_rse_pct", "frr_pct")
ASSAY_COLUMNS = ("mdri_days", "mdri_rse_pct", "frr_pct")
REQUIRED_KEYS = ("cutoff_T_years", "frr_rse_pct", "enroll_rate", "followup_tau_years",
                 "alpha", "power", "r0", "r1")
OPTIONAL_KEYS = ("legacy_inctools_variance",)
BUNDLED = ("msm", "women")


@dataclass(frozen=True)
class DesignConfig:
    strata: Tuple[PopulationStratum, ...]
    cutoff_T: float
    frr_rse: float
    enroll_rate: float
    followup_taus: Tuple[float, ...]
    alpha: float
    power: float
    r0: float
    r1: float
    legacy_inctools_variance: bool = False
    source: Optional[str] = None

    def context(self, tau: Optional[float] = None) -> DesignContext:
        """Pooled design context at follow-up ``tau`` (default: first listed)."""
        tau = self.followup_taus[0] if tau is None else tau
        try:
            return pool_strata(self.strata, self.enroll_rate, tau, self.frr_rse, self.cutoff_T)
        except ValidationError as exc:
            field = "proportion" if "proportion" in str(exc) else None
            raise ConfigError(str(exc), field=field, source=self.source) from exc

    def hypothesis(self) -> HypothesisSpec:
        try:
            return HypothesisSpec(r0=self.r0, r1=self.r1, alpha=self.alpha,
                                  power_beta=self.power)
        except ValidationError as exc:
            raise ConfigError(str(exc), source=self.source) from exc


def _number(text: str, line: int, field: str, source) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}", line=line, field=field,
                          source=source) from None


def _parse_bool(text: str, line: int, field: str, source) -> bool:
    low = text.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected true/false, got {text!r}", line=line, field=field, source=source)


def _strip_comment(raw: str) -> str:
    return raw.split("#", 1)[0].strip()


def parse_config(text: str, source: Optional[str] = None) -> DesignConfig:
    """Parse and validate configuration text; errors carry line and field."""
    settings: Dict[str, Tuple[str, int]] = {}
    header: Optional[List[str]] = None
    rows: List[Tuple[int, List[str]]] = []
    in_table = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        if in_table:
            try:
                tokens = shlex.split(raw, comments=True)
            except ValueError as exc:
                raise ConfigError(f"cannot split row: {exc}", line=lineno, source=source) from None
            if not tokens:
                continue
            if header is None:
                header = tokens
                missing = [c for c in STRATA_COLUMNS if c not in header]
                unknown = [c for c in header if c not in STRATA_COLUMNS]
                if missing or unknown:
                    raise ConfigError(f"table header must list columns {', '.join(STRATA_COLUMNS)}"
                                      + (f"; missing {missing}" if missing else "")
                                      + (f"; unknown {unknown}" if unknown else ""),
                                      line=lineno, source=source)
            else:
                rows.append((lineno, tokens))
            continue
        line = _strip_comment(raw)
        if not line:
            continue
        if line.lower() == "[strata]":
            in_table = True
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", line=lineno, source=source)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in REQUIRED_KEYS + OPTIONAL_KEYS:
            raise ConfigError("unknown key", line=lineno, field=key, source=source)
        if key in settings:
            raise ConfigError("duplicate key", line=lineno, field=key, source=source)
        settings[key] = (value, lineno)

    for key in REQUIRED_KEYS:
        if key not in settings:
            raise ConfigError("required key missing", field=key, source=source)
    if not rows:
        raise ConfigError("no [strata] table rows", field="strata", source=source)

    def num(key):
        value, lineno = settings[key]
        return _number(value, lineno, key, source)

    tau_text, tau_line = settings["followup_tau_years"]
    taus = tuple(_number(t.strip(), tau_line, "followup_tau_years", source)
                 for t in tau_text.split(",") if t.strip())
    if not taus or any(t <= 0 for t in taus):
        raise ConfigError("follow-up times must be positive", line=tau_line,
                          field="followup_tau_years", source=source)

    cutoff = num("cutoff_T_years")
    frr_rse = num("frr_rse_pct") / 100
    legacy = False
    if "legacy_inctools_variance" in settings:
        value, lineno = settings["legacy_inctools_variance"]
        legacy = _parse_bool(value, lineno, "legacy_inctools_variance", source)

    strata = tuple(_parse_row(header, tokens, lineno, cutoff, frr_rse, source)
                   for lineno, tokens in rows)
    cfg = DesignConfig(strata=strata, cutoff_T=cutoff, frr_rse=frr_rse,
                       enroll_rate=num("enroll_rate"), followup_taus=taus, alpha=num("alpha"),
                       power=num("power"), r0=num("r0"), r1=num("r1"),
                       legacy_inctools_variance=legacy, source=source)
    # surface validation errors now rather than at first use
    for tau in taus:
        cfg.context(tau)
    cfg.hypothesis()
    return cfg


def _parse_row(header, tokens, lineno, cutoff, frr_rse, source) -> PopulationStratum:
    if len(tokens) != len(header):
        raise ConfigError(f"expected {len(header)} columns, got {len(tokens)}", line=lineno,
                          source=source)
    row = dict(zip(header, tokens))
    values = {}
    for col in ("proportion", "incidence_pct", "prevalence_pct"):
        values[col] = _number(row[col], lineno, col, source)
    na = [row[c].upper() == "NA" for c in ASSAY_COLUMNS]
    assay = None
    if all(na):
        pass
    elif any(na):
        raise ConfigError("assay columns must be all numbers or all NA", line=lineno,
                          field=ASSAY_COLUMNS[na.index(True)], source=source)
    else:
        mdri_days, mdri_rse, frr = (_number(row[c], lineno, c, source) for c in ASSAY_COLUMNS)
        try:
            assay = AssayProperties.from_days(cutoff, mdri_days, mdri_rse / 100, frr / 100, frr_rse)
        except ValidationError as exc:
            raise ConfigError(str(exc), line=lineno, field="mdri_days", source=source) from exc
    try:
        return PopulationStratum(name=row["name"], proportion=values["proportion"],
                                 incidence=values["incidence_pct"] / 100,
                                 prevalence=values["prevalence_pct"] / 100,
                                 subtype=row["subtype"], assay=assay)
    except ValidationError as exc:
        msg = str(exc)
        field = next((c for c in ("proportion", "incidence", "prevalence") if c in msg), None)
        if field in ("incidence", "prevalence"):
            field += "_pct"
        raise ConfigError(msg, line=lineno, field=field, source=source) from exc


def bundled_config_text(name: str) -> str:
    name = name[:-4] if name.endswith(".cfg") else name
    if name not in BUNDLED:
        raise ConfigError(f"no bundled configuration named {name!r}; choose from {BUNDLED}")
    return resources.files("recencytrial.data").joinpath(f"{name}.cfg").read_text()


def load_config(path) -> DesignConfig:
    """Load a configuration file.

    A path that does not exist but names a bundled configuration (``msm``,
    ``women``, optionally with ``.cfg``) loads the packaged copy.
    """
    p = Path(path)
    if p.is_file():
        return parse_config(p.read_text(), source=str(p))
    stem = p.name[:-4] if p.name.endswith(".cfg") else p.name
    if p.parent == Path(".") and stem in BUNDLED:
        return parse_config(bundled_config_text(stem), source=f"bundled:{stem}.cfg")
    raise ConfigError(f"configuration file not found: {path}")
