"""Deterministic synthetic Python corpus for desk-scale experiments.

Functions are generated from (verb-template x topic-noun) combinations. Each
topic noun owns a unit word (price -> usd, weight -> kg, ...): docstrings and
function names mention the noun, while body identifiers and message strings
use the unit. The noun/unit pairing is only observable in the full function
text, which is what the denoising stage trains on; a model trained on
contrastive pairs alone sees the noun (in summaries) and the unit (in
signature-stripped bodies) with no direct lexical bridge. Verb-concept words
(total, best, average, ...) stay shared between docstring and body.

A slice of functions carry no docstring, a non-English docstring, a too-short
docstring, or a one-line body, exercising the bimodal filters. Template
combinations are dealt from a shuffled deck, so a corpus has no duplicate
functions until the deck is exhausted. Everything derives from one seed.
"""

from __future__ import annotations

import random
from pathlib import Path

# topic noun -> unit/alias word used inside function bodies
NOUN_UNITS = {
    "price": "usd", "score": "points", "weight": "kg", "depth": "fathoms",
    "width": "cm", "height": "inches", "voltage": "volts", "signal": "decibels",
    "sample": "hz", "pixel": "rgb", "color": "hue", "angle": "radians",
    "speed": "mph", "force": "newtons", "mass": "grams", "energy": "joules",
    "charge": "coulombs", "volume": "liters", "area": "acres", "radius": "mils",
    "length": "meters", "count": "pieces", "offset": "paces", "batch": "lots",
    "epoch": "cycles", "layer": "strata", "rate": "ratio", "delay": "ms",
    "budget": "dollars", "salary": "euros", "profit": "gains", "tax": "levy",
    "rank": "ordinal", "grade": "letter", "level": "tier",
    "temperature": "celsius", "pressure": "bars", "humidity": "dew",
    "distance": "km", "duration": "seconds", "balance": "ledger",
    "credit": "iou", "debt": "owed", "income": "earnings", "reward": "bonus",
    "penalty": "forfeit", "quota": "allotment", "margin": "leeway",
}

NOUNS = list(NOUN_UNITS)

RUSSIAN_DOCSTRINGS = [
    "суммирует значения списка",
    "возвращает наибольшее значение",
    "проверяет входные данные",
]


def _t_total(noun: str, unit: str, variant: int) -> str:
    doc = f"Compute the total {noun} across all entries."
    head = f"def total_{noun}s(values):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    total = 0\n"
            f"    for amount_{unit} in values:\n"
            f"        total += amount_{unit}\n"
            f"    return total\n"
        )
    if variant == 1:
        return head + (
            f"    total = 0\n"
            f"    index = 0\n"
            f"    while index < len(values):\n"
            f"        total = total + values[index]\n"
            f"        index += 1\n"
            f"    return total\n"
        )
    return head + (
        f"    kept_{unit} = [v for v in values if v is not None]\n"
        f"    total = sum(kept_{unit})\n"
        f"    return total\n"
    )


def _t_largest(noun: str, unit: str, variant: int) -> str:
    doc = f"Find the largest {noun} in the records."
    head = f"def largest_{noun}(records):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    best = None\n"
            f"    for {unit}_value in records:\n"
            f"        if best is None or {unit}_value > best:\n"
            f"            best = {unit}_value\n"
            f"    return best\n"
        )
    return head + (
        f"    if not records:\n"
        f"        return None\n"
        f"    best_{unit} = records[0]\n"
        f"    for candidate in records[1:]:\n"
        f"        best_{unit} = candidate if candidate > best_{unit} else best_{unit}\n"
        f"    return best_{unit}\n"
    )


def _t_average(noun: str, unit: str, variant: int) -> str:
    doc = f"Compute the average {noun} of the samples."
    head = f"def average_{noun}(samples):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    if not samples:\n"
            f"        return 0.0\n"
            f"    total = 0.0\n"
            f"    for {unit}_reading in samples:\n"
            f"        total += {unit}_reading\n"
            f"    average = total / len(samples)\n"
            f"    return average\n"
        )
    return head + (
        f"    count = len(samples)\n"
        f"    if count == 0:\n"
        f"        return 0.0\n"
        f"    average_{unit} = sum(samples) / count\n"
        f"    return average_{unit}\n"
    )


def _t_count_above(noun: str, unit: str, variant: int) -> str:
    doc = f"Count how many {noun} readings exceed the limit."
    head = f"def count_high_{noun}s(readings, limit):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    count = 0\n"
            f"    for level_{unit} in readings:\n"
            f"        if level_{unit} > limit:\n"
            f"            count += 1\n"
            f"    return count\n"
        )
    return head + (
        f"    high_{unit} = [r for r in readings if r > limit]\n"
        f"    count = len(high_{unit})\n"
        f"    return count\n"
    )


def _t_filter(noun: str, unit: str, variant: int) -> str:
    doc = f"Collect the {noun} entries above the threshold."
    head = f"def keep_{noun}s_above(entries, threshold):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    kept = []\n"
            f"    for item_{unit} in entries:\n"
            f"        if item_{unit} >= threshold:\n"
            f"            kept.append(item_{unit})\n"
            f"    return kept\n"
        )
    return head + (
        f"    kept = [item for item in entries if item >= threshold]\n"
        f"    tag = '{unit}'\n"
        f"    return kept, tag\n"
    )


def _t_normalize(noun: str, unit: str, variant: int) -> str:
    doc = f"Normalize each {noun} by the maximum value."
    head = f"def normalize_{noun}s(values):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    peak = max(values) if values else 0\n"
            f"    if peak == 0:\n"
            f"        return list(values)\n"
            f"    normalized = [raw_{unit} / peak for raw_{unit} in values]\n"
            f"    return normalized\n"
        )
    return head + (
        f"    normalized = []\n"
        f"    peak_{unit} = 0\n"
        f"    for raw in values:\n"
        f"        peak_{unit} = raw if raw > peak_{unit} else peak_{unit}\n"
        f"    for raw in values:\n"
        f"        normalized.append(raw / peak_{unit} if peak_{unit} else 0.0)\n"
        f"    return normalized\n"
    )


def _t_clamp(noun: str, unit: str, variant: int) -> str:
    doc = f"Clamp the {noun} into the allowed range."
    head = f"def clamp_{noun}(value, low, high):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    clamped_{unit} = value\n"
            f"    if clamped_{unit} < low:\n"
            f"        clamped_{unit} = low\n"
            f"    if clamped_{unit} > high:\n"
            f"        clamped_{unit} = high\n"
            f"    return clamped_{unit}\n"
        )
    return head + (
        f"    clamped = min(max(value, low), high)\n"
        f"    note = 'clamped to {unit} range'\n"
        f"    return clamped, note\n"
    )


def _t_report(noun: str, unit: str, variant: int) -> str:
    doc = f"Format a short report line for one {noun} value."
    head = f"def format_{noun}_report(value, suffix=''):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    label = '{unit}'\n"
            f"    line = label + '=' + str(value)\n"
            f"    if suffix:\n"
            f"        line = line + ' ' + suffix\n"
            f"    return line\n"
        )
    return head + (
        f"    parts = ['{unit}', str(value)]\n"
        f"    if suffix:\n"
        f"        parts.append(suffix)\n"
        f"    line = ' '.join(parts)\n"
        f"    return line\n"
    )


def _t_validate(noun: str, unit: str, variant: int) -> str:
    doc = f"Validate that the {noun} lies inside the window."
    head = f"def validate_{noun}(value, low, high):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    if value < low or value > high:\n"
            f"        raise ValueError('bad {unit} reading: ' + str(value))\n"
            f"    checked_{unit} = value\n"
            f"    return checked_{unit}\n"
        )
    return head + (
        f"    ok = low <= value <= high\n"
        f"    if not ok:\n"
        f"        raise ValueError('{unit} outside window')\n"
        f"    return value\n"
    )


def _t_dedupe(noun: str, unit: str, variant: int) -> str:
    doc = f"Remove duplicate {noun} entries preserving order."
    head = f"def unique_{noun}s(entries):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    seen = set()\n"
            f"    unique = []\n"
            f"    for key_{unit} in entries:\n"
            f"        if key_{unit} not in seen:\n"
            f"            seen.add(key_{unit})\n"
            f"            unique.append(key_{unit})\n"
            f"    return unique\n"
        )
    return head + (
        f"    unique = []\n"
        f"    for entry in entries:\n"
        f"        if entry not in unique:\n"
        f"            unique.append(entry)\n"
        f"    marker = '{unit}'\n"
        f"    return unique, marker\n"
    )


def _t_window(noun: str, unit: str, variant: int) -> str:
    doc = f"Compute sliding window sums of the {noun} series."
    head = f"def window_{noun}_sums(series, size):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    windows = []\n"
            f"    for start in range(len(series) - size + 1):\n"
            f"        chunk_{unit} = series[start:start + size]\n"
            f"        windows.append(sum(chunk_{unit}))\n"
            f"    return windows\n"
        )
    return head + (
        f"    windows = []\n"
        f"    running_{unit} = sum(series[:size])\n"
        f"    windows.append(running_{unit})\n"
        f"    for start in range(size, len(series)):\n"
        f"        running_{unit} += series[start] - series[start - size]\n"
        f"        windows.append(running_{unit})\n"
        f"    return windows\n"
    )


def _t_histogram(noun: str, unit: str, variant: int) -> str:
    doc = f"Build a histogram of rounded {noun} values."
    head = f"def {noun}_histogram(values):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    hist = {{}}\n"
            f"    for raw_{unit} in values:\n"
            f"        key = round(raw_{unit})\n"
            f"        hist[key] = hist.get(key, 0) + 1\n"
            f"    return hist\n"
        )
    return head + (
        f"    hist = {{}}\n"
        f"    bins_{unit} = [round(v) for v in values]\n"
        f"    for key in bins_{unit}:\n"
        f"        hist[key] = hist.get(key, 0) + 1\n"
        f"    return hist\n"
    )


def _t_cumulative(noun: str, unit: str, variant: int) -> str:
    doc = f"Return the running totals of the {noun} values."
    head = f"def running_{noun}_totals(values):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    totals = []\n"
            f"    running_{unit} = 0\n"
            f"    for value in values:\n"
            f"        running_{unit} += value\n"
            f"        totals.append(running_{unit})\n"
            f"    return totals\n"
        )
    return head + (
        f"    totals = []\n"
        f"    for index in range(len(values)):\n"
        f"        slice_{unit} = values[:index + 1]\n"
        f"        totals.append(sum(slice_{unit}))\n"
        f"    return totals\n"
    )


def _t_delta(noun: str, unit: str, variant: int) -> str:
    doc = f"Compute differences between consecutive {noun} readings."
    head = f"def {noun}_deltas(readings):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    deltas = []\n"
            f"    for index in range(1, len(readings)):\n"
            f"        step_{unit} = readings[index] - readings[index - 1]\n"
            f"        deltas.append(step_{unit})\n"
            f"    return deltas\n"
        )
    return head + (
        f"    pairs = zip(readings[1:], readings[:-1])\n"
        f"    deltas = [late - early for late, early in pairs]\n"
        f"    unit_name = '{unit}'\n"
        f"    return deltas, unit_name\n"
    )


def _t_scale(noun: str, unit: str, variant: int) -> str:
    doc = f"Scale every {noun} by the given factor."
    head = f"def scale_{noun}s(values, factor):\n    \"\"\"{doc}\"\"\"\n"
    if variant == 0:
        return head + (
            f"    scaled = []\n"
            f"    for point_{unit} in values:\n"
            f"        scaled.append(point_{unit} * factor)\n"
            f"    return scaled\n"
        )
    return head + (
        f"    scaled_{unit} = [v * factor for v in values]\n"
        f"    return scaled_{unit}\n"
    )


def _t_lookup(noun: str, unit: str, variant: int) -> str:
    doc = f"Look up the {noun} for a key with a default."
    if variant == 0:
        head = f"def lookup_{noun}(key, table, default=None):\n    \"\"\"{doc}\"\"\"\n"
        return head + (
            f"    if key in table:\n"
            f"        entry_{unit} = table[key]\n"
            f"        return entry_{unit}\n"
            f"    return default\n"
        )
    head = f"def lookup_{noun}(key, table, default=None, strict=False):\n    \"\"\"{doc}\"\"\"\n"
    return head + (
        f"    entry = table.get(key, default)\n"
        f"    missing = key not in table\n"
        f"    if missing and strict:\n"
        f"        raise KeyError('no {unit} entry for ' + str(key))\n"
        f"    return entry\n"
    )


TEMPLATES = [
    ("total", _t_total, 3),
    ("largest", _t_largest, 2),
    ("average", _t_average, 2),
    ("count_above", _t_count_above, 2),
    ("filter", _t_filter, 2),
    ("normalize", _t_normalize, 2),
    ("clamp", _t_clamp, 2),
    ("report", _t_report, 2),
    ("validate", _t_validate, 2),
    ("dedupe", _t_dedupe, 2),
    ("window", _t_window, 2),
    ("histogram", _t_histogram, 2),
    ("cumulative", _t_cumulative, 2),
    ("delta", _t_delta, 2),
    ("scale", _t_scale, 2),
    ("lookup", _t_lookup, 2),
]


def _t_tracker_class(noun: str, unit: str) -> str:
    name = f"{noun.capitalize()}Tracker"
    return (
        f"class {name}:\n"
        f"    def __init__(self, limit):\n"
        f"        self.limit = limit\n"
        f"        self.readings = []\n\n"
        f"    def add_{noun}(self, value):\n"
        f"        \"\"\"Add one {noun} reading to the tracker.\"\"\"\n"
        f"        capped_{unit} = min(value, self.limit)\n"
        f"        self.readings.append(capped_{unit})\n"
        f"        return capped_{unit}\n\n"
        f"    def peak_{noun}(self):\n"
        f"        \"\"\"Return the highest {noun} seen so far.\"\"\"\n"
        f"        best_{unit} = None\n"
        f"        for value in self.readings:\n"
        f"            if best_{unit} is None or value > best_{unit}:\n"
        f"                best_{unit} = value\n"
        f"        return best_{unit}\n"
    )


def _t_getter(noun: str, unit: str) -> str:
    return (
        f"def get_{noun}(record):\n"
        f"    \"\"\"Return the stored {noun} field.\"\"\"\n"
        f"    return record['{unit}']\n"
    )


def _degrade_docstring(src: str, mode: str, rng: random.Random) -> str:
    first = src.find('"""')
    if first < 0:
        return src
    second = src.find('"""', first + 3)
    line_start = src.rfind("\n", 0, first) + 1
    if mode == "none":
        return src[:line_start] + src[second + 4 :]  # drop the docstring line
    if mode == "russian":
        return src[: first + 3] + rng.choice(RUSSIAN_DOCSTRINGS) + src[second:]
    if mode == "short":
        return src[: first + 3] + "Ok." + src[second:]
    if mode == "url":
        return src[: first + 3] + src[first + 3 : second].rstrip() + (
            " See https://example.org/docs for background.") + src[second:]
    return src


def _docstring_mode(rng: random.Random) -> str:
    roll = rng.random()
    if roll < 0.15:
        return "none"
    if roll < 0.19:
        return "russian"
    if roll < 0.22:
        return "short"
    if roll < 0.27:
        return "url"
    return "english"


class _ComboDeck:
    """Deals (template, noun, variant) combinations without duplicates."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.deck: list[tuple[int, str, int]] = []

    def deal(self) -> tuple[int, str, int]:
        if not self.deck:
            self.deck = [
                (t, noun, variant)
                for t, (_, _, n_variants) in enumerate(TEMPLATES)
                for noun in NOUNS
                for variant in range(n_variants)
            ]
            self.rng.shuffle(self.deck)
        return self.deck.pop()


def generate_function(rng: random.Random, deck: _ComboDeck,
                      docstring_mode: str = "english") -> str:
    t_idx, noun, variant = deck.deal()
    _, maker, _ = TEMPLATES[t_idx]
    src = maker(noun, NOUN_UNITS[noun], variant)
    return _degrade_docstring(src, docstring_mode, rng)


def generate_file(rng: random.Random, deck: _ComboDeck | None = None) -> str:
    deck = deck or _ComboDeck(rng)
    parts = []
    if rng.random() < 0.3:
        parts.append(f"# utilities for {rng.choice(NOUNS)} handling\n")
    n_functions = rng.randrange(2, 5)
    for _ in range(n_functions):
        roll = rng.random()
        noun = rng.choice(NOUNS)
        if roll < 0.06:
            parts.append(_t_tracker_class(noun, NOUN_UNITS[noun]))
        elif roll < 0.11:
            parts.append(_t_getter(noun, NOUN_UNITS[noun]))  # one-line body
        else:
            parts.append(generate_function(rng, deck, _docstring_mode(rng)))
    return "\n\n".join(parts)


def generate_corpus(root: str | Path, n_files: int = 200, seed: int = 0) -> list[Path]:
    """Write a synthetic corpus under root; byte-deterministic for a seed."""
    rng = random.Random(seed)
    deck = _ComboDeck(rng)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(n_files):
        path = root / f"mod_{i:04d}.py"
        path.write_text(generate_file(rng, deck), encoding="utf-8")
        paths.append(path)
    return paths


def generate_code2code_groups(
    n_problems: int = 30, seed: int = 0
) -> dict[str, list[str]]:
    """Problem -> alternative solutions, built from template variants."""
    rng = random.Random(seed)
    groups: dict[str, list[str]] = {}
    combos = [(t, n) for t in range(len(TEMPLATES)) for n in range(len(NOUNS))]
    rng.shuffle(combos)
    for t_idx, n_idx in combos[:n_problems]:
        label, maker, n_variants = TEMPLATES[t_idx]
        noun = NOUNS[n_idx]
        solutions = [maker(noun, NOUN_UNITS[noun], v) for v in range(n_variants)]
        if len(solutions) < 2:
            continue
        groups[f"{label}_{noun}"] = solutions
    return groups
