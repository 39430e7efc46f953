"""Synthetic reference database and corrupted-query benchmark.

Builds a reference set with deliberately confusable families (analytes
sharing tokens, e.g. "alanine aminotransferase" / "aspartate
aminotransferase", vitamin and coagulation-factor series) and derives
queries from gold records by composable corruption recipes:

* light formatting noise (case, spacing) that normalization absorbs,
* dictionary synonym substitutions on any component,
* single-edit typos that fuzzy matching still catches,
* "hard" corruptions (double edits or truncation of a distinguishing
  token) that token-level matching cannot resolve but character-level
  compatibility features can.

Everything is driven by a seeded generator, so a (seed, sizes) tuple
reproduces the benchmark exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .synonyms import SynonymDictionary, load_seed_dictionary
from .textnorm import normalize_text
from .types import QueryRecord, QueryStats, ReferenceRecord, Triad

_FAMILIES: list[list[str]] = [
    ["alanine aminotransferase", "aspartate aminotransferase"],
    ["glucose", "glucose fasting", "glucose random", "glucose post prandial"],
    ["vitamin a", "vitamin b1", "vitamin b6", "vitamin b12", "vitamin c",
     "vitamin d", "vitamin e", "vitamin k"],
    ["immunoglobulin a", "immunoglobulin g", "immunoglobulin m",
     "immunoglobulin e", "immunoglobulin d"],
    ["complement c2", "complement c3", "complement c4"],
    ["apolipoprotein a1", "apolipoprotein a2", "apolipoprotein b"],
    ["coagulation factor ii", "coagulation factor v", "coagulation factor vii",
     "coagulation factor viii", "coagulation factor ix", "coagulation factor x"],
    ["creatine kinase", "creatine kinase mb"],
    ["protein total", "protein c", "protein s"],
    ["thyroxine free", "thyroxine total", "triiodothyronine free",
     "triiodothyronine total"],
    ["iron", "iron binding capacity", "iron saturation"],
    ["cholesterol total", "cholesterol non hdl"],
    ["calcium", "calcium ionized"],
    ["bilirubin total", "bilirubin direct", "bilirubin indirect"],
    ["lactate", "lactate dehydrogenase"],
    ["albumin", "prealbumin", "microalbumin"],
    ["ferritin", "transferrin", "transferrin saturation"],
    ["hemoglobin", "hemoglobin a1c", "hemoglobin a2"],
    ["amylase", "amylase pancreatic"],
    ["cortisol morning", "cortisol evening"],
    ["interleukin 1", "interleukin 2", "interleukin 6", "interleukin 8",
     "interleukin 10"],
    ["troponin i", "troponin t"],
    ["antithrombin iii", "antistreptolysin o"],
]

_SINGLES = [
    "sodium", "potassium", "chloride", "magnesium", "phosphate", "uric acid",
    "creatinine", "blood urea nitrogen", "c reactive protein", "procalcitonin",
    "myoglobin", "brain natriuretic peptide", "fibrinogen", "d dimer",
    "haptoglobin", "ceruloplasmin", "folate", "homocysteine", "insulin",
    "c peptide", "parathyroid hormone", "prolactin", "testosterone",
    "estradiol", "progesterone", "follicle stimulating hormone",
    "luteinizing hormone", "growth hormone", "prostate specific antigen",
    "carcinoembryonic antigen", "alpha fetoprotein", "thyroid stimulating hormone",
    "erythrocyte sedimentation rate", "reticulocyte count", "eosinophil count",
    "basophil count", "monocyte count", "lymphocyte count", "neutrophil count",
    "white blood cell count", "red blood cell count", "platelet count",
    "mean corpuscular volume", "mean corpuscular hemoglobin",
    "red cell distribution width", "ammonia", "ethanol", "salicylate",
    "acetaminophen", "digoxin", "lithium", "valproic acid", "phenytoin",
    "vancomycin", "gentamicin", "osmolality", "bicarbonate", "zinc", "copper",
    "selenium", "lead", "thyroglobulin", "rheumatoid factor",
    "antinuclear antibody", "alkaline phosphatase", "gamma glutamyl transferase",
    "hematocrit", "triglycerides", "lipase", "cystatin c", "beta 2 microglobulin",
    "prothrombin time", "partial thromboplastin time", "sex hormone binding globulin",
    "angiotensin converting enzyme", "lipoprotein a", "free fatty acids",
]

_UNIT_SETS = [
    ["mg/dl", "mmol/l", "g/l", "mg/l", "umol/l"],
    ["u/l", "iu/l", "ukat/l", "mu/l"],
    ["10^3/ul", "10^6/ul", "cells/ul", "%", "fl"],
    ["ng/ml", "pg/ml", "uiu/ml", "nmol/l", "pmol/l"],
    ["g/dl", "umol/l", "meq/l", "mosm/kg", "ratio"],
    ["mg/24h", "mmol/24h", "ml/min", "sec", "titer"],
]

_SAMPLE_SETS = [
    ["serum", "plasma", "blood", "urine"],
    ["serum", "plasma", "urine", "csf"],
    ["blood", "capillary blood", "serum", "plasma"],
    ["serum", "csf", "urine", "blood"],
    ["plasma", "blood", "synovial fluid", "serum"],
]


@dataclass
class Benchmark:
    """Reference records plus tuning and evaluation query sets."""

    records: list[ReferenceRecord]
    tune_queries: list[QueryRecord] = field(default_factory=list)
    tune_gold: dict[str, str] = field(default_factory=dict)
    eval_queries: list[QueryRecord] = field(default_factory=list)
    eval_gold: dict[str, str] = field(default_factory=dict)
    seed: int = 0


def _analyte_names() -> list[str]:
    names: list[str] = []
    for family in _FAMILIES:
        names.extend(family)
    names.extend(_SINGLES)
    seen = set()
    out = []
    for n in names:
        if n not in seen:
            seen.add(n)
            out.append(n)
    return out


def make_reference_records(n_records: int, rng: np.random.Generator,
                           synonyms: SynonymDictionary) -> list[ReferenceRecord]:
    """Deterministic reference set of distinct triads."""
    analytes = _analyte_names()
    records: list[ReferenceRecord] = []
    seen_triads: set[Triad] = set()
    combo_idx = 0
    while len(records) < n_records:
        for i, analyte in enumerate(analytes):
            if len(records) >= n_records:
                break
            units = _UNIT_SETS[i % len(_UNIT_SETS)]
            samples = _SAMPLE_SETS[i % len(_SAMPLE_SETS)]
            sample = samples[combo_idx % len(samples)]
            unit = units[(combo_idx // len(samples)) % len(units)]
            triad = Triad(analyte, sample, unit)
            if triad in seen_triads:
                continue
            seen_triads.add(triad)
            idx = len(records)
            group = synonyms.group_of(analyte, "test")
            aliases = tuple(sorted(group - {normalize_text(analyte)}))
            records.append(ReferenceRecord(
                id=f"LC{idx:05d}",
                triad=triad,
                labcode=f"{10000 + idx}-{idx % 10}",
                preferred_unit=unit,
                conversion_factor=float(rng.choice([1.0, 1.0, 1.0, 0.1, 10.0])),
                synonyms=aliases,
            ))
        combo_idx += 1
        if combo_idx > 40 * len(_UNIT_SETS):
            break
    return records


# -- corruption recipes -------------------------------------------------------


def _light_noise(text: str, rng: np.random.Generator) -> str:
    """Case and spacing jitter that normalization removes."""
    words = text.split()
    out = []
    for w in words:
        style = rng.integers(4)
        if style == 0:
            w = w.upper()
        elif style == 1:
            w = w.capitalize()
        out.append(w)
    joiner = "  " if rng.random() < 0.3 else " "
    pad = " " if rng.random() < 0.3 else ""
    return pad + joiner.join(out) + pad


def _synonym_sub(value: str, category: str, synonyms: SynonymDictionary,
                 rng: np.random.Generator) -> str:
    group = sorted(synonyms.group_of(value, category) - {normalize_text(value)})
    if not group:
        return value
    return group[rng.integers(len(group))]


def _typo(token: str, rng: np.random.Generator, edits: int = 1) -> str:
    letters = "abcdefghijklmnopqrstuvwxyz"
    chars = list(token)
    for _ in range(edits):
        if len(chars) < 2:
            break
        op = rng.integers(4)
        pos = int(rng.integers(1, len(chars)))
        if op == 0:
            chars[pos] = letters[rng.integers(26)]
        elif op == 1:
            del chars[pos]
        elif op == 2:
            chars.insert(pos, letters[rng.integers(26)])
        elif pos + 1 < len(chars):
            chars[pos], chars[pos + 1] = chars[pos + 1], chars[pos]
        else:
            chars[pos] = letters[rng.integers(26)]
    return "".join(chars)


def _typo_test_name(test: str, rng: np.random.Generator, edits: int,
                    targets: set[str] | None = None) -> str:
    tokens = test.split()
    eligible = [i for i, t in enumerate(tokens)
                if len(t) >= 4 and (targets is None or t in targets)]
    if not eligible:
        eligible = [max(range(len(tokens)), key=lambda i: len(tokens[i]))]
    target = eligible[int(rng.integers(len(eligible)))]
    tokens[target] = _typo(tokens[target], rng, edits)
    return " ".join(tokens)


def _truncate_test_name(test: str, rng: np.random.Generator,
                        targets: set[str] | None = None) -> str:
    tokens = test.split()
    eligible = [i for i, t in enumerate(tokens)
                if len(t) >= 7 and (targets is None or t in targets)]
    if not eligible:
        return _typo_test_name(test, rng, edits=2, targets=targets)
    target = eligible[int(rng.integers(len(eligible)))]
    tok = tokens[target]
    keep = max(4, int(len(tok) * 0.6))
    tokens[target] = tok[:keep]
    return " ".join(tokens)


def corrupt_query(gold: ReferenceRecord, synonyms: SynonymDictionary,
                  rng: np.random.Generator, hard: bool,
                  hard_targets: set[str] | None = None) -> QueryRecord:
    """Derive one query triad from a gold record.

    Hard corruptions destroy the tokens that distinguish the gold record
    from its confusable siblings (``hard_targets``), the case token-level
    retrieval cannot repair.
    """
    test, sample, unit = gold.triad.test, gold.triad.sample, gold.triad.unit
    if hard:
        if rng.random() < 0.5:
            test = _typo_test_name(test, rng, edits=2, targets=hard_targets)
        else:
            test = _truncate_test_name(test, rng, targets=hard_targets)
        if rng.random() < 0.5:
            unit = _synonym_sub(unit, "unit", synonyms, rng)
        if rng.random() < 0.3:
            sample = _synonym_sub(sample, "sample", synonyms, rng)
    else:
        roll = rng.random()
        if roll < 0.40:
            pass  # formatting noise only
        elif roll < 0.75:
            if rng.random() < 0.5:
                test = _synonym_sub(test, "test", synonyms, rng)
            if rng.random() < 0.6:
                sample = _synonym_sub(sample, "sample", synonyms, rng)
            if rng.random() < 0.6:
                unit = _synonym_sub(unit, "unit", synonyms, rng)
        else:
            test = _typo_test_name(test, rng, edits=1)
            if rng.random() < 0.3:
                unit = _synonym_sub(unit, "unit", synonyms, rng)

    stats = None
    if rng.random() < 0.3:
        mean = float(np.round(rng.uniform(1, 200), 2))
        spread = float(np.round(rng.uniform(0.1, 50), 2))
        stats = QueryStats(min=mean - spread, max=mean + spread, mean=mean,
                           std=float(np.round(rng.uniform(0, spread), 2)))
    code_hint = gold.labcode if rng.random() < 0.4 else None
    return QueryRecord(
        triad=Triad(_light_noise(test, rng), _light_noise(sample, rng),
                    unit if rng.random() < 0.7 else _light_noise(unit, rng)),
        code_hint=code_hint,
        frequency=int(rng.integers(1, 5000)),
        stats=stats,
    )


def _confusable_ids(records: list[ReferenceRecord]) -> dict[int, set[str]]:
    """Records with a same-sample/same-unit sibling sharing a test token,
    mapped to the tokens that distinguish them from that sibling. Hard
    corruptions target exactly those tokens."""
    by_context: dict[tuple[str, str], list[int]] = {}
    for i, r in enumerate(records):
        by_context.setdefault((r.triad.sample, r.triad.unit), []).append(i)
    out: dict[int, set[str]] = {}
    for _, idxs in sorted(by_context.items()):
        for i in idxs:
            toks = set(records[i].triad.test.split())
            best_overlap = 0
            distinguishing: set[str] = set()
            for j in idxs:
                if j == i or records[j].triad.test == records[i].triad.test:
                    continue
                sib = set(records[j].triad.test.split())
                overlap = len(toks & sib)
                if overlap > best_overlap and toks - sib:
                    best_overlap = overlap
                    distinguishing = toks - sib
            if best_overlap and any(len(t) >= 4 for t in distinguishing):
                out[i] = distinguishing
    return out


def make_queries(records: list[ReferenceRecord], n_queries: int,
                 synonyms: SynonymDictionary, rng: np.random.Generator,
                 id_prefix: str = "q", hard_fraction: float = 0.15
                 ) -> tuple[list[QueryRecord], dict[str, str]]:
    confusable = _confusable_ids(records)
    confusable_idx = sorted(confusable)
    queries: list[QueryRecord] = []
    gold: dict[str, str] = {}
    n_hard = int(round(n_queries * hard_fraction)) if confusable_idx else 0
    for i in range(n_queries):
        hard = i < n_hard
        targets = None
        if hard:
            gold_idx = confusable_idx[int(rng.integers(len(confusable_idx)))]
            targets = confusable[gold_idx]
        else:
            gold_idx = int(rng.integers(len(records)))
        record = records[gold_idx]
        query = corrupt_query(record, synonyms, rng, hard, hard_targets=targets)
        qid = f"{id_prefix}{i + 1:06d}"
        queries.append(query)
        gold[qid] = record.id
    return queries, gold


def make_scale_records(n_records: int) -> list[ReferenceRecord]:
    """Large synthetic corpus for throughput and latency measurements.

    Crosses analyte names with qualifier tokens so the triad space is big
    enough for six-figure record counts; content realism matters less
    here than vocabulary shape and scale.
    """
    analytes = _analyte_names()
    qualifiers = ["", "total", "free", "direct", "ionized", "fasting", "random",
                  "peak", "trough", "morning", "evening", "high sensitivity",
                  "rapid", "confirmatory", "screening", "quantitative",
                  "qualitative", "panel", "reflex", "serial"]
    samples = sorted({s for group in _SAMPLE_SETS for s in group})
    units = sorted({u for group in _UNIT_SETS for u in group})
    records: list[ReferenceRecord] = []
    # Unique by construction: (analyte, qualifier) fixes the test name and
    # each (test, sample) combination receives a distinct unit slice.
    for qi, qualifier in enumerate(qualifiers):
        for ai, analyte in enumerate(analytes):
            test = f"{analyte} {qualifier}".strip()
            for si, sample in enumerate(samples):
                for uj in range(5):
                    unit = units[(qi * 5 + ai * 3 + si * 7 + uj * 11) % len(units)]
                    idx = len(records)
                    records.append(ReferenceRecord(
                        id=f"SC{idx:06d}",
                        triad=Triad(test, sample, unit),
                        labcode=f"{(20000 + idx) % 100000:05d}-{idx % 10}",
                        preferred_unit=unit,
                        conversion_factor=1.0,
                    ))
                    if len(records) >= n_records:
                        return records
    return records


def make_benchmark(n_records: int = 2000, n_eval: int = 500, n_tune: int = 300,
                   seed: int = 7, synonyms: SynonymDictionary | None = None,
                   hard_fraction: float = 0.15) -> Benchmark:
    """The shipped synthetic benchmark; fully determined by its arguments."""
    synonyms = synonyms or load_seed_dictionary()
    rng = np.random.default_rng(seed)
    records = make_reference_records(n_records, rng, synonyms)
    tune_queries, tune_gold = make_queries(
        records, n_tune, synonyms, rng, id_prefix="q", hard_fraction=hard_fraction)
    eval_queries, eval_gold = make_queries(
        records, n_eval, synonyms, rng, id_prefix="q", hard_fraction=hard_fraction)
    return Benchmark(records=records, tune_queries=tune_queries,
                     tune_gold=tune_gold, eval_queries=eval_queries,
                     eval_gold=eval_gold, seed=seed)
