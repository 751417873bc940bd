"""Language inventory, family-tree distance, and chain construction.

A catalog maps language codes to ancestry paths in a coarse family tree and
designates a reference (pivot) language.  Chains are ordered plans of
translation hops built in one of two topologies:

* ``pivot`` (default): every visited language is entered from the reference
  and immediately left back to it, so each even-numbered hop lands on a
  reference-language text that can be measured.
* ``direct``: the text moves straight from one language to the next; the
  reference appears once per cycle.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

TOPOLOGIES = ("pivot", "direct")


class CatalogError(ValueError):
    """Malformed catalog file or violated catalog invariant."""


class UnknownLanguageError(KeyError):
    """Language code absent from the catalog."""


@dataclass(frozen=True)
class Language:
    code: str
    name: str
    family_path: tuple[str, ...]


@dataclass(frozen=True)
class Catalog:
    languages: dict[str, Language]
    reference: str

    def __post_init__(self):
        if self.reference not in self.languages:
            raise CatalogError(f"reference language {self.reference!r} not in catalog")
        if len(self.languages) < 2:
            raise CatalogError("catalog needs at least two languages")

    def __contains__(self, code: str) -> bool:
        return code in self.languages

    def __len__(self) -> int:
        return len(self.languages)

    def codes(self) -> list[str]:
        return sorted(self.languages)

    def get(self, code: str) -> Language:
        try:
            return self.languages[code]
        except KeyError:
            raise UnknownLanguageError(code) from None

    def family_members(self, family: str) -> list[str]:
        """Codes whose ancestry path contains the given label, sorted."""
        return sorted(
            code
            for code, lang in self.languages.items()
            if family in lang.family_path
        )


def load_catalog(source: str | Path, reference: str = "en") -> Catalog:
    """Parse a catalog file: ``code<TAB>name<TAB>root>...>language`` lines.

    Lines starting with ``#`` and blank lines are ignored.  Duplicate codes,
    missing fields, empty ancestry segments, or a missing reference raise
    CatalogError.
    """
    path = Path(source)
    languages: dict[str, Language] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CatalogError(f"{path}:{lineno}: expected 3 tab-separated fields")
        code, name, raw_path = (p.strip() for p in parts)
        segments = tuple(seg.strip() for seg in raw_path.split(">"))
        if not code or not name or not segments or any(not seg for seg in segments):
            raise CatalogError(f"{path}:{lineno}: empty field or ancestry segment")
        if code in languages:
            raise CatalogError(f"{path}:{lineno}: duplicate language code {code!r}")
        languages[code] = Language(code=code, name=name, family_path=segments)
    if not languages:
        raise CatalogError(f"{path}: no language records")
    return Catalog(languages=languages, reference=reference)


def bundled_catalog(reference: str = "en") -> Catalog:
    """Load the 71-language inventory shipped with the package."""
    with resources.as_file(resources.files("mtchain.data") / "languages.tsv") as p:
        return load_catalog(p, reference=reference)


def tree_distance(catalog: Catalog, a: str, b: str) -> int:
    """Path length between two leaves through their lowest common ancestor.

    Ancestry paths that share no prefix meet at an implicit root above all
    families.  Zero iff the codes are equal.
    """
    path_a = catalog.get(a).family_path
    path_b = catalog.get(b).family_path
    common = 0
    for seg_a, seg_b in zip(path_a, path_b):
        if seg_a != seg_b:
            break
        common += 1
    return (len(path_a) - common) + (len(path_b) - common)


def max_tree_distance(catalog: Catalog) -> int:
    codes = catalog.codes()
    return max(
        tree_distance(catalog, a, b)
        for i, a in enumerate(codes)
        for b in codes[i + 1 :]
    )


@dataclass(frozen=True)
class ChainSpec:
    """Ordered plan of translation hops starting from the reference."""

    mode: str
    hop_plan: tuple[tuple[str, str], ...]
    hops: int
    label: str
    reference: str
    topology: str = "pivot"
    seed: int | None = None

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if len(self.hop_plan) != self.hops:
            raise ValueError("hop_plan length must equal hops")
        if self.hop_plan:
            if self.hop_plan[0][0] != self.reference:
                raise ValueError("first hop must leave the reference language")
            for prev, cur in zip(self.hop_plan, self.hop_plan[1:]):
                if prev[1] != cur[0]:
                    raise ValueError("consecutive hops must connect")

    def languages(self) -> list[str]:
        """Distinct codes touched by the plan, sorted."""
        seen = {self.reference}
        for src, tgt in self.hop_plan:
            seen.add(src)
            seen.add(tgt)
        return sorted(seen)


def _plan_from_visits(reference: str, visits: Iterable[str], hops: int, topology: str):
    """Lay out ``hops`` hops over the cyclic visit order."""
    visits = list(visits)
    plan: list[tuple[str, str]] = []
    if topology == "pivot":
        i = 0
        while len(plan) < hops:
            lang = visits[i % len(visits)]
            plan.append((reference, lang))
            if len(plan) < hops:
                plan.append((lang, reference))
            i += 1
    else:
        cycle = [reference] + visits
        for i in range(hops):
            plan.append((cycle[i % len(cycle)], cycle[(i + 1) % len(cycle)]))
    return tuple(plan)


def build_random_chain(
    catalog: Catalog,
    hops: int,
    seed: int,
    topology: str = "pivot",
    label: str | None = None,
) -> ChainSpec:
    """Chain visiting all non-reference languages in a seeded random cycle."""
    if hops < 1:
        raise ValueError("hops must be >= 1")
    candidates = [c for c in catalog.codes() if c != catalog.reference]
    order = candidates[:]
    random.Random(seed).shuffle(order)
    return ChainSpec(
        mode="random",
        hop_plan=_plan_from_visits(catalog.reference, order, hops, topology),
        hops=hops,
        label=label or f"random-s{seed}",
        reference=catalog.reference,
        topology=topology,
        seed=seed,
    )


def build_common_chain(
    catalog: Catalog,
    family: str,
    hops: int,
    topology: str = "pivot",
    label: str | None = None,
) -> ChainSpec:
    """Chain cycling through one family's languages (reference excluded)."""
    if hops < 1:
        raise ValueError("hops must be >= 1")
    members = [c for c in catalog.family_members(family) if c != catalog.reference]
    if len(members) < 2:
        raise CatalogError(
            f"family {family!r} needs >= 2 non-reference languages, found {len(members)}"
        )
    return ChainSpec(
        mode="common",
        hop_plan=_plan_from_visits(catalog.reference, members, hops, topology),
        hops=hops,
        label=label or f"common-{family.lower()}",
        reference=catalog.reference,
        topology=topology,
    )


def build_mixed_chain(
    catalog: Catalog,
    families: list[str],
    hops: int,
    seed: int,
    topology: str = "pivot",
    label: str | None = None,
) -> ChainSpec:
    """Chain cycling through one seeded pick per family plus the reference."""
    if hops < 1:
        raise ValueError("hops must be >= 1")
    distinct = list(dict.fromkeys(families))
    if len(distinct) < 2:
        raise CatalogError("mixed chain needs >= 2 distinct families")
    rng = random.Random(seed)
    picks: list[str] = []
    for family in distinct:
        members = [c for c in catalog.family_members(family) if c != catalog.reference]
        if not members:
            raise CatalogError(f"family {family!r} has no non-reference languages")
        picks.append(rng.choice(members))
    if len(set(picks)) != len(picks):
        raise CatalogError("family picks overlap; choose non-overlapping family labels")
    return ChainSpec(
        mode="mixed",
        hop_plan=_plan_from_visits(catalog.reference, picks, hops, topology),
        hops=hops,
        label=label or f"mixed-s{seed}",
        reference=catalog.reference,
        topology=topology,
        seed=seed,
    )
