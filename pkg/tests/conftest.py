import pytest

from labharmony.semantic import HashingEmbedder
from labharmony.hybrid import HybridRetriever
from labharmony.synonyms import SynonymDictionary, load_seed_dictionary
from labharmony.types import ReferenceRecord, Triad


@pytest.fixture(scope="session")
def seed_dict() -> SynonymDictionary:
    return load_seed_dictionary()


@pytest.fixture()
def tiny_dict() -> SynonymDictionary:
    return SynonymDictionary.from_groups(
        test=[["hemoglobin", "hgb", "hb"], ["glucose", "glu"]],
        sample=[["plasma", "blood plasma", "plas"], ["serum", "ser"]],
        unit=[["10^3/l", "thou/l", "thousand/l"], ["g/dl", "gm/dl"]],
    )


@pytest.fixture()
def small_records() -> list[ReferenceRecord]:
    return [
        ReferenceRecord(id="r1", triad=Triad("glucose", "serum", "mg/dl"),
                        labcode="2345-7", preferred_unit="mg/dl"),
        ReferenceRecord(id="r2", triad=Triad("glucose", "urine", "mg/dl"),
                        labcode="2350-7", preferred_unit="mg/dl"),
        ReferenceRecord(id="r3", triad=Triad("hemoglobin", "blood", "g/dl"),
                        labcode="718-7", preferred_unit="g/dl",
                        synonyms=("hgb",)),
        ReferenceRecord(id="r4", triad=Triad("creatinine", "serum", "mg/dl"),
                        labcode="2160-0", preferred_unit="mg/dl"),
        ReferenceRecord(id="r5", triad=Triad("platelet count", "blood", "10^3/l"),
                        labcode="777-3", preferred_unit="10^3/l"),
    ]


@pytest.fixture()
def small_retriever(small_records, tiny_dict) -> HybridRetriever:
    return HybridRetriever(
        synonyms=tiny_dict, provider=HashingEmbedder(dimension=64)
    ).fit(small_records)
