"""Regenerate the bundled fixture corpora under src/typelink/data/fixtures/.

Run from the repository root: ``python scripts/make_fixtures.py``. Output is
deterministic; re-running must leave the files unchanged.
"""

import json
import random
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from typelink.lexicon import load_lexicon  # noqa: E402
from typelink.type_system import default_type_map, groups_of  # noqa: E402

OUT = ROOT / "src" / "typelink" / "data" / "fixtures"

TEMPLATES = {
    "Disease or Syndrome": [
        "The patient was diagnosed with {m} after the clinical exam.",
        "History of {m} was noted in the chart by the attending physician.",
        "She has been treated for {m} for several years without complications.",
    ],
    "Phenomena": [
        "Exposure to {m} outdoors during the winter storm was recorded.",
        "The samples were kept at {m} overnight in the freezer.",
    ],
    "Pharmacologic Substance": [
        "He was prescribed {m} twice daily with meals.",
        "The pharmacy dispensed {m} tablets for the week.",
        "Take {m} as directed, one dose every morning.",
    ],
    "Sign or Symptom": [
        "The patient complains of {m} since yesterday evening.",
        "She presents with {m} and mild fatigue.",
    ],
    "Chemicals & Drugs": [
        "Serum levels of {m} were measured in the assay.",
        "The compound {m} binds its target in vitro.",
    ],
    "Organic Chemical": [
        "The solvent {m} was evaporated from the mixture.",
    ],
    "Anatomy": [
        "Imaging showed a small lesion in the {m} near the border.",
        "A specimen from the {m} was examined under the microscope.",
    ],
    "Living Beings": [
        "The strain of {m} was isolated from the sample.",
        "Infection studies used {m} as the host organism.",
    ],
    "Neoplastic Process": [
        "Tumor staging for {m} indicated metastasis to nodes.",
        "Oncology follow-up for {m} was scheduled next month.",
    ],
    "Mental or Behavioral Dysfunction": [
        "Psychiatric evaluation confirmed {m} with low mood.",
        "Counseling for {m} was recommended by the psychiatrist.",
    ],
    "Disorders": [
        "After the fall, an x-ray confirmed a {m} of the wrist.",
        "The accident caused a {m} on the forearm.",
    ],
    "Finding": [
        "The intake form records {m} status as current.",
    ],
    "Functional Concept": [
        "Researchers monitored {m} over the study period.",
    ],
    "Genes & Molecular Sequences": [
        "Sequencing detected a mutation in {m} in the tumor sample.",
    ],
    "Objects": [
        "The diet included {m} and vegetables each day.",
    ],
    "Occupations": [
        "She trained in {m} at the university department.",
    ],
    "Organizations": [
        "The {m} issued a statement about the program.",
    ],
    "Pathologic Function": [
        "The wound showed {m} around the incision site.",
    ],
    "Physiology": [
        "Staff measured {m} every four hours on the ward.",
    ],
    "Procedures": [
        "The team scheduled a {m} for the following morning.",
        "Results of the {m} were reviewed with the family.",
    ],
    "Qualitative Concept": [
        "The reaction was rated as {m} by the reviewer.",
    ],
    "Concepts & Ideas": [
        "The committee discussed the {m} in the annual report.",
    ],
    "Devices": [
        "The instructor demonstrated how to use the {m} correctly.",
    ],
    "Activities & Behaviors": [
        "Daily {m} was encouraged by the coach.",
    ],
}

AMBIGUOUS = ["cold", "cough", "MS", "RA", "ASA", "apple", "culture", "discharge"]


def primary_group(concept, tm):
    groups = sorted(groups_of(tm, concept.fine_types))
    # Prefer the more specific singleton groups for templates.
    for g in groups:
        if g != "Chemicals & Drugs":
            return g
    return groups[0]


def surfaces(concept):
    return [concept.preferred_name, *concept.aliases]


def sample_mention(rng, lex, tm, by_surface):
    if rng.random() < 0.45:
        surface = rng.choice(AMBIGUOUS)
        cuis = by_surface[surface.lower()]
        cui = rng.choice(cuis)
    else:
        cui = rng.choice(sorted(lex.concepts))
        concept = lex.concepts[cui]
        surface = rng.choice(surfaces(concept))
    concept = lex.concepts[cui]
    return surface, cui, primary_group(concept, tm)


def make_docs(rng, lex, tm, prefix, n_docs, per_doc, mitral_rate=0.0):
    by_surface = {k: list(v) for k, v in lex.alias_index.items()}
    docs, gold = [], []
    for d in range(n_docs):
        doc_id = f"{prefix}{d:03d}"
        parts, anns = [], []
        pos = 0
        for _ in range(per_doc):
            surface, cui, group = sample_mention(rng, lex, tm, by_surface)
            if surface == "MS" and rng.random() < mitral_rate:
                # Annotated as a concept the surface does not retrieve.
                cui, group = "C-mitralstenosis", "Disease or Syndrome"
            template = rng.choice(TEMPLATES[group])
            before, after = template.split("{m}")
            if pos:
                parts.append(" ")
                pos += 1
            start = pos + len(before)
            sentence = before + surface + after
            parts.append(sentence)
            anns.append({"doc_id": doc_id, "start": start, "end": start + len(surface), "cui": cui})
            pos += len(sentence)
        text = "".join(parts)
        for a in anns:
            assert text[a["start"]:a["end"]]
        docs.append({"id": doc_id, "text": text})
        gold.extend(anns)
    return docs, gold


RUNNY_NOSE = {"id": "runny_nose", "text": "The patient presents with a runny nose and cough; she was diagnosed with a cold."}
RUNNY_NOSE_GOLD = [
    {"doc_id": "runny_nose", "start": 28, "end": 38, "cui": "C-rhinorrhea"},
    {"doc_id": "runny_nose", "start": 43, "end": 48, "cui": "C-cough"},
    {"doc_id": "runny_nose", "start": 75, "end": 79, "cui": "C-commoncold"},
]

HEADED = [
    {"id": "pm001", "text": "Aspirin lowers fever. Patients on low-dose aspirin had fewer events, and aspirin was well tolerated.",
     "headings": [{"name": "Aspirin", "cui": "C-aspirin"}, {"name": "Fever", "cui": "C-fever"}]},
    {"id": "pm002", "text": "Metformin improved control of diabetes. Glucophage is a brand of the same drug.",
     "headings": [{"name": "Metformin", "cui": "C-metformin"}, {"name": "Diabetes Mellitus", "cui": "C-diabetes"}]},
    {"id": "pm003", "text": "Asthma severity correlated with inhaler use in the cohort.",
     "headings": [{"name": "Asthma", "cui": "C-asthma"}, {"name": "Inhaler", "cui": "C-inhaler"},
                  {"name": "Unknown Heading", "cui": "C-notinlexicon"}]},
    {"id": "pm004", "text": "Breast cancer screening with MRI detected early lesions.",
     "headings": [{"name": "Breast Cancer", "cui": "C-breastcancer"},
                  {"name": "Magnetic Resonance Imaging", "cui": "C-mri"}]},
    {"id": "pm005", "text": "No headings were assigned to this abstract about fever.", "headings": []},
]
# Hand-annotated reference for the audit: every mention of a heading concept.
HEADED_GOLD = [
    ("pm001", "Aspirin", 0, "C-aspirin"),
    ("pm001", "fever", 0, "C-fever"),
    ("pm001", "low-dose aspirin", 0, "C-lowdoseaspirin"),
    ("pm001", "aspirin", 1, "C-aspirin"),
    ("pm002", "Metformin", 0, "C-metformin"),
    ("pm002", "diabetes", 0, "C-diabetes"),
    ("pm002", "Glucophage", 0, "C-metformin"),
    ("pm003", "Asthma", 0, "C-asthma"),
    ("pm003", "inhaler", 0, "C-inhaler"),
    ("pm004", "Breast cancer", 0, "C-breastcancer"),
    ("pm004", "MRI", 0, "C-mri"),
]


def locate(text, surface, occurrence):
    pos = -1
    for _ in range(occurrence + 1):
        pos = text.index(surface, pos + 1)
    return pos, pos + len(surface)

LINKED = [
    {"id": "wiki001", "text": "The common cold is a viral infection; aspirin may ease the headache.",
     "links": [{"start": 4, "end": 15, "page_key": "Common_cold"},
               {"start": 38, "end": 45, "page_key": "Aspirin"},
               {"start": 59, "end": 67, "page_key": "Headache"}]},
    {"id": "wiki002", "text": "Influenza virus spreads in winter; see the World Health Organization advice.",
     "links": [{"start": 0, "end": 15, "page_key": "Influenza_virus"},
               {"start": 43, "end": 68, "page_key": "World_Health_Organization"},
               {"start": 27, "end": 33, "page_key": "Winter"}]},
    {"id": "wiki003", "text": "Hypertension is treated with lifestyle change.",
     "links": [{"start": 0, "end": 12, "page_key": "Hypertension"},
               {"start": 29, "end": 45, "page_key": "Lifestyle_change"}]},
]
CROSSWALK = [
    ("Common_cold", "C-commoncold"),
    ("Aspirin", "C-aspirin"),
    ("Headache", "C-headache"),
    ("Influenza_virus", "C-fluvirus"),
    ("World_Health_Organization", "C-who"),
    ("Hypertension", "C-hypertension"),
    ("Lifestyle_change", "C-lifestylechange"),
]


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in rows:
            fh.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    tm = default_type_map()
    lex = load_lexicon(type_map=tm)
    OUT.mkdir(parents=True, exist_ok=True)

    rng = random.Random(20200101)
    docs, gold = make_docs(rng, lex, tm, "d", 60, 4, mitral_rate=0.6)
    docs.append(RUNNY_NOSE)
    gold.extend(RUNNY_NOSE_GOLD)
    write_jsonl(OUT / "docs.jsonl", docs)
    write_jsonl(OUT / "gold.jsonl", gold)

    rng = random.Random(31337)
    tdocs, tgold = make_docs(rng, lex, tm, "t", 200, 4)
    write_jsonl(OUT / "train_docs.jsonl", tdocs)
    write_jsonl(OUT / "train.jsonl", tgold)

    texts = {d["id"]: d["text"] for d in HEADED}
    headed_gold = []
    for doc_id, surface, occ, cui in HEADED_GOLD:
        start, end = locate(texts[doc_id], surface, occ)
        headed_gold.append({"doc_id": doc_id, "start": start, "end": end, "cui": cui})
    write_jsonl(OUT / "headed_docs.jsonl", HEADED)
    write_jsonl(OUT / "headed_gold.jsonl", headed_gold)
    write_jsonl(OUT / "linked_docs.jsonl", LINKED)
    with open(OUT / "crosswalk.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for k, v in CROSSWALK:
            fh.write(f"{k}\t{v}\n")


if __name__ == "__main__":
    main()
