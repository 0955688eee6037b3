#!/usr/bin/env python3
"""Regenerate the bundled toy dataset and corpus (data/toy_*.jsonl).

The content is fully synthetic and deterministic: 50 questions about
invented places, inventions, and books, each with a gold document that
states the answer, plus 150 filler documents. Proper nouns are built from
fixed syllable tables so every question has lexically distinctive terms
for BM25 to latch onto.
"""

import json
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]

PREFIXES = [
    "Vel", "Zor", "Quin", "Bram", "Thal", "Cor", "Mar", "Fen",
    "Gal", "Ost", "Ryn", "Dul", "Ash", "Kel", "Nor", "Pell",
    "Sar", "Tur", "Vex", "Wyn", "Hol", "Ilm", "Jor", "Lum", "Mir",
]
COUNTRY_SUFFIXES = ["mora", "dania", "thia", "gard", "lund", "mark", "via", "stan", "land", "esse"]
CITY_SUFFIXES = ["inthel", "ford", "haven", "wick", "holm", "grad", "mouth", "stead", "berg", "dale"]
PERSON_FIRST = ["Edra", "Tomas", "Livia", "Brann", "Ceska", "Doran", "Ysolde", "Petr", "Anniko", "Ruval"]
PERSON_LAST = ["Quillon", "Braddock", "Senmara", "Olvetti", "Karsh", "Demir", "Falkner", "Ostrov", "Lindqvist", "Marchetti"]
DEVICES = ["chronostat", "heliograph press", "tidal loom", "resonance furnace", "glass capacitor",
           "arc seeder", "pendulum filter", "spore engine", "mica telegraph", "brine condenser"]
BOOKS = ["The Salt Meridian", "Winter of the Cartographers", "A Ledger of Small Storms",
         "The Orchard Below", "Songs for a Dry Harbor", "The Last Almanac", "House of Standing Water",
         "The Gilded Fen", "Letters from the Interior", "The Quiet Confluence"]
RIVERS = ["Alden", "Brisk", "Corva", "Dunmere", "Eldwash", "Farrow", "Gleam", "Hartbeck", "Ister", "Jennet"]

FILLER_TOPICS = [
    "lake", "festival", "bridge", "observatory", "lighthouse", "market", "orchard",
    "railway", "quarry", "library", "harbor", "windmill", "garden", "museum", "canal",
]


def build_examples():
    examples = []
    countries = [p + COUNTRY_SUFFIXES[i % len(COUNTRY_SUFFIXES)] for i, p in enumerate(PREFIXES[:20])]
    capitals = [p + CITY_SUFFIXES[i % len(CITY_SUFFIXES)] for i, p in enumerate(PREFIXES[5:25])]
    for i in range(20):
        country, capital = countries[i], capitals[i]
        examples.append(
            {
                "query": f"What is the capital of {country}?",
                "answers": [capital],
                "doc_title": country,
                "doc_text": (
                    f"{capital} is the capital of {country}. The city has served as the seat of "
                    f"government since the federation charter and hosts the national archive."
                ),
            }
        )
    for i in range(10):
        river = RIVERS[i]
        city = PREFIXES[(i * 3) % len(PREFIXES)] + CITY_SUFFIXES[(i * 7) % len(CITY_SUFFIXES)]
        examples.append(
            {
                "query": f"Which city lies at the mouth of the river {river}?",
                "answers": [city],
                "doc_title": f"River {river}",
                "doc_text": (
                    f"The river {river} drains the eastern uplands and reaches the sea at {city}, "
                    f"a port city at the mouth of the {river} known for its shipyards."
                ),
            }
        )
    for i in range(10):
        person = f"{PERSON_FIRST[i]} {PERSON_LAST[i]}"
        device = DEVICES[i]
        examples.append(
            {
                "query": f"Who invented the {device}?",
                "answers": [person],
                "doc_title": device.title(),
                "doc_text": (
                    f"The {device} was invented by {person}, whose prototype was first "
                    f"demonstrated at the provincial exhibition and patented two years later."
                ),
            }
        )
    for i in range(10):
        book = BOOKS[i]
        person = f"{PERSON_FIRST[9 - i]} {PERSON_LAST[(i + 3) % 10]}"
        examples.append(
            {
                "query": f"Who wrote the novel {book}?",
                "answers": [person],
                "doc_title": book,
                "doc_text": (
                    f"{book} is a novel written by {person}. It follows a surveyor through a "
                    f"disputed border season and won the lowland prize for fiction."
                ),
            }
        )
    return examples


def build_fillers():
    fillers = []
    for i in range(150):
        topic = FILLER_TOPICS[i % len(FILLER_TOPICS)]
        name = PREFIXES[(i * 11) % len(PREFIXES)] + COUNTRY_SUFFIXES[(i * 5) % len(COUNTRY_SUFFIXES)][:-2] + "el"
        fillers.append(
            {
                "title": f"{name} {topic}",
                "text": (
                    f"The {name} {topic} was restored in the previous decade and draws visitors "
                    f"during the dry months. Local records describe {i % 9 + 2} earlier structures "
                    f"on the same site."
                ),
            }
        )
    return fillers


def main():
    data_dir = ROOT / "data"
    data_dir.mkdir(exist_ok=True)
    examples = build_examples()
    fillers = build_fillers()

    questions = []
    corpus = []
    for i, ex in enumerate(examples):
        doc_id = f"d{i + 1:03d}"
        doc = {"id": doc_id, "title": ex["doc_title"], "text": ex["doc_text"]}
        corpus.append(doc)
        questions.append(
            {
                "id": f"q{i + 1:03d}",
                "query": ex["query"],
                "answers": ex["answers"],
                "gold_docs": [doc],
            }
        )
    for j, filler in enumerate(fillers):
        corpus.append({"id": f"d{j + 51:03d}", "title": filler["title"], "text": filler["text"]})

    with open(data_dir / "toy_questions.jsonl", "w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps(q, ensure_ascii=False) + "\n")
    with open(data_dir / "toy_corpus.jsonl", "w", encoding="utf-8") as fh:
        for d in corpus:
            fh.write(json.dumps(d, ensure_ascii=False) + "\n")
    print(f"wrote {len(questions)} questions and {len(corpus)} corpus docs to {data_dir}")


if __name__ == "__main__":
    main()
