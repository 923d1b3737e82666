"""Deterministic toy corpora for demos and tests.

Generates paired source/target records per task from seeded templates. The
texts are small but structurally realistic: dialogues have 8-12 speaker
turns, documents run 7-9 sentences with named entities, question paragraphs
contain the answer span verbatim. Shared content words between sources and
targets keep the rule-based mock judge meaningful.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from .corpus import CorpusRecord, write_records

_PEOPLE = [
    "Harper", "Quinn", "Marisol", "Devon", "Yusuf", "Lena",
    "Carmen", "Silas", "Nadia", "Bruno", "Opal", "Theo",
]

_TOPICS = [
    {"activity": "painting", "object": "fence", "place": "backyard", "detail": "weather"},
    {"activity": "repairing", "object": "bicycle", "place": "garage", "detail": "brakes"},
    {"activity": "planting", "object": "tomatoes", "place": "garden", "detail": "seedlings"},
    {"activity": "organizing", "object": "bookshelf", "place": "study", "detail": "novels"},
    {"activity": "baking", "object": "bread", "place": "kitchen", "detail": "starter"},
    {"activity": "rehearsing", "object": "concert", "place": "theater", "detail": "strings"},
]

_CITIES = ["Marwick", "Ellsworth", "Baytown", "Fernridge", "Calder", "Westhaven"]
_ORGS = [
    "the Harbor Council",
    "the Northfield Trust",
    "the Civic Works Board",
    "the Valley Transit Authority",
]
_PROJECTS = ["library", "footbridge", "greenway", "market hall", "tram depot", "observatory"]

_SITES = [
    "the riverside museum",
    "the old granary hall",
    "the harbor pavilion",
    "the hillside amphitheater",
]
_EVENTS = ["annual exhibit", "spring festival", "science showcase", "writers forum"]
_FIGURES = ["three hundred paintings", "forty local vendors", "ninety student projects"]


def _dialogue_pair(rng: random.Random, index: int) -> tuple[CorpusRecord, CorpusRecord]:
    a, b, helper = rng.sample(_PEOPLE, 3)
    topic = rng.choice(_TOPICS)
    slots = {"a": a, "b": b, "c": helper, **topic}
    script = [
        "{a}: Have you started {activity} the {object} yet?",
        "{b}: Almost, the {place} {object} still needs attention.",
        "{a}: What is slowing the {activity} down?",
        "{b}: The {detail} caused a delay this morning.",
        "{a}: Could we finish the {activity} together tomorrow?",
        "{b}: Tomorrow works, bring the supplies to the {place}.",
        "{a}: Should we ask {c} to help with the {object}?",
        "{b}: Good idea, {c} handled the {detail} last time.",
        "{a}: Then we meet at the {place} after lunch.",
        "{b}: Agreed, the {activity} should be quick with three people.",
        "{a}: How long will the {activity} usually take?",
        "{b}: About two hours if the {detail} cooperates.",
    ]
    n_turns = rng.randint(8, 12)
    text = "\n".join(line.format(**slots) for line in script[:n_turns])
    summary_parts = [
        "{a} and {b} discuss {activity} the {object} in the {place}.",
        "{b} mentions a delay caused by the {detail}.",
    ]
    if rng.random() < 0.5:
        summary_parts.append("They agree to finish together with {c}.")
    summary = " ".join(part.format(**slots) for part in summary_parts)
    pid = f"dlg-{index:04d}"
    return (
        CorpusRecord(id=f"{pid}-src", task="dialogue_summ", role="source", text=text, pair_id=pid),
        CorpusRecord(id=f"{pid}-tgt", task="dialogue_summ", role="target", text=summary, pair_id=pid),
    )


def _document_pair(rng: random.Random, index: int) -> tuple[CorpusRecord, CorpusRecord]:
    city = rng.choice(_CITIES)
    org = rng.choice(_ORGS)
    person = rng.choice(_PEOPLE)
    project = rng.choice(_PROJECTS)
    amount = rng.randint(2, 9) * 100
    sentences = [
        f"{org.capitalize()} approved funding for a new {project} in {city} on Monday.",
        f"Officials said the {project} would serve residents across {city}.",
        f"{person} Calloway, who leads the planning group, called the decision overdue.",
        "Construction is expected to begin in the spring.",
        "Local businesses welcomed the announcement at a crowded briefing.",
        f"Funding totals {amount} thousand dollars over three years.",
        "Critics warned that maintenance costs could rise sharply.",
        "A public meeting is scheduled for next month.",
        "The planners will publish a detailed construction schedule soon.",
    ]
    n_sentences = rng.randint(7, 9)
    text = " ".join(sentences[:n_sentences])
    summary = (
        f"{org.capitalize()} approved a {project} for {city}, "
        "with construction starting in the spring."
    )
    pid = f"doc-{index:04d}"
    return (
        CorpusRecord(id=f"{pid}-src", task="doc_summ", role="source", text=text, pair_id=pid),
        CorpusRecord(id=f"{pid}-tgt", task="doc_summ", role="target", text=summary, pair_id=pid),
    )


def _question_pair(rng: random.Random, index: int) -> tuple[CorpusRecord, CorpusRecord]:
    site = rng.choice(_SITES)
    event = rng.choice(_EVENTS)
    figure = rng.choice(_FIGURES)
    sentences = [
        f"The {event} opened to large crowds last weekend.",
        f"Organizers hosted the {event} at {site} for the first time.",
        f"Visitors praised the collection of {figure}.",
        "Tickets sold out within the first two days.",
        "Several schools arranged guided tours during the week.",
        "Organizers plan to extend the schedule next season.",
    ]
    text = " ".join(sentences)
    question = f"Where did organizers host the {event}?"
    pid = f"qg-{index:04d}"
    return (
        CorpusRecord(
            id=f"{pid}-src",
            task="question_gen",
            role="source",
            text=text,
            answer_span=site,
            pair_id=pid,
        ),
        CorpusRecord(
            id=f"{pid}-tgt",
            task="question_gen",
            role="target",
            text=question,
            answer_span=site,
            pair_id=pid,
        ),
    )


_GENERATORS = {
    "dialogue_summ": _dialogue_pair,
    "doc_summ": _document_pair,
    "question_gen": _question_pair,
}


def generate_pairs(
    task: str, n_pairs: int, seed: int, start_index: int = 0
) -> list[tuple[CorpusRecord, CorpusRecord]]:
    rng = random.Random(seed)
    generator = _GENERATORS[task]
    return [generator(rng, start_index + i) for i in range(n_pairs)]


def write_pair_file(path: str | Path, pairs: list[tuple[CorpusRecord, CorpusRecord]]) -> Path:
    flat = [rec for pair in pairs for rec in pair]
    write_records(path, flat)
    return Path(path)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Generate a deterministic toy paired corpus.")
    parser.add_argument("--task", required=True, choices=sorted(_GENERATORS))
    parser.add_argument("--pairs", type=int, default=50)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    parser.add_argument("--test-pairs", type=int, default=0)
    parser.add_argument("--test-out")
    args = parser.parse_args(argv)

    write_pair_file(args.out, generate_pairs(args.task, args.pairs, args.seed))
    print(f"wrote {args.pairs} pairs to {args.out}")
    if args.test_pairs:
        if not args.test_out:
            parser.error("--test-pairs needs --test-out")
        test = generate_pairs(args.task, args.test_pairs, args.seed + 1, start_index=args.pairs)
        write_pair_file(args.test_out, test)
        print(f"wrote {args.test_pairs} test pairs to {args.test_out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
