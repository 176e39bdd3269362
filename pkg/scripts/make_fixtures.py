#!/usr/bin/env python3
"""Regenerate the bundled fixture corpus under tests/fixtures/.

Everything here is deterministic (fixed seed, fixed templates), so reruns
produce byte-identical files. The golden prompt strings under tests/golden/
are hand-written against the serialization rules and are NOT regenerated by
this script.
"""
from __future__ import annotations

import json
import random
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

AREAS = ["centre", "east", "north", "south", "west"]
DAYS = ["monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"]
PRICES = ["expensive", "cheap", "moderate"]


def slot(name, description, is_categorical=False, possible_values=()):
    return {
        "name": name,
        "description": description,
        "is_categorical": is_categorical,
        "possible_values": list(possible_values),
    }


SCHEMA = [
    {
        "service_name": "train",
        "description": "find trains that take you to places",
        "slots": [
            slot("destination", "destination of the train"),
            slot("departure", "departure location of the train"),
            slot("day", "day of the train", True, DAYS),
            slot("arriveby", "arrival time of the train"),
            slot("leaveat", "leaving time for the train"),
            slot("bookpeople", "number of train tickets", True, [str(i) for i in range(1, 9)]),
        ],
    },
    {
        "service_name": "hotel",
        "description": "hotel reservations and vacation stays",
        "slots": [
            slot("name", "name of the hotel"),
            slot("area", "area or place of the hotel", True, AREAS),
            slot("pricerange", "price budget of the hotel", True, PRICES),
            slot("internet", "whether the hotel has internet", True, ["yes", "no", "free", "don't care"]),
            slot("stars", "star rating of the hotel", True, [str(i) for i in range(6)]),
            slot("ref", "reference number of the hotel booking"),
        ],
    },
    {
        "service_name": "restaurant",
        "description": "find places to dine and whet your appetite",
        "slots": [
            slot("food", "the cuisine of the restaurant you are looking for"),
            slot("area", "area or place of the restaurant", True, AREAS),
            slot("pricerange", "price budget for the restaurant", True, PRICES),
            slot("name", "name of the restaurant"),
            slot("booktime", "time of the restaurant booking"),
        ],
    },
    {
        "service_name": "attraction",
        "description": "find touristy stuff to do around you",
        "slots": [
            slot("type", "type of attraction or point of interest", True,
                 ["museum", "nightclub", "park", "cinema", "theatre"]),
            slot("area", "area to search for attractions", True, AREAS),
            slot("name", "name of the attraction"),
        ],
    },
    {
        "service_name": "taxi",
        "description": "rent cheap cabs to avoid traffic",
        "slots": [
            slot("destination", "destination of taxi"),
            slot("departure", "what place do you want to meet the taxi"),
            slot("leaveat", "what time you want the taxi to leave"),
        ],
    },
    {
        "service_name": "bus",
        "description": "bus journeys between cities",
        "slots": [
            slot("destination", "destination of the bus"),
            slot("departure", "departure location of the bus"),
            slot("day", "day to use the bus on", True, DAYS),
        ],
    },
    {
        "service_name": "police",
        "description": "police station information",
        "slots": [slot("name", "name of the police station")],
    },
    {
        "service_name": "hospital",
        "description": "hospital information",
        "slots": [slot("department", "the kind of hospital department")],
    },
]


def frames_for(state: dict[tuple[str, str], object]) -> list[dict]:
    by_domain: dict[str, dict[str, list[str]]] = {}
    for (domain, slot_name), value in sorted(state.items()):
        values = value if isinstance(value, list) else [value]
        by_domain.setdefault(domain, {})[slot_name] = values
    return [
        {"service": domain, "state": {"slot_values": slots}}
        for domain, slots in sorted(by_domain.items())
    ]


def dialogue(dialogue_id: str, script: list) -> dict:
    """script: list of ("USER", text, cumulative_state_dict) or ("SYSTEM", text)."""
    turns = []
    for entry in script:
        if entry[0] == "USER":
            _, text, state = entry
            turns.append({"speaker": "USER", "utterance": text, "frames": frames_for(state)})
        else:
            turns.append({"speaker": "SYSTEM", "utterance": entry[1]})
    return {"dialogue_id": dialogue_id, "turns": turns}


def hand_dialogues() -> list[dict]:
    out = []

    # The exemplar the golden prompt strings are written against.
    out.append(dialogue("fix-fig1", [
        ("USER", "I need a train to London on thursday",
         {("train", "day"): "thursday", ("train", "destination"): "london"}),
    ]))

    # Description-augmented exemplar for the second golden string.
    out.append(dialogue("fix-hotel-desc", [
        ("USER", "I am looking for a cheap place to stay with free wifi",
         {("hotel", "pricerange"): "cheap", ("hotel", "internet"): "free"}),
        ("SYSTEM", "There are 10 cheap places with wifi . Which part of town ?"),
        ("USER", "The centre would be best , and it should be zero stars .",
         {("hotel", "pricerange"): "cheap", ("hotel", "internet"): "free",
          ("hotel", "area"): "centre", ("hotel", "stars"): "0"}),
    ]))

    # dontcare answer to a system question.
    out.append(dialogue("fix-dontcare", [
        ("USER", "Hi can you help me find a very nice Italian restaurant near the centre of cambridge ?",
         {("restaurant", "food"): "italian", ("restaurant", "area"): "centre"}),
        ("SYSTEM", "Please specify your price range ."),
        ("USER", "It does not matter .",
         {("restaurant", "food"): "italian", ("restaurant", "area"): "centre",
          ("restaurant", "pricerange"): "dontcare"}),
    ]))

    # Gold value annotated with spelling alternatives.
    out.append(dialogue("fix-alternatives", [
        ("USER", "Can you help me find a train for Sunday going to London Kings Cross ?",
         {("train", "day"): "sunday",
          ("train", "destination"): ["london kings cross", "London Kings Cross"]}),
        ("SYSTEM", "TR6595 leaves at 19:00 . Does that work for you ?"),
        ("USER", "Yes , I think the 20:54 arrival time should work .",
         {("train", "day"): "sunday",
          ("train", "destination"): ["london kings cross", "London Kings Cross"],
          ("train", "arriveby"): "20:54"}),
    ]))

    # References an excluded domain; its frame is dropped on parse.
    out.append(dialogue("fix-police", [
        ("USER", "I was robbed and need the parkside police station please .",
         {("police", "name"): "parkside police station"}),
        ("SYSTEM", "Parkside police station is in the centre , anything else ?"),
        ("USER", "I also need a taxi to magdalene college .",
         {("police", "name"): "parkside police station",
          ("taxi", "destination"): "magdalene college"}),
    ]))

    # Longer multi-domain dialogue.
    out.append(dialogue("fix-multidomain", [
        ("USER", "I need a train out of Cambridge after 17:30 .",
         {("train", "departure"): "cambridge", ("train", "leaveat"): "17:30"}),
        ("SYSTEM", "What is your destination ?"),
        ("USER", "I'd like to get to leicester on friday .",
         {("train", "departure"): "cambridge", ("train", "leaveat"): "17:30",
          ("train", "destination"): "leicester", ("train", "day"): "friday"}),
        ("SYSTEM", "TR1234 leaves at 18:00 . Shall I book it ?"),
        ("USER", "Yes please , for 5 people . I also want a moderate hotel in the north .",
         {("train", "departure"): "cambridge", ("train", "leaveat"): "17:30",
          ("train", "destination"): "leicester", ("train", "day"): "friday",
          ("train", "bookpeople"): "5", ("hotel", "pricerange"): "moderate",
          ("hotel", "area"): "north"}),
        ("SYSTEM", "Booked . The acorn guest house is a moderate hotel in the north ."),
        ("USER", "Great , book the acorn guest house , i do not mind about internet .",
         {("train", "departure"): "cambridge", ("train", "leaveat"): "17:30",
          ("train", "destination"): "leicester", ("train", "day"): "friday",
          ("train", "bookpeople"): "5", ("hotel", "pricerange"): "moderate",
          ("hotel", "area"): "north", ("hotel", "name"): "acorn guest house",
          ("hotel", "internet"): "don't care"}),
    ]))
    return out


POOLS = {
    ("train", "destination"): ["cambridge", "london kings cross", "leicester", "birmingham new street", "stevenage", "norwich"],
    ("train", "departure"): ["cambridge", "ely", "peterborough", "london liverpool street"],
    ("train", "arriveby"): ["16:45", "20:54", "08:15", "11:30"],
    ("train", "leaveat"): ["09:00", "13:20", "19:00"],
    ("hotel", "name"): ["acorn guest house", "alexander bed and breakfast", "ashley hotel", "el shaddia guest house"],
    ("hotel", "ref"): ["a1b2c3d4", "x9y8z7w6", "qq12ww34"],
    ("restaurant", "food"): ["italian", "chinese", "indian", "british", "european"],
    ("restaurant", "name"): ["pizza hut city centre", "golden wok", "cambridge chop house", "the missing sock"],
    ("restaurant", "booktime"): ["13:30", "17:11", "18:45", "12:15"],
    ("attraction", "name"): ["adc theatre", "castle galleries", "all saints church"],
    ("taxi", "destination"): ["copper kettle", "magdalene college", "university arms hotel"],
    ("taxi", "departure"): ["da vinci pizzeria", "the junction", "finches bed and breakfast"],
    ("taxi", "leaveat"): ["14:45", "11:15", "09:30"],
    ("bus", "destination"): ["london", "peterborough", "ely"],
    ("bus", "departure"): ["cambridge", "norwich"],
}

CAT_POOLS = {
    ("train", "day"): DAYS,
    ("train", "bookpeople"): [str(i) for i in range(1, 9)],
    ("hotel", "area"): AREAS,
    ("hotel", "pricerange"): PRICES,
    ("hotel", "internet"): ["yes", "no", "free"],
    ("hotel", "stars"): [str(i) for i in range(6)],
    ("restaurant", "area"): AREAS,
    ("restaurant", "pricerange"): PRICES,
    ("attraction", "type"): ["museum", "nightclub", "park", "cinema", "theatre"],
    ("attraction", "area"): AREAS,
    ("bus", "day"): DAYS,
}

SYSTEM_LINES = [
    "Sure , I can help with that .",
    "Okay , any other preferences ?",
    "Of course . What else should I know ?",
    "Certainly , one moment please .",
    "No problem , anything else ?",
]

OPENERS = {
    "train": "i need a train going to {destination} on {day} .",
    "hotel": "looking for a {pricerange} hotel in the {area} please .",
    "restaurant": "i want to book a {pricerange} {food} restaurant .",
    "attraction": "are there any {type} attractions in the {area} ?",
    "taxi": "please get me a taxi to {destination} .",
    "bus": "is there a bus to {destination} on {day} ?",
}

FOLLOWUPS = [
    "actually make the {slot} {value} .",
    "i would also like the {slot} to be {value} .",
    "can you set the {slot} to {value} ?",
    "oh and the {slot} should be {value} please .",
]


def generated_dialogues(rng: random.Random, n: int) -> list[dict]:
    domains = ["train", "hotel", "restaurant", "attraction", "taxi", "bus"]
    all_pairs = {**POOLS, **CAT_POOLS}
    out = []
    for i in range(n):
        domain = domains[i % len(domains)]
        opener = OPENERS[domain]
        pairs = [(d, s) for (d, s) in all_pairs if d == domain]
        state: dict[tuple[str, str], str] = {}
        needed = [s for s in pairs if "{" + s[1] + "}" in opener]
        for pair in needed:
            state[pair] = rng.choice(all_pairs[pair])
        script: list = [
            ("USER", opener.format(**{s: v for (_, s), v in state.items()}), dict(state))
        ]
        remaining = [p for p in pairs if p not in state]
        rng.shuffle(remaining)
        for turn in range(rng.randint(1, 3)):
            if not remaining:
                break
            script.append(("SYSTEM", rng.choice(SYSTEM_LINES)))
            pair = remaining.pop()
            value = rng.choice(all_pairs[pair])
            state[pair] = value
            script.append(
                ("USER", rng.choice(FOLLOWUPS).format(slot=pair[1], value=value), dict(state))
            )
        if rng.random() < 0.5:
            script.append(("SYSTEM", "You are all set , goodbye !"))
        out.append(dialogue(f"fix-gen-{i:03d}", script))
    return out


M2M_SCHEMA = [
    {
        "service_name": "movie",
        "slots": [
            slot("theatre_name", None),
            slot("movie", None),
            slot("date", None),
            slot("time", None),
            slot("num_people", None),
        ],
    },
]

# Both M2M domains with their full slot inventories (12 open-vocabulary slots
# overall); used when the real dataset is mounted for the stats checks.
M2M_SCHEMA_FULL = M2M_SCHEMA + [
    {
        "service_name": "restaurant",
        "slots": [
            slot("price_range", None),
            slot("location", None),
            slot("restaurant_name", None),
            slot("category", None),
            slot("num_people", None),
            slot("date", None),
            slot("time", None),
        ],
    },
]

M2M_DIALOGUES = [
    {
        "dialogue_id": "sim-m-0001",
        "turns": [
            {
                "user_utterance": {"text": "i want to watch inside out tomorrow"},
                "dialogue_state": [
                    {"slot": "movie", "value": "inside out"},
                    {"slot": "date", "value": "tomorrow"},
                ],
            },
            {
                "system_utterance": {"text": "what time works for you ?"},
                "user_utterance": {"text": "7 pm for 2 people at the aquarius theatre"},
                "dialogue_state": [
                    {"slot": "movie", "value": "inside out"},
                    {"slot": "date", "value": "tomorrow"},
                    {"slot": "time", "value": "7 pm"},
                    {"slot": "num_people", "value": "2"},
                    {"slot": "theatre_name", "value": "aquarius theatre"},
                ],
            },
            {"system_utterance": {"text": "your tickets are booked , enjoy !"}},
        ],
    },
    {
        "dialogue_id": "sim-m-0002",
        "turns": [
            {
                "user_utterance": {"text": "book three tickets for the martian"},
                "dialogue_state": [
                    {"slot": "movie", "value": "the martian"},
                    {"slot": "num_people", "value": "3"},
                ],
            },
            {
                "system_utterance": {"text": "which date and time ?"},
                "user_utterance": {"text": "friday at 9 pm"},
                "dialogue_state": [
                    {"slot": "movie", "value": "the martian"},
                    {"slot": "num_people", "value": "3"},
                    {"slot": "date", "value": "friday"},
                    {"slot": "time", "value": "9 pm"},
                ],
            },
        ],
    },
    {
        "dialogue_id": "sim-m-0003",
        "turns": [
            {
                "user_utterance": {"text": "any showings of creed at lincoln center ?"},
                "dialogue_state": [
                    {"slot": "movie", "value": "creed"},
                    {"slot": "theatre_name", "value": "lincoln center"},
                ],
            },
            {
                "system_utterance": {"text": "yes , tonight at 8 pm ."},
                "user_utterance": {"text": "perfect , book it for tonight"},
                "dialogue_state": [
                    {"slot": "movie", "value": "creed"},
                    {"slot": "theatre_name", "value": "lincoln center"},
                    {"slot": "date", "value": "tonight"},
                ],
            },
        ],
    },
    {
        "dialogue_id": "sim-m-0004",
        "turns": [
            {
                "user_utterance": {"text": "hi , i would like to see a movie"},
                "dialogue_state": [],
            },
            {
                "system_utterance": {"text": "which movie would you like to see ?"},
                "user_utterance": {"text": "star wars on saturday"},
                "dialogue_state": [
                    {"slot": "movie", "value": "star wars"},
                    {"slot": "date", "value": "saturday"},
                ],
            },
        ],
    },
]

# Borrowed slot descriptions for the movie domain (and its domain blurb);
# restaurant-style wording matches the hotel/restaurant tables elsewhere.
M2M_DESCRIPTIONS = [
    ("movie", "", "a go-to provider for finding movies , searching for show times and booking tickets"),
    ("movie", "theatre_name", "the name of the theatre where the movie is playing"),
    ("movie", "movie", "name of the movie"),
    ("movie", "date", "date of the show booking"),
    ("movie", "time", "time of the show booking"),
    ("movie", "num_people", "number of people to purchase tickets for"),
]

# Several candidate descriptions per slot, MultiWOZ 2.1 style.
MULTIWOZ21_DESCRIPTIONS = [
    ("train", "day", "what day you want to take the train"),
    ("train", "day", "day of the train departure"),
    ("train", "day", "the day of week the train should run"),
    ("train", "destination", "destination of the train"),
    ("train", "destination", "where the train terminates"),
    ("hotel", "pricerange", "preferred cost of the hotel"),
    ("hotel", "pricerange", "price budget of the hotel"),
    ("hotel", "internet", "whether the hotel has internet"),
    ("hotel", "internet", "if the hotel offers internet access"),
    ("hotel", "internet", "internet availability at the hotel"),
]


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def write_tsv(path: Path, rows) -> None:
    path.write_text("".join("\t".join(r) + "\n" for r in rows), encoding="utf-8")


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    rng = random.Random(7)
    write_json(FIXTURES / "schema.json", SCHEMA)
    write_json(FIXTURES / "dialogues.json", hand_dialogues() + generated_dialogues(rng, 18))
    write_json(FIXTURES / "m2m_schema.json", M2M_SCHEMA)
    write_json(FIXTURES / "m2m_schema_full.json", M2M_SCHEMA_FULL)
    write_json(FIXTURES / "m2m_dialogues.json", M2M_DIALOGUES)
    write_tsv(FIXTURES / "m2m_descriptions.tsv", M2M_DESCRIPTIONS)
    write_tsv(FIXTURES / "multiwoz21_descriptions.tsv", MULTIWOZ21_DESCRIPTIONS)
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
