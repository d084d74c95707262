"""Synthetic business-call corpus generator.

Produces lowercase, ASR-flavored utterances (no punctuation, occasional
disfluencies) with PER/PROD/ORG/GPE entities drawn from fictional gazetteers.
Company and product names are built combinatorially so each name recurs only
a handful of times, and a configurable slice of names is deliberately usable
as either an organization or a product, so type must sometimes be read from
context.  Gazetteers are fixed independently of the sampling seed: corpora
generated with different seeds share the same name inventory.
"""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass

from .corpus import DEFAULT_TAG_SET, Corpus, TagSet, make_utterance

_ORG_FIRST = (
    "apex", "northwind", "granite", "bluepeak", "corvid", "halcyon",
    "ridgeline", "silverbirch", "stonegate", "brightwater", "oakfield",
    "redmaple", "ironwood", "maristella", "kestrel", "lumen", "vantage",
    "harborview", "crestline", "tallgrass", "veridian", "cobalt", "summit",
    "pinnacle", "meridian", "falcon", "aurora", "cascade", "zenith", "atlas",
)
_ORG_MID = (
    "data", "cloud", "pay", "health", "logistics", "media", "travel",
    "energy", "capital", "retail", "supply", "credit",
)
_ORG_SUFFIX = (
    "systems", "labs", "solutions", "group", "bank", "insurance",
    "partners", "holdings", "software", "networks",
)
_PROD_BRAND = (
    "flex", "zen", "swift", "nova", "echo", "pulse", "orbit", "quill",
    "drift", "spark", "glide", "prism", "vexel", "mint", "bolt", "crane",
    "fable", "hopper", "indigo", "juno",
)
_PROD_NOUN = (
    "desk", "book", "pay", "chat", "mail", "track", "form", "sign", "meet",
    "board", "cast", "base", "flow", "dash", "note", "link", "sync",
    "vault", "wave", "hub",
)
_PROD_TIER = ("pro", "plus", "lite", "max", "go")
_PER_FIRST = (
    "maria", "james", "aisha", "carlos", "priya", "ethan", "yuki", "omar",
    "lena", "derek", "fatima", "ivan", "grace", "hassan", "nina", "paulo",
    "sofia", "tariq", "wendy", "niko",
)
_PER_LAST = (
    "chen", "patel", "okafor", "silva", "novak", "reyes", "kim", "haddad",
    "jensen", "moreau", "tanaka", "osei", "varga", "lindqvist", "costa",
    "petrov", "mensah", "ruiz", "walsh", "abadi",
)
_GPE = (
    "toronto", "denver", "oslo", "lisbon", "nairobi", "osaka", "dublin",
    "austin", "zagreb", "perth", "quito", "leeds", "tampa", "geneva",
    "medellin", "brisbane", "halifax", "cork", "boise", "valencia",
    "new york", "san diego", "hong kong", "cape town", "kuala lumpur",
)

_DISFLUENCIES = ("um", "uh", "okay", "yeah", "hmm")

# (template, weight).  Slots are literal {TYPE} tokens.  Organization
# mentions deliberately outnumber product mentions, the way support calls
# skew toward naming the company rather than the item, and the words
# immediately around each slot carry the type so context stays informative
# even for names the model has never seen.
_TEMPLATES = (
    ("thanks for calling {ORG} customer support today", 5),
    ("i have been a loyal {ORG} customer for two years", 3),
    ("you should contact the {ORG} billing department about the issue", 3),
    ("the billing team at {ORG} will follow up with you", 3),
    ("the invoice from {ORG} accounting looks wrong to me", 3),
    ("i used to work at {ORG} headquarters before moving to {GPE}", 2),
    ("{ORG} charged my card twice last month", 4),
    ("the {ORG} support line kept me waiting", 3),
    ("i filed a complaint against {ORG} customer service", 2),
    ("my provider {ORG} sent me a renewal invoice", 3),
    ("somebody from {ORG} customer service left me a voicemail", 2),
    ("i ordered the {PROD} starter bundle last week", 3),
    ("my {PROD} subscription renewed without warning", 2),
    ("how do i cancel the {PROD} trial subscription", 2),
    ("the {PROD} app keeps crashing on my phone", 2),
    ("we rolled out {PROD} licenses to the whole team", 2),
    ("i cannot log into the {PROD} app anymore", 2),
    ("is there a discount on {PROD} upgrades this month", 2),
    ("the latest {PROD} update broke the export feature", 2),
    # neutral contexts: identical wording for either type, name decides
    ("do you know anything about {ORG}", 1),
    ("do you know anything about {PROD}", 1),
    ("i heard about {ORG} from a coworker", 1),
    ("i heard about {PROD} from a coworker", 1),
    ("can you look up {ORG} for me", 1),
    ("can you look up {PROD} for me", 1),
    ("let me transfer you to {PER} right away", 3),
    ("{PER} from the {GPE} office called earlier", 2),
    ("please send the contract to {PER} by friday", 2),
    ("i spoke with {PER} about the refund", 3),
    ("we are shipping it to {GPE} tomorrow", 2),
    ("the conference in {GPE} got moved again", 2),
    ("our warehouse in {GPE} is closed this week", 2),
    ("okay let me pull up your account one moment", 3),
    ("sorry the line cut out can you repeat that", 2),
    ("yes absolutely no problem at all", 2),
    ("could you confirm the last four digits please", 2),
    ("i will send you a confirmation email shortly", 2),
    ("hold on one second while i check on that", 2),
    ("does {ORG} still sell {PROD} or not", 2),
    ("i bought {PROD} directly from {ORG} last year", 2),
    ("{PER} recommended {PROD} to our team", 2),
    ("the {GPE} branch of {ORG} never picks up", 2),
)

_SLOT_TYPES = {"{PER}", "{PROD}", "{ORG}", "{GPE}"}

# Gazetteer subsets are carved out with a fixed shuffle so every corpus,
# whatever its sampling seed, draws from the same name inventory.
_POOL_SEED = 0x5EED


@dataclass(frozen=True)
class SynthConfig:
    n_utterances: int
    seed: int
    split: str = "train"
    org_pool: int = 600
    prod_pool: int = 140
    per_pool: int = 200
    shared_names: int = 100
    shared_fraction: float = 0.2
    disfluency_rate: float = 0.15


def _fixed_sample(items: list[str], count: int, salt: str) -> list[str]:
    rng = random.Random(f"{_POOL_SEED}:{salt}")
    pool = sorted(set(items))
    rng.shuffle(pool)
    return pool[: min(count, len(pool))]


def build_gazetteers(config: SynthConfig) -> dict[str, list[str]]:
    # Organizations come in three surface shapes so no single marker token
    # gives the type away: suffix-marked ("granite pay labs"), plain
    # two-token ("granite pay"), and compact brand-style ("granitepay").
    marked = [
        f"{a} {b} {c}"
        for a in _ORG_FIRST
        for b in _ORG_MID
        for c in _ORG_SUFFIX
    ]
    marked += [f"{a} {c}" for a in _ORG_FIRST for c in _ORG_SUFFIX]
    plain = [f"{a} {b}" for a in _ORG_FIRST for b in _ORG_MID]
    compact = [a + b for a in _ORG_FIRST for b in _ORG_MID]
    n_marked = round(config.org_pool * 0.25)
    n_plain = round(config.org_pool * 0.25)
    n_compact = max(config.org_pool - n_marked - n_plain, 0)
    orgs = (
        _fixed_sample(marked, n_marked, "org")
        + _fixed_sample(plain, n_plain, "org-plain")
        + _fixed_sample(compact, n_compact, "org-compact")
    )
    prods = [a + b for a in _PROD_BRAND for b in _PROD_NOUN if not a.endswith(b[0])]
    pers = [f"{a} {b}" for a in _PER_FIRST for b in _PER_LAST]
    prod_names = _fixed_sample(prods, config.prod_pool, "prod")
    return {
        "ORG": orgs,
        "PROD": prod_names,
        "PER": _fixed_sample(pers, config.per_pool, "per"),
        "GPE": list(_GPE),
        "SHARED": prod_names[: min(config.shared_names, len(prod_names))],
    }


def _fill_slot(slot_type: str, gaz: dict[str, list[str]], cfg: SynthConfig,
               rng: random.Random) -> list[str]:
    if slot_type == "ORG" and rng.random() < cfg.shared_fraction:
        return rng.choice(gaz["SHARED"]).split()
    if slot_type == "PER" and rng.random() < 0.4:
        return [rng.choice(gaz["PER"]).split()[0]]
    name = rng.choice(gaz[slot_type])
    tokens = name.split()
    if slot_type == "PROD" and rng.random() < 0.3:
        tokens = tokens + [rng.choice(_PROD_TIER)]
    return tokens


def generate_corpus(config: SynthConfig, tag_set: TagSet = DEFAULT_TAG_SET) -> Corpus:
    """Deterministically sample a labeled corpus from the template bank."""
    for etype in ("PER", "PROD", "ORG", "GPE"):
        if etype not in tag_set.entity_types:
            raise ValueError(f"tag set lacks entity type {etype}")
    gaz = build_gazetteers(config)
    rng = random.Random(config.seed)
    templates = [t for t, _ in _TEMPLATES]
    weights = [w for _, w in _TEMPLATES]

    utterances = []
    for i in range(config.n_utterances):
        template = rng.choices(templates, weights)[0]
        words: list[str] = []
        tags: list[int] = []
        for piece in template.split():
            if piece in _SLOT_TYPES:
                etype = piece[1:-1]
                name_tokens = _fill_slot(etype, gaz, config, rng)
                tags.append(tag_set.begin_index(etype))
                tags.extend([tag_set.inside_index(etype)] * (len(name_tokens) - 1))
                words.extend(name_tokens)
            else:
                words.append(piece)
                tags.append(0)
        if rng.random() < config.disfluency_rate:
            slots = [0] + [
                pos + 1
                for pos in range(len(words))
                if pos + 1 >= len(tags) or not tag_set.is_inside(tags[pos + 1])
            ]
            at = rng.choice(slots)
            words.insert(at, rng.choice(_DISFLUENCIES))
            tags.insert(at, 0)
        uid = f"{config.split}-{i:05d}"
        utterances.append(make_utterance(uid, words, tags))
    return Corpus(tag_set=tag_set, utterances=tuple(utterances), split=config.split)


def strip_labels(corpus: Corpus) -> Corpus:
    """Forget all gold tags, producing an unlabeled pool."""
    stripped = [
        dataclasses.replace(u, gold_tags=tuple([0] * len(u)))
        for u in corpus.utterances
    ]
    return Corpus(tag_set=corpus.tag_set, utterances=tuple(stripped), split="unlabeled")
