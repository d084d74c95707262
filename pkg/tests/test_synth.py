"""Synthetic corpus generator: determinism, validity, shared-name ambiguity."""

from collections import Counter

from relabel.corpus import DEFAULT_TAG_SET, STRICT, extract_spans, validate_bio
from relabel.synth import SynthConfig, build_gazetteers, generate_corpus, strip_labels

TS = DEFAULT_TAG_SET


def surface(utt, span):
    return " ".join(utt.texts[span.start : span.end])


class TestGeneration:
    def test_deterministic(self):
        config = SynthConfig(n_utterances=40, seed=9)
        first = generate_corpus(config)
        second = generate_corpus(config)
        assert first.ids() == second.ids()
        for a, b in zip(first, second):
            assert a.texts == b.texts and a.gold_tags == b.gold_tags

    def test_size_split_and_unique_ids(self):
        corpus = generate_corpus(SynthConfig(n_utterances=25, seed=1, split="dev"))
        assert len(corpus) == 25
        assert corpus.split == "dev"
        assert len(set(corpus.ids())) == 25

    def test_all_utterances_bio_valid(self):
        corpus = generate_corpus(SynthConfig(n_utterances=200, seed=4))
        for utt in corpus:
            assert validate_bio(utt, TS, mode=STRICT) is utt

    def test_entity_mix_present(self):
        corpus = generate_corpus(SynthConfig(n_utterances=400, seed=2))
        kinds = Counter(
            span.entity_type for utt in corpus for span in extract_spans(utt, TS)
        )
        for etype in TS.entity_types:
            assert kinds[etype] > 0, f"no {etype} spans generated"

    def test_different_seeds_share_gazetteers(self):
        gaz = build_gazetteers(SynthConfig(n_utterances=1, seed=0))
        inventory = {
            etype: set(gaz[etype]) for etype in ("ORG", "PROD", "PER", "GPE")
        }
        inventory["ORG"] |= set(gaz["SHARED"])
        first = generate_corpus(SynthConfig(n_utterances=300, seed=5))
        second = generate_corpus(SynthConfig(n_utterances=300, seed=6))
        forms = {1: set(), 2: set()}
        for key, corpus in ((1, first), (2, second)):
            for utt in corpus:
                for span in extract_spans(utt, TS):
                    name = surface(utt, span)
                    if span.entity_type == "PER":
                        ok = name in inventory["PER"] or any(
                            full.split()[0] == name for full in inventory["PER"]
                        )
                        assert ok, name
                    elif span.entity_type == "PROD":
                        base = name.rsplit(" ", 1)[0] if " " in name else name
                        assert name in inventory["PROD"] or base in inventory["PROD"]
                    else:
                        assert name in inventory[span.entity_type], name
                    forms[key].add((span.entity_type, name))
        assert forms[1] & forms[2], "no shared entity surface forms across seeds"

    def test_some_names_serve_both_org_and_prod(self):
        corpus = generate_corpus(SynthConfig(n_utterances=2000, seed=7))
        seen = {"ORG": set(), "PROD": set()}
        for utt in corpus:
            for span in extract_spans(utt, TS):
                if span.entity_type in seen:
                    seen[span.entity_type].add(surface(utt, span))
        both = {
            name.split()[0] for name in seen["ORG"] if " " not in name
        } & {name.split()[0] for name in seen["PROD"]}
        assert both, "expected single-token names used as both ORG and PROD"


class TestStripLabels:
    def test_strip_removes_all_tags(self):
        corpus = generate_corpus(SynthConfig(n_utterances=30, seed=3))
        pool = strip_labels(corpus)
        assert pool.split == "unlabeled"
        assert pool.ids() == corpus.ids()
        for before, after in zip(corpus, pool):
            assert after.texts == before.texts
            assert all(tag == 0 for tag in after.gold_tags)
