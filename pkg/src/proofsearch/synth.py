"""Synthetic single-entity attribute worlds and reasoning tasks.

A world is a set of entities, one given fact per entity, and per-entity
rule chains "if X is a then X is b." that are acyclic by construction
(each attribute has at most one inbound rule).  Instances ask whether a
hypothesis about an entity is proved, disproved, or unknown; gold proofs
are unique because derivations never branch.

Negation is open-world: only positive attributes are derivable, a
"<entity> is not <attr>." hypothesis is disproved by deriving the positive
form, and the "I don't think" prefix flips a sentence's polarity.
"""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import IO, Iterable, Sequence

from .dsl import (
    HYPOTHESIS,
    LinearProof,
    StepText,
    intermediate,
    normalize_sentence,
    parse_proof,
    sent,
    serialize_proof,
)
from .errors import ConfigError, DataError, DepthUnreachableError
from .tree import ProofTree

MAX_DEPTH = 3

ENTITIES = (
    "Anne", "Bob", "Carol", "Dave", "Erin", "Fiona", "Gary", "Hugo", "Iris",
    "Jack", "Kate", "Liam", "Mona", "Nate", "Olga", "Pete", "Quinn", "Rosa",
    "Sam", "Tina", "the bear", "the cat", "the cow", "the dog", "the fox",
    "the lion", "the mouse", "the owl", "the pig", "the wolf",
)

ATTRIBUTES = (
    "red", "blue", "green", "kind", "quiet", "smart", "cold", "young",
    "rough", "nice", "big", "furry", "round", "happy", "strong", "tired",
    "brave", "calm", "proud", "warm",
)

NEGATION_PREFIX = "I don't think "


# --- sentence templates and parsing ----------------------------------------


def _capitalize(text: str) -> str:
    return text[:1].upper() + text[1:] if text else text


def fact_sentence(entity: str, attribute: str) -> str:
    return f"{_capitalize(entity)} is {attribute}."


def negative_sentence(entity: str, attribute: str) -> str:
    return f"{_capitalize(entity)} is not {attribute}."


def rule_sentence(entity: str, antecedent: str, consequent: str) -> str:
    return f"If {entity} is {antecedent} then {entity} is {consequent}."


def negate(sentence: str) -> str:
    """Prefix with "I don't think", lowercasing the original first letter."""
    sentence = sentence.strip()
    return NEGATION_PREFIX + sentence[:1].lower() + sentence[1:]


def strip_negation(sentence: str) -> str:
    """Inverse of negate on sentences carrying the prefix; others pass through."""
    sentence = sentence.strip()
    if sentence.lower().startswith(NEGATION_PREFIX.lower()):
        rest = sentence[len(NEGATION_PREFIX) :]
        return _capitalize(rest)
    return sentence


@dataclass(frozen=True)
class Atom:
    entity: str
    attribute: str
    positive: bool = True


@dataclass(frozen=True)
class Rule:
    entity: str
    antecedent: str
    consequent: str


_RULE_RE = re.compile(r"^if (?P<e1>.+) is (?P<a>\w+) then (?P<e2>.+) is (?P<b>\w+)$")
_NEG_ATOM_RE = re.compile(r"^(?P<e>.+) is not (?P<a>\w+)$")
_ATOM_RE = re.compile(r"^(?P<e>.+) is (?P<a>\w+)$")
_PREFIX_NORM = normalize_sentence(NEGATION_PREFIX)


@lru_cache(maxsize=100_000)
def parse_statement(sentence: str) -> Atom | Rule | None:
    """Parse a (normalized) world sentence; None when it doesn't fit a template."""
    text = normalize_sentence(sentence)
    if text.startswith(_PREFIX_NORM + " "):
        inner = parse_statement(text[len(_PREFIX_NORM) + 1 :])
        if isinstance(inner, Atom):
            return Atom(inner.entity, inner.attribute, not inner.positive)
        return None
    m = _RULE_RE.match(text)
    if m is not None:
        if m.group("e1") != m.group("e2"):
            return None
        return Rule(m.group("e1"), m.group("a"), m.group("b"))
    m = _NEG_ATOM_RE.match(text)
    if m is not None:
        return Atom(m.group("e"), m.group("a"), False)
    m = _ATOM_RE.match(text)
    if m is not None:
        return Atom(m.group("e"), m.group("a"), True)
    return None


# --- worlds -----------------------------------------------------------------


@dataclass(frozen=True)
class WorldConfig:
    n_entities: int = 10
    n_attributes: int = 8
    n_rules: int = 30
    seed: int = 0


@dataclass(frozen=True)
class EntityChain:
    """One entity's derivation chain: attributes[0] is given as a fact and
    attributes[i] follows from attributes[i-1] by one rule."""

    entity: str
    attributes: tuple[str, ...]

    @property
    def fact(self) -> str:
        return fact_sentence(self.entity, self.attributes[0])

    @property
    def rules(self) -> tuple[str, ...]:
        return tuple(
            rule_sentence(self.entity, a, b)
            for a, b in zip(self.attributes, self.attributes[1:])
        )

    def depth_of(self, attribute: str) -> int | None:
        """Number of rule applications deriving the attribute, if reachable."""
        try:
            return self.attributes.index(attribute)
        except ValueError:
            return None


@dataclass(frozen=True)
class World:
    chains: tuple[EntityChain, ...]
    attribute_pool: tuple[str, ...]
    seed: int

    def sentences(self) -> list[str]:
        out = []
        for chain in self.chains:
            out.append(chain.fact)
            out.extend(chain.rules)
        return out


def _names(base: Sequence[str], count: int, rng: random.Random, stem: str) -> list[str]:
    pool = list(base)
    rng.shuffle(pool)
    if count <= len(pool):
        return pool[:count]
    return pool + [f"{stem}{i}" for i in range(1, count - len(pool) + 1)]


def generate_world(config: WorldConfig) -> World:
    if config.n_entities < 1 or config.n_attributes < 1:
        raise ConfigError("need at least one entity and one attribute")
    if config.n_rules < 0:
        raise ConfigError("rule count cannot be negative")
    cap = config.n_entities * (config.n_attributes - 1)
    if config.n_rules > cap:
        raise ConfigError(
            f"{config.n_rules} rules do not fit: at most {cap} attribute pairs"
        )
    rng = random.Random(config.seed)
    entities = _names(ENTITIES, config.n_entities, rng, "entity")
    attributes = _names(ATTRIBUTES, config.n_attributes, rng, "attr")
    base, extra = divmod(config.n_rules, config.n_entities)
    chains = []
    for i, entity in enumerate(entities):
        n_links = min(base + (1 if i < extra else 0), config.n_attributes - 1)
        chains.append(EntityChain(entity, tuple(rng.sample(attributes, n_links + 1))))
    # divmod may round per-entity links down against the attribute cap; make
    # the total exact by extending the shortest chains first
    deficit = config.n_rules - sum(len(c.attributes) - 1 for c in chains)
    while deficit > 0:
        chains.sort(key=lambda c: len(c.attributes))
        for i, chain in enumerate(chains):
            if deficit == 0:
                break
            room = config.n_attributes - len(chain.attributes)
            if room > 0:
                unused = [a for a in attributes if a not in chain.attributes]
                chains[i] = EntityChain(
                    chain.entity, chain.attributes + (rng.choice(unused),)
                )
                deficit -= 1
        chains.sort(key=lambda c: c.entity)
    return World(tuple(chains), tuple(attributes), config.seed)


# --- task instances ----------------------------------------------------------


class Answer(Enum):
    PROVED = "proved"
    DISPROVED = "disproved"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class TaskInstance:
    """One reasoning problem: prove, disprove, or fail to settle a hypothesis.

    ``proof`` is the canonical gold derivation (absent for unknowns) and
    ``depth`` the number of rule applications it takes; a depth-0 proof is
    the single step selecting the hypothesis straight from the context.
    """

    id: str
    hypothesis: str
    context: tuple[str, ...]
    proof: str | None
    answer: Answer
    depth: int

    def gold_tree(self) -> ProofTree | None:
        if self.proof is None:
            return None
        return ProofTree.from_text(self.proof, self.hypothesis, self.context)


def make_instance(
    world: World,
    target_depth: int,
    answer: Answer,
    n_distractors: int,
    rng: random.Random,
    instance_id: str = "",
) -> TaskInstance:
    if not 0 <= target_depth <= MAX_DEPTH:
        raise ConfigError(f"depth must be within 0..{MAX_DEPTH}, got {target_depth}")
    if n_distractors < 0:
        raise ConfigError("distractor count cannot be negative")

    def eligible(chain: EntityChain) -> bool:
        if len(chain.attributes) < target_depth + 1:
            return False
        if answer is Answer.UNKNOWN:
            return len(set(world.attribute_pool) - set(chain.attributes)) > 0
        return True

    candidates = [c for c in world.chains if eligible(c)]
    if not candidates:
        raise DepthUnreachableError(
            f"no entity supports a depth-{target_depth} {answer.value} instance"
        )
    chain = rng.choice(candidates)
    own = [chain.fact, *chain.rules[:target_depth]]

    if answer is Answer.UNKNOWN:
        unreachable = sorted(set(world.attribute_pool) - set(chain.attributes))
        hypothesis = fact_sentence(chain.entity, rng.choice(unreachable))
    elif answer is Answer.PROVED:
        hypothesis = fact_sentence(chain.entity, chain.attributes[target_depth])
    else:
        hypothesis = negative_sentence(chain.entity, chain.attributes[target_depth])

    pool = [s for c in world.chains if c is not chain for s in (c.fact, *c.rules)]
    if len(pool) < n_distractors:
        raise ConfigError(
            f"world offers {len(pool)} distractor sentences, need {n_distractors}"
        )
    context = own + rng.sample(pool, n_distractors)
    rng.shuffle(context)

    proof_text: str | None = None
    if answer is not Answer.UNKNOWN:
        index = {s: i + 1 for i, s in enumerate(context)}
        steps = []
        if target_depth == 0:
            steps.append(StepText((sent(index[chain.fact]),), HYPOTHESIS, None))
        else:
            for i in range(1, target_depth + 1):
                rule_ref = sent(index[chain.rules[i - 1]])
                source = sent(index[chain.fact]) if i == 1 else intermediate(i - 1)
                premises = tuple(sorted((rule_ref, source), key=lambda p: p.sort_key))
                if i == target_depth:
                    steps.append(StepText(premises, HYPOTHESIS, None))
                else:
                    steps.append(
                        StepText(
                            premises,
                            intermediate(i),
                            fact_sentence(chain.entity, chain.attributes[i]),
                        )
                    )
        proof_text = serialize_proof(LinearProof(tuple(steps)))

    return TaskInstance(
        id=instance_id,
        hypothesis=hypothesis,
        context=tuple(context),
        proof=proof_text,
        answer=answer,
        depth=target_depth,
    )


# --- datasets ----------------------------------------------------------------


@dataclass(frozen=True)
class DatasetConfig:
    size: int = 100
    depths: tuple[int, ...] = (0, 1, 2, 3)
    answer_ratio: tuple[int, int, int] = (1, 1, 1)  # proved : disproved : unknown
    n_distractors: int = 22
    context_size: int | None = None  # overrides n_distractors to pad exactly
    world: WorldConfig = WorldConfig()
    seed: int = 0


def _allocate(total: int, weights: Sequence[int]) -> list[int]:
    """Largest-remainder allocation so the requested ratio is met exactly."""
    if total < 0 or any(w < 0 for w in weights) or sum(weights) == 0:
        raise ConfigError("answer ratio needs non-negative weights, not all zero")
    scale = sum(weights)
    shares = [total * w / scale for w in weights]
    counts = [int(s) for s in shares]
    remainders = sorted(
        range(len(weights)), key=lambda i: (counts[i] - shares[i], i)
    )
    for i in range(total - sum(counts)):
        counts[remainders[i % len(weights)]] += 1
    return counts


def instance_seed(dataset_seed: int, index: int) -> int:
    # splits the dataset seed into independent per-instance streams
    return dataset_seed * 1_000_003 + index * 7919 + 1


def generate_dataset(config: DatasetConfig) -> list[TaskInstance]:
    if config.size < 0:
        raise ConfigError("dataset size cannot be negative")
    if not config.depths:
        raise ConfigError("need at least one depth")
    for d in config.depths:
        if not 0 <= d <= MAX_DEPTH:
            raise ConfigError(f"depth must be within 0..{MAX_DEPTH}, got {d}")
    world = generate_world(config.world)
    counts = _allocate(config.size, config.answer_ratio)
    answers = (
        [Answer.PROVED] * counts[0]
        + [Answer.DISPROVED] * counts[1]
        + [Answer.UNKNOWN] * counts[2]
    )
    order = random.Random(instance_seed(config.seed, -1))
    order.shuffle(answers)
    instances = []
    for i, answer in enumerate(answers):
        depth = config.depths[i % len(config.depths)]
        if config.context_size is not None:
            n_distractors = config.context_size - (depth + 1)
            if n_distractors < 0:
                raise ConfigError(
                    f"context size {config.context_size} cannot hold a depth-{depth} proof"
                )
        else:
            n_distractors = config.n_distractors
        rng = random.Random(instance_seed(config.seed, i))
        instances.append(
            make_instance(world, depth, answer, n_distractors, rng, f"ex{i:05d}")
        )
    return instances


# --- JSONL schema -------------------------------------------------------------


def instance_to_json(instance: TaskInstance) -> dict:
    return {
        "id": instance.id,
        "hypothesis": instance.hypothesis,
        "context": {f"sent{i + 1}": s for i, s in enumerate(instance.context)},
        "proof": instance.proof,
        "answer": instance.answer.value,
        "depth": instance.depth,
    }


def instance_from_json(obj: dict) -> TaskInstance:
    try:
        raw_context = obj["context"]
        if not isinstance(raw_context, dict):
            raise DataError("context must be an object of sentN keys")
        context = []
        for i in range(1, len(raw_context) + 1):
            key = f"sent{i}"
            if key not in raw_context:
                raise DataError(f"context keys must be contiguous; missing {key}")
            context.append(str(raw_context[key]))
        answer = Answer(obj["answer"])
        instance = TaskInstance(
            id=str(obj["id"]),
            hypothesis=str(obj["hypothesis"]),
            context=tuple(context),
            proof=obj.get("proof"),
            answer=answer,
            depth=int(obj.get("depth", 0)),
        )
    except DataError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad instance record: {exc}") from exc
    if instance.proof is not None and not isinstance(instance.proof, str):
        raise DataError("proof must be a string or null")
    return instance


def write_dataset(instances: Iterable[TaskInstance], fp: IO[str]) -> None:
    for instance in instances:
        fp.write(json.dumps(instance_to_json(instance), ensure_ascii=False) + "\n")


def read_dataset(fp: IO[str]) -> list[TaskInstance]:
    out = []
    for line_no, line in enumerate(fp, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line {line_no}: not valid JSON: {exc}") from exc
        out.append(instance_from_json(obj))
    return out
