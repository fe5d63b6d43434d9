"""Character-level text denoising with bigram priors.

A corrupted string is decoded by MAP inference over its characters.  The
prior is built from adjacent (and optionally distance-two) character-pair
statistics of a clean corpus with add-one smoothing; the channel flips a
character to a uniformly random other symbol with probability epsilon.
Decoding runs in the log domain (max-sum).  The chain model uses message
passing with the single shared prior sorted once; the skip-two model ties
each character to the next and the one after, and its junction chain is
marginalized with the fast three-clique routine.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .argmax import ProbeStats
from .bp import BPStats, Schedule, decode_map, run_bp
from .clique import max_marginal_3clique
from .factors import Factor, Variable
from .graph import build_chain
from .semiring import MAX_SUM

TRAIN_CHARS = 10_000
MODELS = ("chain", "skip-2")


@dataclass(frozen=True)
class NoiseModel:
    """Uniform-substitution channel over a finite alphabet."""

    alphabet: tuple[str, ...]
    epsilon: float

    def __post_init__(self):
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must be in [0, 1)")
        if len(self.alphabet) < 2:
            raise ValueError("alphabet must have at least two symbols")

    def emission_matrix(self) -> np.ndarray:
        """p(observed | true), rows indexed by the true symbol; rows sum to 1."""
        a = len(self.alphabet)
        mat = np.full((a, a), self.epsilon / (a - 1))
        np.fill_diagonal(mat, 1.0 - self.epsilon)
        return mat

    def log_likelihood(self, observed: str) -> np.ndarray:
        """log p(observed char | each true state); flat if out-of-alphabet."""
        a = len(self.alphabet)
        if observed not in self.alphabet:
            # no state can emit it under the model; treat as uninformative
            return np.zeros(a)
        out = np.full(a, np.log(self.epsilon / (a - 1)) if self.epsilon > 0 else -np.inf)
        out[self.alphabet.index(observed)] = np.log1p(-self.epsilon)
        return out


def normalize_text(text: str) -> str:
    """Collapse all whitespace runs to single spaces."""
    return " ".join(text.split())


def default_corpus() -> str:
    return resources.files("maxprod.data").joinpath("corpus.txt").read_text()


@dataclass
class CharPrior:
    """Smoothed log-probability tables for character pairs."""

    alphabet: tuple[str, ...]
    adjacent: np.ndarray  # log p(next | cur), up to normalization
    skip: np.ndarray  # same at distance two

    @classmethod
    def from_corpus(cls, corpus: str, min_chars: int = TRAIN_CHARS) -> "CharPrior":
        corpus = normalize_text(corpus)
        if len(corpus) < min_chars:
            raise ValueError(f"corpus has {len(corpus)} characters, need >= {min_chars}")
        alphabet = tuple(sorted(set(corpus)))
        index = {ch: i for i, ch in enumerate(alphabet)}
        a = len(alphabet)
        counts1 = np.ones((a, a))  # add-one smoothing
        counts2 = np.ones((a, a))
        for t in range(len(corpus) - 1):
            counts1[index[corpus[t]], index[corpus[t + 1]]] += 1
        for t in range(len(corpus) - 2):
            counts2[index[corpus[t]], index[corpus[t + 2]]] += 1
        return cls(
            alphabet=alphabet,
            adjacent=np.log(counts1 / counts1.sum(axis=1, keepdims=True)),
            skip=np.log(counts2 / counts2.sum(axis=1, keepdims=True)),
        )


@dataclass
class DenoiseResult:
    text: str
    changed: int
    oov: int
    stats: BPStats | ProbeStats
    model: str


def _observations(noise: NoiseModel, text: str) -> tuple[list[np.ndarray], int]:
    oov = 0
    tables = []
    for ch in text:
        if ch not in noise.alphabet:
            oov += 1
            warnings.warn(f"character {ch!r} outside the corpus alphabet; treated as unobserved")
        tables.append(noise.log_likelihood(ch))
    return tables, oov


def decode_chain(prior: CharPrior, noise: NoiseModel, text: str) -> DenoiseResult:
    """MAP decode with the adjacent-pair prior only (exact on the chain).

    The shared data-independent prior table is sorted once for the whole
    sequence, regardless of its length.
    """
    if len(text) < 2:
        return DenoiseResult(text, 0, 0, BPStats(), "chain")
    emissions, oov = _observations(noise, text)
    graph = build_chain(
        len(text),
        len(prior.alphabet),
        lambda t: emissions[t],
        prior.adjacent,
        semiring=MAX_SUM,
    )
    result = run_bp(graph, Schedule(iterations=1), mode="fast", semiring=MAX_SUM)
    decoded = decode_map(result)
    out = "".join(prior.alphabet[s] for s in decoded.states)
    changed = sum(1 for a, b in zip(out, text) if a != b)
    return DenoiseResult(out, changed, oov, result.stats, "chain")


def skip2_factors(prior: CharPrior, noise: NoiseModel, text: str):
    """The tied-pair model: every adjacent and distance-two pair carries the
    smoothed prior plus both endpoint likelihoods."""
    emissions, oov = _observations(noise, text)
    n = len(prior.alphabet)
    variables = [Variable(t, n) for t in range(len(text))]
    factors = []
    for t in range(len(text) - 1):
        table = prior.adjacent + emissions[t][:, None] + emissions[t + 1][None, :]
        factors.append(Factor((variables[t], variables[t + 1]), table))
    for t in range(len(text) - 2):
        table = prior.skip + emissions[t][:, None] + emissions[t + 2][None, :]
        factors.append(Factor((variables[t], variables[t + 2]), table))
    return variables, factors, oov


def decode_skip2(prior: CharPrior, noise: NoiseModel, text: str,
                 min_fast_n: int = 1) -> DenoiseResult:
    """MAP decode of the skip-two model via fast three-clique elimination.

    The junction chain over consecutive character triples is swept forward
    with the sorted-search marginalization and decoded by backtracking.
    """
    length = len(text)
    if length < 3:
        return decode_chain(prior, noise, text)
    variables, factors, oov = skip2_factors(prior, noise, text)
    adj = factors[: length - 1]
    skip = factors[length - 1 :]
    stats = ProbeStats()

    forward: list[Factor] = []
    carry: Factor | None = None
    for t in range(length - 2):
        a_pair = adj[t]
        if carry is not None:
            a_pair = Factor(a_pair.scope, a_pair.values + carry.values)
        extra = None
        if t == length - 3:
            extra = adj[t + 1]  # last clique also owns the final adjacent pair
        msg = max_marginal_3clique(
            extra, a_pair, skip[t], MAX_SUM, min_fast_n=min_fast_n, stats=stats
        )
        carry = msg
        forward.append(a_pair)

    best_flat = MAX_SUM.argbest_flat(carry.values)
    n = len(prior.alphabet)
    states = [0] * length
    states[length - 2], states[length - 1] = divmod(best_flat, n)
    for t in range(length - 3, -1, -1):
        a_vals = forward[t].values[:, states[t + 1]]
        b_vals = skip[t].values[:, states[t + 2]]
        states[t] = int(np.argmax(a_vals + b_vals))
    out = "".join(prior.alphabet[s] for s in states)
    changed = sum(1 for a, b in zip(out, text) if a != b)
    return DenoiseResult(out, changed, oov, stats, "skip-2")


def run_denoise(
    corpus: str,
    text: str,
    epsilon: float = 0.01,
    model: str = "chain",
    min_corpus_chars: int = TRAIN_CHARS,
) -> DenoiseResult:
    """Correct ``text`` using pair statistics extracted from ``corpus``."""
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
    prior = CharPrior.from_corpus(corpus, min_corpus_chars)
    noise = NoiseModel(prior.alphabet, epsilon)
    if model == "chain":
        return decode_chain(prior, noise, text)
    return decode_skip2(prior, noise, text)


def corrupt_text(text: str, epsilon: float, alphabet, rng: np.random.Generator) -> str:
    """Flip each character to a uniformly random other symbol with prob epsilon."""
    alphabet = tuple(alphabet)
    out = []
    for ch in text:
        if rng.random() < epsilon and ch in alphabet:
            choices = [c for c in alphabet if c != ch]
            out.append(choices[int(rng.integers(len(choices)))])
        else:
            out.append(ch)
    return "".join(out)


def character_accuracy(decoded: str, reference: str) -> float:
    if not reference:
        return 1.0
    hits = sum(1 for a, b in zip(decoded, reference) if a == b)
    return hits / len(reference)
