# Copyright 2024 The linerec Authors
#
# Licensed under the Apache License v2.0 with LLVM Exceptions.
# See https://llvm.org/LICENSE.txt for license information.
# SPDX-License-Identifier: Apache-2.0 WITH LLVM-exception

"""CTC decoding: collapse, greedy, prefix beam search and LM fusion.

All search arithmetic is float64 in the log domain. Scores are log
probabilities for the plain search and negated log-linear costs for the
fused search; larger is better in both. Equal scores are broken in favour
of the lexicographically smaller text.
"""

from dataclasses import asdict, dataclass, field, fields
import json
import math
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
import torch

from ..support import debugging
from ..support.exceptions import ConfigError, InputError, ParameterError
from ..support.logging import decoding_logger as logger

__all__ = [
    "DEFAULT_BEAM_WIDTH",
    "FrameLogits",
    "FusionScorer",
    "Hypothesis",
    "LogLinearWeights",
    "TransitionCounts",
    "collapse",
    "decode_fused",
    "greedy_decode",
    "prefix_beam_search",
]

DEFAULT_BEAM_WIDTH = 8

_NEG_INF = float("-inf")


def _logaddexp(a: float, b: float) -> float:
    if a == _NEG_INF:
        return b
    if b == _NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


@dataclass
class FrameLogits:
    """Raw per-frame class scores ``T x (A + 1)``; class ``A`` is blank."""

    scores: torch.Tensor
    alphabet: str

    def __post_init__(self):
        if self.scores.dim() != 2:
            raise InputError(f"FrameLogits expects a rank-2 tensor, got {tuple(self.scores.shape)}")
        frames, classes = self.scores.shape
        if frames < 1:
            raise InputError("FrameLogits needs at least one frame")
        if classes != len(self.alphabet) + 1:
            raise InputError(
                f"FrameLogits has {classes} classes for an alphabet of {len(self.alphabet)}"
            )
        if not bool(torch.isfinite(self.scores).all()):
            raise InputError("FrameLogits contains non-finite scores")

    @property
    def num_frames(self) -> int:
        return self.scores.shape[0]

    @property
    def blank(self) -> int:
        return len(self.alphabet)

    def log_probs(self) -> np.ndarray:
        """Per-frame log-softmax in float64."""
        return torch.log_softmax(self.scores.detach().to(torch.float64), dim=-1).numpy()


def collapse(path: Sequence[int], alphabet: str) -> str:
    blank = len(alphabet)
    out: List[str] = []
    previous = None
    for label in path:
        label = int(label)
        if label < 0 or label > blank:
            raise InputError(f"CTC label {label} outside [0, {blank}]")
        if label != previous and label != blank:
            out.append(alphabet[label])
        previous = label
    return "".join(out)


def greedy_decode(logits: FrameLogits) -> str:
    # torch.argmax returns the first maximal index, i.e. the lowest class.
    path = torch.argmax(logits.scores, dim=-1).tolist()
    return collapse(path, logits.alphabet)


################################################################################
# Log-linear weights
################################################################################


@dataclass
class LogLinearWeights:
    ctc: float = 1.0
    lm: float = 0.0
    prior: float = 0.0
    new_char: float = 0.0
    blank: float = 0.0
    repeat: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = float(getattr(self, f.name))
            if not math.isfinite(value):
                raise ConfigError(f"Weight '{f.name}' must be finite, got {value}")
            setattr(self, f.name, value)

    def replace(self, **kwargs) -> "LogLinearWeights":
        d = self.to_dict()
        d.update(kwargs)
        return LogLinearWeights(**d)

    def key(self) -> Tuple[float, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)

    @staticmethod
    def from_dict(d: Dict[str, Any]) -> "LogLinearWeights":
        if not isinstance(d, dict):
            raise ConfigError("Weights document must be a mapping")
        known = {f.name for f in fields(LogLinearWeights)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"Unknown weight keys: {', '.join(unknown)}")
        try:
            return LogLinearWeights(**{k: float(v) for k, v in d.items()})
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Malformed weights document: {e}") from e

    def save(self, path: Union[str, Path]):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @staticmethod
    def load(path: Union[str, Path]) -> "LogLinearWeights":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"Weights file {path} is not valid JSON: {e}") from e
        return LogLinearWeights.from_dict(d)


################################################################################
# Prefix beam search
################################################################################


@dataclass(frozen=True)
class TransitionCounts:
    """Per-frame emission classes along one alignment path."""

    new_char: int = 0
    blank: int = 0
    repeat: int = 0

    def add(self, *, new_char: int = 0, blank: int = 0, repeat: int = 0) -> "TransitionCounts":
        return TransitionCounts(
            self.new_char + new_char, self.blank + blank, self.repeat + repeat
        )


_NO_COUNTS = TransitionCounts()


@dataclass
class Hypothesis:
    """A label prefix with the mass of the alignments that produce it.

    Besides the summed masses, each end state keeps its best single path
    (Viterbi score and transition counts); the transition features of the
    prefix are read from the better of the two.
    """

    prefix: Tuple[int, ...]
    text: str
    log_p_blank: float = _NEG_INF
    log_p_nonblank: float = _NEG_INF
    lm_state: Any = None
    lm_logscore: float = 0.0
    prior_logscore: float = 0.0
    viterbi_blank: float = _NEG_INF
    viterbi_nonblank: float = _NEG_INF
    counts_blank: TransitionCounts = field(default=_NO_COUNTS)
    counts_nonblank: TransitionCounts = field(default=_NO_COUNTS)

    @property
    def log_total(self) -> float:
        return _logaddexp(self.log_p_blank, self.log_p_nonblank)

    @property
    def last(self) -> Optional[int]:
        return self.prefix[-1] if self.prefix else None

    @property
    def transitions(self) -> TransitionCounts:
        if self.viterbi_nonblank > self.viterbi_blank:
            return self.counts_nonblank
        return self.counts_blank

    def child(self, label: int, char: str) -> "Hypothesis":
        return Hypothesis(
            prefix=self.prefix + (label,),
            text=self.text + char,
            lm_state=self.lm_state,
            lm_logscore=self.lm_logscore,
            prior_logscore=self.prior_logscore,
        )

    def add_blank(self, log_p: float, viterbi: float, counts: TransitionCounts):
        self.log_p_blank = _logaddexp(self.log_p_blank, log_p)
        if viterbi > self.viterbi_blank:
            self.viterbi_blank = viterbi
            self.counts_blank = counts

    def add_nonblank(self, log_p: float, viterbi: float, counts: TransitionCounts):
        self.log_p_nonblank = _logaddexp(self.log_p_nonblank, log_p)
        if viterbi > self.viterbi_nonblank:
            self.viterbi_nonblank = viterbi
            self.counts_nonblank = counts


class FusionScorer:
    """Log-linear combination of CTC, LM, prior and transition features."""

    def __init__(self, lm, weights: LogLinearWeights):
        from ..lm.ngram import lm_score

        self.lm = lm
        self.weights = weights
        self._lm_score = lm_score
        self._cache: Dict[Tuple[Any, str], float] = {}

    def initial_state(self):
        return self.lm.initial_state()

    def extend(self, hyp: Hypothesis, char: str):
        """Attaches the LM/prior contribution of ``char`` to a fresh child."""
        key = (hyp.lm_state, char)
        lm_term = self._cache.get(key)
        if lm_term is None:
            lm_term = self._lm_score(self.lm, hyp.lm_state, char)
            self._cache[key] = lm_term
        hyp.lm_logscore += lm_term
        hyp.prior_logscore += self.lm.unigram_logscore(char)
        hyp.lm_state = self.lm.advance(hyp.lm_state, char)

    def cost(self, hyp: Hypothesis) -> float:
        w = self.weights
        counts = hyp.transitions
        # Zero-weighted terms are skipped so that 0 * inf never reaches the sum.
        terms = [
            (w.ctc, -hyp.log_total),
            (w.lm, -hyp.lm_logscore),
            (w.prior, -hyp.prior_logscore),
            (w.new_char, counts.new_char),
            (w.blank, counts.blank),
            (w.repeat, counts.repeat),
        ]
        total = 0.0
        for weight, feature in terms:
            if weight != 0.0:
                total += weight * feature
        return total

    def score(self, hyp: Hypothesis) -> float:
        cost = self.cost(hyp)
        return -cost if not math.isnan(cost) else _NEG_INF


def _plain_score(hyp: Hypothesis) -> float:
    return hyp.log_total


def _rank(hyps, score: Callable[[Hypothesis], float]) -> List[Tuple[float, Hypothesis]]:
    scored = [(score(h), h) for h in hyps]
    scored.sort(key=lambda item: (-item[0], item[1].text))
    return scored


def _expand(
    beam: Sequence[Hypothesis],
    frame: np.ndarray,
    alphabet: str,
    blank: int,
    scorer: Optional[FusionScorer],
) -> Dict[Tuple[int, ...], Hypothesis]:
    """All prefixes one frame further; parents are left untouched."""
    p_blank = float(frame[blank])
    candidates: Dict[Tuple[int, ...], Hypothesis] = {}

    def fetch(parent: Hypothesis, label: int) -> Hypothesis:
        key = parent.prefix + (label,)
        hyp = candidates.get(key)
        if hyp is None:
            hyp = parent.child(label, alphabet[label])
            if scorer is not None:
                scorer.extend(hyp, alphabet[label])
            candidates[key] = hyp
        return hyp

    for hyp in beam:
        same = candidates.get(hyp.prefix)
        if same is None:
            same = Hypothesis(
                prefix=hyp.prefix,
                text=hyp.text,
                lm_state=hyp.lm_state,
                lm_logscore=hyp.lm_logscore,
                prior_logscore=hyp.prior_logscore,
            )
            candidates[hyp.prefix] = same

        # Blank keeps the prefix.
        if hyp.viterbi_nonblank > hyp.viterbi_blank:
            best_v, best_counts = hyp.viterbi_nonblank, hyp.counts_nonblank
        else:
            best_v, best_counts = hyp.viterbi_blank, hyp.counts_blank
        same.add_blank(
            hyp.log_total + p_blank,
            best_v + p_blank,
            best_counts.add(blank=1),
        )

        last = hyp.last
        # Repeating the last label also keeps the prefix.
        if last is not None:
            p_last = float(frame[last])
            same.add_nonblank(
                hyp.log_p_nonblank + p_last,
                hyp.viterbi_nonblank + p_last,
                hyp.counts_nonblank.add(repeat=1),
            )

        for label in range(blank):
            p = float(frame[label])
            if p == _NEG_INF:
                continue
            child = fetch(hyp, label)
            if label == last:
                # A doubled letter needs a blank in between.
                child.add_nonblank(
                    hyp.log_p_blank + p,
                    hyp.viterbi_blank + p,
                    hyp.counts_blank.add(new_char=1),
                )
            else:
                child.add_nonblank(
                    hyp.log_total + p,
                    best_v + p,
                    best_counts.add(new_char=1),
                )
    return candidates


def prefix_beam_search(
    logits: FrameLogits,
    beam_width: Optional[int] = DEFAULT_BEAM_WIDTH,
    scorer: Optional[FusionScorer] = None,
) -> List[Tuple[str, float]]:
    """Ranked ``(text, score)`` hypotheses; ``beam_width=None`` never prunes.

    A bounded search of width ``k`` runs the widths ``1..k`` side by side
    and answers with the one whose best final score is highest (the widest
    on ties). Widths holding the same beam at a frame share its expansion.
    The best returned score is therefore non-decreasing in ``beam_width``.
    """
    if beam_width is not None and beam_width < 1:
        raise ParameterError(f"beam_width must be >= 1, got {beam_width}")
    log_probs = logits.log_probs()
    alphabet = logits.alphabet
    blank = logits.blank
    score = scorer.score if scorer is not None else _plain_score

    root = Hypothesis(
        prefix=(),
        text="",
        log_p_blank=0.0,
        viterbi_blank=0.0,
        lm_state=scorer.initial_state() if scorer is not None else None,
    )
    widths: List[Optional[int]] = (
        [None] if beam_width is None else list(range(1, beam_width + 1))
    )
    beams: Dict[Optional[int], List[Hypothesis]] = {k: [root] for k in widths}
    for t in range(logits.num_frames):
        frame = log_probs[t]
        # Keyed by object identity: equal prefixes may still carry different mass.
        expanded: Dict[Tuple[int, ...], List[Hypothesis]] = {}
        for k in widths:
            key = tuple(id(h) for h in beams[k])
            ranked = expanded.get(key)
            if ranked is None:
                candidates = _expand(beams[k], frame, alphabet, blank, scorer)
                if not debugging.NDEBUG:
                    mass = sum(math.exp(h.log_total) for h in candidates.values())
                    assert mass <= 1.0 + 1e-6, f"beam mass {mass} exceeds 1 at frame {t}"
                ranked = expanded[key] = [h for _, h in _rank(candidates.values(), score)]
            beams[k] = ranked if k is None else ranked[:k]

    best: Optional[List[Tuple[float, Hypothesis]]] = None
    for k in widths:
        result = _rank(beams[k], score)
        if best is None or result[0][0] >= best[0][0]:
            best = result
    assert best is not None
    return [(h.text, s) for s, h in best]


_coverage_checked: Set[Tuple[int, str]] = set()


def _check_coverage(alphabet: str, lm):
    key = (id(lm), alphabet)
    if key in _coverage_checked:
        return
    _coverage_checked.add(key)
    missing = sorted(set(alphabet) - set(lm.alphabet))
    if missing:
        logger.warning(
            "LM never saw %d alphabet symbol(s): %r", len(missing), "".join(missing)
        )


def decode_fused(
    logits: FrameLogits,
    lm,
    w: LogLinearWeights,
    beam_width: Optional[int] = DEFAULT_BEAM_WIDTH,
) -> str:
    if not logits.alphabet:
        raise InputError("Fused decoding needs a non-empty alphabet")
    _check_coverage(logits.alphabet, lm)
    hyps = prefix_beam_search(logits, beam_width, FusionScorer(lm, w))
    return hyps[0][0]
