"""Column-uniform Glauber dynamics and the induced split-merge on cycles.

One update picks a uniform column and a uniform dual site; if either
cyclic neighbor of the site is occupied the resample is forced vacant,
otherwise the site is resampled occupied with probability
lambda / (1 + lambda) (detailed balance for the hard-core measure per
column).  A state change toggles one dual site between parallel and
swapping arrows, which merges the two incident cycles if they are
distinct and splits the cycle otherwise, so the cycle count moves by
exactly one.

Split vs merge is classified without re-extracting cycles: the state
keeps the column-0 return map in sync, a toggle in column j composes it
with the transposition of the two column-0 rows reached from rows k+1 and
k+2 of column j+1, and membership is settled by a bounded walk along the
affected return-map cycle.  Full re-extraction is available through
:meth:`DynState.verify` for debug runs.

Time is reported on two clocks: raw update steps, and non-lazy steps
(accepted updates that changed the state); records carry enough to
reconstruct both, and they distinguish constraint-blocked updates from
resamples that drew the current value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import kernels
from .hardcore import Activity
from .permutation import ArrowField, StepParam, activity_from_step, field_from_occupation, sample_equilibrium
from .cycles import StrandCounts, strand_counts_from_psi
from .streams import key_from_generator
from .torus import TorusDims

EFFECT_NAMES = {0: "none", 1: "split", 2: "merge"}
PROPOSAL_NAMES = {0: "vacate", 1: "occupy"}


@dataclass(frozen=True)
class UpdateRecord:
    step: int
    column: int
    dual_site: int
    proposal: str
    accepted: bool
    effect: str
    cycle_count_after: int


class UpdateLog:
    """Columnar batch of update records."""

    def __init__(self, step, column, site, proposal, accepted, effect, count_after):
        self.step = step
        self.column = column
        self.site = site
        self.proposal = proposal
        self.accepted = accepted
        self.effect = effect
        self.count_after = count_after

    def __len__(self):
        return len(self.step)

    def __iter__(self):
        for i in range(len(self)):
            yield UpdateRecord(
                step=int(self.step[i]),
                column=int(self.column[i]),
                dual_site=int(self.site[i]),
                proposal=PROPOSAL_NAMES[int(self.proposal[i])],
                accepted=bool(self.accepted[i]),
                effect=EFFECT_NAMES[int(self.effect[i])],
                cycle_count_after=int(self.count_after[i]),
            )

    @classmethod
    def concat(cls, logs):
        return cls(*(np.concatenate([getattr(l, f) for l in logs])
                     for f in ("step", "column", "site", "proposal",
                               "accepted", "effect", "count_after")))

    def write_ndjson(self, path, every: int = 1) -> None:
        """Newline-delimited JSON records, optionally downsampled."""
        with open(path, "w") as fh:
            for i in range(0, len(self), every):
                rec = {
                    "step": int(self.step[i]),
                    "column": int(self.column[i]),
                    "dual_site": int(self.site[i]),
                    "proposal": PROPOSAL_NAMES[int(self.proposal[i])],
                    "accepted": bool(self.accepted[i]),
                    "effect": EFFECT_NAMES[int(self.effect[i])],
                    "cycle_count_after": int(self.count_after[i]),
                }
                fh.write(json.dumps(rec) + "\n")


class DynState:
    """Mutable dynamics state: dual occupation plus cycle bookkeeping."""

    def __init__(self, dims: TorusDims, occ: np.ndarray, act: Activity, track: bool = True):
        self.dims = dims
        self.occ = np.ascontiguousarray(occ, dtype=np.int8)
        self.act = act
        self.track = track
        self.step_index = 0
        self.blocked = 0
        self.accepted = 0
        self.changed = 0
        if track:
            psi = kernels.compose_return_map(self.occ)
            self.psi = np.asarray(psi, dtype=np.int64)
            self.psi_inv = np.empty_like(self.psi)
            self.psi_inv[self.psi] = np.arange(dims.m)
            self.cycle_count = strand_counts_from_psi(self.psi, dims).cycle_count
        else:
            self.psi = None
            self.psi_inv = None
            self.cycle_count = -1

    @classmethod
    def from_field(cls, fld: ArrowField, act: Activity, track: bool = True) -> "DynState":
        return cls(fld.dims, fld.occupation(), act, track=track)

    @classmethod
    def from_equilibrium(cls, dims: TorusDims, p: StepParam, rng, track: bool = True) -> "DynState":
        fld = sample_equilibrium(dims, p, rng)
        return cls.from_field(fld, activity_from_step(p), track=track)

    @property
    def field(self) -> ArrowField:
        return field_from_occupation(self.dims, self.occ)

    def swap_density(self) -> float:
        return float(self.occ.mean())

    def nonlazy_fraction(self) -> float:
        total = self.blocked + self.accepted
        return self.changed / total if total else 0.0

    def decomposition(self) -> StrandCounts:
        return strand_counts_from_psi(kernels.compose_return_map(self.occ), self.dims)

    def verify(self) -> None:
        """Debug check: occupation valid, bookkeeping consistent."""
        occ = self.occ
        if np.any(occ & np.roll(occ, -1, axis=1)):
            raise AssertionError("adjacent occupied dual sites")
        if self.track:
            sc = self.decomposition()
            if not np.array_equal(sc.psi, self.psi):
                raise AssertionError("return map out of sync")
            if sc.cycle_count != self.cycle_count:
                raise AssertionError(
                    f"cycle count drifted: tracked {self.cycle_count}, "
                    f"actual {sc.cycle_count}"
                )


def run_updates(state: DynState, count: int, rng, record: bool = False,
                every: int = 1) -> UpdateLog | None:
    """Apply ``count`` Glauber updates in place; optionally log them.

    Records carry the raw step clock; the non-lazy clock is the running
    count of effect != none entries.  With cycle tracking off the
    recorded cycle_count_after is -1.
    """
    if count == 0:
        return UpdateLog(*(np.empty(0, dtype=d) for d in
                           (np.int64, np.int32, np.int32, np.int8, np.int8,
                            np.int8, np.int64))) if record else None
    key = key_from_generator(rng)
    psi = state.psi if state.track else np.empty(0, dtype=np.int64)
    psi_inv = state.psi_inv if state.track else np.empty(0, dtype=np.int64)
    cycle_count, stats, rec = kernels.glauber_run(
        state.occ, psi, psi_inv, state.cycle_count, state.act.lam, key,
        count, state.step_index, state.track, record, every,
    )
    state.cycle_count = cycle_count if state.track else -1
    state.step_index += count
    state.blocked += stats[0]
    state.accepted += stats[1]
    state.changed += stats[2]
    if record:
        return UpdateLog(*rec)
    return None


def glauber_step(state: DynState, rng) -> UpdateRecord:
    """One update drawn from ``rng``; returns its record."""
    log = run_updates(state, 1, rng, record=True)
    return next(iter(log))


@dataclass
class ProbeResult:
    """One-step selection trials of a frozen state (no mutation).

    ``cyc_a <= cyc_b`` are snapshot cycle ids for trials that would have
    changed the state; effect is 'split' when the ids coincide.
    """

    cyc_a: np.ndarray
    cyc_b: np.ndarray
    effect: np.ndarray
    n_trials: int


def split_merge_probe(state: DynState, n_probes: int, rng) -> ProbeResult:
    sc = state.decomposition()
    key = key_from_generator(rng)
    cyc_a, cyc_b, effect = kernels.glauber_probe(
        state.occ, sc.row_cycle, state.act.lam, key, n_probes
    )
    return ProbeResult(cyc_a=cyc_a, cyc_b=cyc_b, effect=effect, n_trials=n_probes)


def split_merge_rates(probe: ProbeResult, sc: StrandCounts, dims: TorusDims):
    """Empirical cycle-pair selection frequencies against the
    traversal-count product prediction.

    Returns a list of dicts, one per unordered cycle pair (i <= j) with a
    positive predicted weight k_i * (k_j - [i == j]) in whole-traversal
    units, carrying the normalized predicted share and the empirical
    share of accepted state-changing probes that selected the pair.
    """
    dims.require_traversals()
    gamma = dims.gamma
    wholes = np.asarray(sc.counts) // gamma
    n_cyc = len(wholes)
    hit = probe.effect != 0
    total_hits = int(hit.sum())
    pairs = {}
    for a, b in zip(probe.cyc_a[hit], probe.cyc_b[hit]):
        pairs[(int(a), int(b))] = pairs.get((int(a), int(b)), 0) + 1
    weights = {}
    for i in range(n_cyc):
        for j in range(i, n_cyc):
            w = int(wholes[i] * (wholes[j] - (1 if i == j else 0)))
            if i != j:
                w = int(2 * wholes[i] * wholes[j])
            if w > 0:
                weights[(i, j)] = w
    w_total = sum(weights.values())
    rows = []
    for (i, j), w in sorted(weights.items()):
        rows.append({
            "cycle_a": i,
            "cycle_b": j,
            "whole_a": int(wholes[i]),
            "whole_b": int(wholes[j]),
            "predicted_share": w / w_total,
            "empirical_share": pairs.get((i, j), 0) / total_hits if total_hits else 0.0,
            "hits": pairs.get((i, j), 0),
        })
    observed_unpredicted = sum(v for k, v in pairs.items() if k not in weights)
    return rows, total_hits, observed_unpredicted
