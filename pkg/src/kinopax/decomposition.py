"""Uniform state-space grid with per-region exploration metrics.

The grid partitions the state box into ``cells_per_dim^n`` regions; each
region is further split into ``subcells_per_dim^3`` sub-cells along the
three workspace dimensions only, which bounds memory at high state
dimension. Regions accumulate valid/invalid outcome counters and a visited
bitset over sub-cells; from those, per-region free-volume, coverage, score,
and acceptance probability estimates are recomputed after every propagation
pass.

Estimate updates are two barrier-separated sweeps: one computing per-region
values independently, one normalizing scores into acceptance probabilities
through a deterministic reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _atomics


@dataclass(frozen=True)
class RegionRecord:
    """Snapshot of one region's counters and derived metrics."""

    n_valid: int
    n_invalid: int
    cov: int
    free_vol: float
    score: float
    p_accept: float
    vol: float


class Decomposition:
    def __init__(self, state_lo: np.ndarray, state_hi: np.ndarray,
                 cells_per_dim: int, subcells_per_dim: int,
                 delta: float = 1.0, position_dims=(0, 1, 2)):
        self.lo = np.asarray(state_lo, dtype=np.float64).copy()
        self.hi = np.asarray(state_hi, dtype=np.float64).copy()
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("state bounds must be matching 1-D arrays")
        if not np.all(self.lo < self.hi):
            raise ValueError("state box must have positive extent in every dimension")
        n = len(self.lo)
        self.n = n
        self.cells = np.full(n, int(cells_per_dim), dtype=np.int64)
        self.widths = (self.hi - self.lo) / self.cells
        # C-order flattening: first dimension varies slowest.
        strides = np.ones(n, dtype=np.int64)
        for d in range(n - 2, -1, -1):
            strides[d] = strides[d + 1] * self.cells[d + 1]
        self.strides = strides
        self.n_regions = int(self.cells.prod())
        self.subcells = int(subcells_per_dim)
        self.subs_per_region = self.subcells**3
        self.position_dims = tuple(position_dims)
        self.delta = float(delta)
        # Constant mapped workspace volume of a uniform grid cell; only
        # relative scores matter downstream.
        self.vol = float(np.prod(self.widths[list(position_dims)]))

        self.n_valid = np.zeros(self.n_regions, dtype=np.int64)
        self.n_invalid = np.zeros(self.n_regions, dtype=np.int64)
        self.cov = np.zeros(self.n_regions, dtype=np.int64)
        self.free_vol = np.zeros(self.n_regions, dtype=np.float64)
        self.score = np.zeros(self.n_regions, dtype=np.float64)
        self.p_accept = np.ones(self.n_regions, dtype=np.float64)
        self.visited = np.zeros(self.n_regions * self.subs_per_region, dtype=np.uint8)
        self.avail_mask = np.zeros(self.n_regions, dtype=bool)
        self.avail_ids = np.empty(0, dtype=np.int64)

    # -- mapping ------------------------------------------------------------

    def region_index(self, x: np.ndarray) -> int:
        """Flattened grid cell of x; upper-boundary states clamp into the last cell."""
        rel = (np.asarray(x, dtype=np.float64) - self.lo) / self.widths
        rel = np.clip(rel, 0.0, (self.cells - 1).astype(np.float64))
        return int(np.floor(rel).astype(np.int64) @ self.strides)

    def subregion_index(self, x: np.ndarray, region: int) -> int:
        """Refined sub-cell of x inside its region (workspace dims only)."""
        sub = 0
        smax = float(self.subcells - 1)
        for d in self.position_dims:
            rel = (float(x[d]) - self.lo[d]) / self.widths[d]
            cell = (region // int(self.strides[d])) % int(self.cells[d])
            fr = min(max((rel - cell) * self.subcells, 0.0), smax)
            sub = sub * self.subcells + int(np.floor(fr))
        return sub

    def map_states(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized (region, sub-region) mapping for rows of a (m, n) array."""
        rel = (np.asarray(states, dtype=np.float64) - self.lo) / self.widths
        crel = np.clip(rel, 0.0, (self.cells - 1).astype(np.float64))
        c = np.floor(crel).astype(np.int64)
        regions = c @ self.strides
        subs = np.zeros(len(states), dtype=np.int64)
        smax = float(self.subcells - 1)
        for d in self.position_dims:
            fr = np.clip((rel[:, d] - c[:, d]) * self.subcells, 0.0, smax)
            subs = subs * self.subcells + np.floor(fr).astype(np.int64)
        return regions, subs

    # -- counters and visited bits -------------------------------------------

    def record_outcome(self, region: int, valid: bool) -> None:
        """Atomically add one outcome to the region's counters."""
        if valid:
            _atomics.atomic_add_i64(self.n_valid, region, 1)
        else:
            _atomics.atomic_add_i64(self.n_invalid, region, 1)

    def record_outcomes(self, regions: np.ndarray, valid: np.ndarray) -> None:
        """Bulk counter update; caller must hold the single-writer barrier.

        Entries with region < 0 (divergent dynamics, unattributable) are
        skipped.
        """
        np.add.at(self.n_valid, regions[valid], 1)
        inv = regions[~valid]
        np.add.at(self.n_invalid, inv[inv >= 0], 1)

    def try_mark_subregion_visited(self, region: int, sub: int) -> bool:
        """Set the visited bit; True exactly on the first call ever for the pair."""
        bit = region * self.subs_per_region + sub
        old = _atomics.atomic_exchange_u8(self.visited, bit, 1)
        if old == 0:
            _atomics.atomic_add_i64(self.cov, region, 1)
            return True
        return False

    def first_visits(self, regions: np.ndarray, subs: np.ndarray) -> np.ndarray:
        """Batched try_mark_subregion_visited in array order.

        Equivalent to calling the scalar operation element by element:
        within the batch, the lowest index targeting a pair wins.
        """
        pairs = regions * self.subs_per_region + subs
        uniq, first_idx = np.unique(pairs, return_index=True)
        fresh = self.visited[uniq] == 0
        mask = np.zeros(len(pairs), dtype=bool)
        winners = first_idx[fresh]
        mask[winners] = True
        self.visited[uniq[fresh]] = 1
        np.add.at(self.cov, regions[winners], 1)
        return mask

    # -- availability ---------------------------------------------------------

    def make_available(self, region_ids: np.ndarray) -> None:
        """Mark regions as containing a tree node; p_accept is refined later."""
        ids = np.unique(np.asarray(region_ids, dtype=np.int64))
        new = ids[~self.avail_mask[ids]]
        if len(new):
            self.avail_mask[new] = True
            self.avail_ids = np.union1d(self.avail_ids, new).astype(np.int64)

    # -- estimate updates -------------------------------------------------------

    def update_region_estimates(self, region: int) -> None:
        """Recompute free_vol and score of one available region from a counter snapshot."""
        nv = float(self.n_valid[region])
        ni = float(self.n_invalid[region])
        fv = (self.delta + nv) * self.vol / (self.delta + nv + ni)
        self.free_vol[region] = fv
        total = nv + ni
        self.score[region] = (fv * fv) * (fv * fv) / (
            (1.0 + self.cov[region]) * (1.0 + total * total)
        )

    def update_all_estimates(self) -> None:
        """First estimate sweep: independent per-region work items."""
        ids = self.avail_ids
        if len(ids) == 0:
            return
        nv = self.n_valid[ids].astype(np.float64)
        ni = self.n_invalid[ids].astype(np.float64)
        fv = (self.delta + nv) * self.vol / (self.delta + nv + ni)
        self.free_vol[ids] = fv
        total = nv + ni
        self.score[ids] = (fv * fv) * (fv * fv) / (
            (1.0 + self.cov[ids]) * (1.0 + total * total)
        )

    def update_accept(self, epsilon: float) -> None:
        """Second sweep: normalize scores into acceptance probabilities.

        Lower-bounded by epsilon for every available region; regions never
        made available keep p_accept = 1. An all-zero score sum degenerates
        to min(1, epsilon) to keep the lower bound intact.
        """
        ids = self.avail_ids
        if len(ids) == 0:
            return
        total = float(self.score[ids].sum())
        if total <= 0.0:
            self.p_accept[ids] = min(1.0, epsilon)
        else:
            self.p_accept[ids] = np.minimum(1.0, self.score[ids] / total + epsilon)

    # -- inspection ---------------------------------------------------------------

    def region_record(self, region: int) -> RegionRecord:
        return RegionRecord(
            n_valid=int(self.n_valid[region]),
            n_invalid=int(self.n_invalid[region]),
            cov=int(self.cov[region]),
            free_vol=float(self.free_vol[region]),
            score=float(self.score[region]),
            p_accept=float(self.p_accept[region]),
            vol=self.vol,
        )

    def dump_rows(self) -> list[dict]:
        """Per-available-region metric rows for the diagnostics dump."""
        rows = []
        for region in self.avail_ids:
            rec = self.region_record(int(region))
            rows.append(
                {
                    "region": int(region),
                    "n_valid": rec.n_valid,
                    "n_invalid": rec.n_invalid,
                    "cov": rec.cov,
                    "free_vol": rec.free_vol,
                    "score": rec.score,
                    "p_accept": rec.p_accept,
                }
            )
        return rows
