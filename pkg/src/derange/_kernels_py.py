"""Pure-numpy batch sampling kernels.

Fallback twin of the compiled extension module.  Both kernels consume
uniforms from the supplied BitGenerator in exactly the same order:

* chain_batch:   one uniform per chain step (positions n-1 down to 3) per
  sample, drawn even when the step is forced, row-major over samples.
* feller_batch:  one uniform per Bernoulli spacing (i = 2..n) per attempt,
  all n-1 drawn even when rejection is already certain, row-major over
  attempts.
* poisson_batch: one uniform per cycle length (j = 2..n) per attempt,
  turned into Poisson counts by CDF inversion, row-major over attempts.

This fixed consumption discipline is what makes results bit-identical
across backends for a given (seed, stream_id).
"""

from __future__ import annotations

import numpy as np

# Per-chunk uniform budgets, in float64 counts (keeps peak memory modest).
_CHAIN_CHUNK_BUDGET = 8_000_000
_REJECT_CHUNK_BUDGET = 4_000_000


def chain_batch(bitgen, pcols: np.ndarray, n: int, reps: int):
    """Sample `reps` rows of ordered cycle lengths from the chain.

    pcols[c] is the probability of emitting a 1 at position i = n-1-c given
    state 0; there are n-3 free columns (none for n <= 3).

    Returns (lengths int32, offsets int64) with offsets of length reps+1.
    """
    gen = np.random.Generator(bitgen)
    ncols = len(pcols)
    chunk_rows = max(1, _CHAIN_CHUNK_BUDGET // max(1, ncols))
    length_parts = []
    count_parts = []
    done = 0
    while done < reps:
        rows = min(chunk_rows, reps - done)
        if ncols:
            u = gen.random((rows, ncols))
        state = np.zeros(rows, dtype=bool)
        last = np.full(rows, n + 1, dtype=np.int32)
        row_parts = []
        gap_parts = []
        for c in range(ncols):
            emit = (~state) & (u[:, c] < pcols[c])
            idx = np.nonzero(emit)[0]
            if idx.size:
                pos = n - 1 - c
                row_parts.append(idx)
                gap_parts.append((last[idx] - pos).astype(np.int32))
                last[idx] = pos
            state = emit
        row_parts.append(np.arange(rows))
        gap_parts.append((last - 1).astype(np.int32))  # closing 1 at position 1
        rows_all = np.concatenate(row_parts)
        gaps_all = np.concatenate(gap_parts)
        order = np.argsort(rows_all, kind="stable")
        length_parts.append(gaps_all[order])
        count_parts.append(np.bincount(rows_all, minlength=rows).astype(np.int64))
        done += rows
    lengths = np.concatenate(length_parts)
    counts = np.concatenate(count_parts)
    offsets = np.zeros(reps + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return lengths, offsets


def feller_batch(bitgen, pcols: np.ndarray, n: int, want: int, max_attempts: int):
    """Rejection-sample `want` rows of ordered cycle lengths from Bernoulli
    spacings xi_i ~ Bern(pcols[i-2]), i = 2..n.

    An attempt is accepted when the string 1 xi_2 ... xi_n 1 has no adjacent
    1s.  Returns (lengths int32, offsets int64, attempts int64, total int)
    where attempts[k] counts the attempts consumed by accepted sample k.  If
    the budget runs out the arrays cover only the accepted samples.
    """
    gen = np.random.Generator(bitgen)
    ncols = n - 1
    max_block = max(64, _REJECT_CHUNK_BUDGET // max(1, ncols))

    length_rows = []
    accept_positions = []  # 0-based global attempt index of each acceptance
    attempts_done = 0
    accepted = 0
    p_est = 0.35
    while accepted < want and attempts_done < max_attempts:
        need = want - accepted
        target = int(1.25 * need / max(p_est, 1e-3)) + 64
        rows = min(max_block, max_attempts - attempts_done, max(256, target))
        u = gen.random((rows, ncols))
        x = u < pcols
        bad = x[:, 0] | x[:, -1]
        if ncols > 1:
            bad |= (x[:, :-1] & x[:, 1:]).any(axis=1)
        valid_idx = np.nonzero(~bad)[0]
        for ridx in valid_idx:
            if accepted >= want:
                break
            cols = np.nonzero(x[ridx])[0]
            ones_desc = [int(c) + 2 for c in cols[::-1]] + [1]
            prev = n + 1
            row = np.empty(len(ones_desc), dtype=np.int32)
            for k, pos in enumerate(ones_desc):
                row[k] = prev - pos
                prev = pos
            length_rows.append(row)
            accept_positions.append(attempts_done + int(ridx))
            accepted += 1
        attempts_done += rows
        seen_valid = int((~bad).sum())
        p_est = max(1e-4, min(0.999, (seen_valid + 1) / (rows + 2)))

    return _pack_rejected_rows(length_rows, accept_positions, accepted, want, attempts_done, max_attempts)


def _pack_rejected_rows(length_rows, accept_positions, accepted, want, attempts_done, max_attempts):
    if accepted == want and accept_positions:
        total = accept_positions[-1] + 1
    else:
        total = min(attempts_done, max_attempts)
    offsets = np.zeros(accepted + 1, dtype=np.int64)
    for k, row in enumerate(length_rows):
        offsets[k + 1] = offsets[k] + len(row)
    lengths = (
        np.concatenate(length_rows).astype(np.int32)
        if length_rows
        else np.zeros(0, dtype=np.int32)
    )
    pos = np.asarray(accept_positions, dtype=np.int64)
    attempts = np.diff(pos, prepend=-1) if accepted else np.zeros(0, dtype=np.int64)
    return lengths, offsets, attempts, int(total)


def poisson_batch(bitgen, cdf_flat: np.ndarray, cdf_offs: np.ndarray, n: int, want: int, max_attempts: int):
    """Rejection-sample `want` rows of ascending cycle lengths from tilted
    Poisson counts.

    Column c holds the count for length j = c+2, inverted from one uniform
    against the CDF table cdf_flat[cdf_offs[c]:cdf_offs[c+1]].  Accepts when
    the length-weighted sum hits n.  Return layout matches feller_batch.
    """
    gen = np.random.Generator(bitgen)
    ncols = n - 1
    max_block = max(64, _REJECT_CHUNK_BUDGET // max(1, ncols))
    j_values = np.arange(2, n + 1, dtype=np.int64)
    weights = j_values.astype(np.float64)
    tables = [cdf_flat[cdf_offs[c] : cdf_offs[c + 1]] for c in range(ncols)]

    length_rows = []
    accept_positions = []
    attempts_done = 0
    accepted = 0
    p_est = 2.0 / max(n, 2)
    while accepted < want and attempts_done < max_attempts:
        need = want - accepted
        target = int(1.25 * need / max(p_est, 1e-4)) + 64
        rows = min(max_block, max_attempts - attempts_done, max(256, target))
        u = gen.random((rows, ncols))
        z = np.empty((rows, ncols), dtype=np.int64)
        for c in range(ncols):
            z[:, c] = np.searchsorted(tables[c], u[:, c], side="right")
        total_mass = z.astype(np.float64) @ weights
        valid_idx = np.nonzero(total_mass == n)[0]
        for ridx in valid_idx:
            if accepted >= want:
                break
            row = np.repeat(j_values, z[ridx]).astype(np.int32)
            length_rows.append(row)
            accept_positions.append(attempts_done + int(ridx))
            accepted += 1
        attempts_done += rows
        seen_valid = len(valid_idx)
        p_est = max(1e-6, min(0.999, (seen_valid + 1) / (rows + 2)))

    return _pack_rejected_rows(length_rows, accept_positions, accepted, want, attempts_done, max_attempts)
