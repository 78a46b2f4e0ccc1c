//! Offline-optimal bitrate plan: a stage-by-stage search over chunk
//! decisions with the full trace in hand, used as the normalizing reference
//! for policy comparisons.

use std::collections::BTreeMap;

use super::engine::{advance_chunk, playable_chunks, Playhead, TraceRate};
use super::SimulationConfig;
use crate::trace::SessionTrace;
use crate::Result;

/// Buffer levels are bucketed this finely when grouping search states.
const BUFFER_CELL_SECONDS: f64 = 0.1;
/// Below this many total plans the search keeps every path and is exact.
const EXHAUSTIVE_PLAN_LIMIT: u64 = 20_000;
/// Representatives kept per (previous level, buffer cell) group otherwise.
const BEAM_WIDTH: usize = 8;

/// One surviving search state: exact value and player state, plus a
/// backpointer into the previous stage for plan reconstruction.
#[derive(Debug, Clone, Copy)]
struct Rep {
    value: f64,
    wall_seconds: f64,
    buffer_seconds: f64,
    back_key: u32,
    back_idx: u32,
    level: u8,
}

/// Computes the best chunk-by-chunk ladder plan for `trace`.
///
/// States after each chunk are grouped by (previous level, buffer bucket);
/// each group keeps its best-valued representatives with exact buffer and
/// wall clock, and every representative expands through the same chunk
/// dynamics as the live simulator. When the whole decision tree is small
/// every path survives, making the result exactly optimal; larger instances
/// keep a fixed-width beam per group.
pub(crate) fn optimal_plan(
    trace: &SessionTrace,
    config: &SimulationConfig,
) -> Result<Vec<usize>> {
    let epoch_seconds = f64::from(trace.epoch_seconds());
    let num_chunks =
        playable_chunks(trace.duration_seconds(), config.chunk_seconds, config.max_chunks)?;
    let levels = config.ladder.len();
    let beam = if (levels as u64)
        .checked_pow(num_chunks as u32)
        .is_some_and(|n| n <= EXHAUSTIVE_PLAN_LIMIT)
    {
        usize::MAX
    } else {
        BEAM_WIDTH
    };
    let cells = (config.buffer_capacity_seconds / BUFFER_CELL_SECONDS).floor() as u32 + 2;
    let key_of = |prev_code: u32, buffer: f64| -> u32 {
        let cell = ((buffer / BUFFER_CELL_SECONDS).floor() as u32).min(cells - 1);
        prev_code * cells + cell
    };
    let none_code = levels as u32;

    let rate = TraceRate::new(trace.samples(), epoch_seconds);
    let mut layers: Vec<BTreeMap<u32, Vec<Rep>>> = Vec::with_capacity(num_chunks + 1);
    let mut first = BTreeMap::new();
    first.insert(
        key_of(none_code, 0.0),
        vec![Rep {
            value: 0.0,
            wall_seconds: 0.0,
            buffer_seconds: 0.0,
            back_key: 0,
            back_idx: 0,
            level: 0,
        }],
    );
    layers.push(first);

    for k in 0..num_chunks {
        let mut next: BTreeMap<u32, Vec<Rep>> = BTreeMap::new();
        for (&key, reps) in &layers[k] {
            let prev_code = key / cells;
            for (rep_idx, rep) in reps.iter().enumerate() {
                for level in 0..levels {
                    let mut head = Playhead {
                        wall_seconds: rep.wall_seconds,
                        buffer_seconds: rep.buffer_seconds,
                        started: k > 0,
                    };
                    let stats = advance_chunk(
                        &rate,
                        &mut head,
                        config.ladder[level].kbps * config.chunk_seconds,
                        config.chunk_seconds,
                        config.buffer_capacity_seconds,
                        k + 1 < num_chunks,
                    );
                    let quality = config.ladder[level].quality;
                    let mut value = rep.value + quality
                        - config.rebuffer_penalty_per_second * stats.rebuffer_seconds;
                    if k == 0 {
                        value -= config.startup_penalty_per_second * stats.download_seconds;
                    } else {
                        let prev_quality = config.ladder[prev_code as usize].quality;
                        value -= config.switch_penalty * (quality - prev_quality).abs();
                    }
                    let candidate = Rep {
                        value,
                        wall_seconds: head.wall_seconds,
                        buffer_seconds: head.buffer_seconds,
                        back_key: key,
                        back_idx: rep_idx as u32,
                        level: level as u8,
                    };
                    let bucket =
                        next.entry(key_of(level as u32, head.buffer_seconds)).or_default();
                    let pos = bucket
                        .iter()
                        .position(|r| candidate.value > r.value)
                        .unwrap_or(bucket.len());
                    if pos < beam {
                        bucket.insert(pos, candidate);
                        bucket.truncate(beam);
                    }
                }
            }
        }
        layers.push(next);
    }

    let last = layers.last().expect("at least the initial layer exists");
    let mut best: Option<(u32, u32, f64)> = None;
    for (&key, reps) in last {
        for (idx, rep) in reps.iter().enumerate() {
            if best.is_none_or(|(_, _, v)| rep.value > v) {
                best = Some((key, idx as u32, rep.value));
            }
        }
    }
    let (mut key, mut idx, _) = best.expect("search layers are never empty");
    let mut plan = vec![0usize; num_chunks];
    for k in (1..=num_chunks).rev() {
        let rep = layers[k][&key][idx as usize];
        plan[k - 1] = rep.level as usize;
        key = rep.back_key;
        idx = rep.back_idx;
    }
    Ok(plan)
}
