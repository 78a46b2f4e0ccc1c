//! Bitrate-selection policies: the buffer-occupancy rate map and the
//! receding-horizon planner that scores candidate chunk sequences against a
//! throughput forecast.

use super::engine::{advance_chunk, PlanRate, Playhead};
use super::{PlayerState, SimulationConfig};
use crate::{Error, Result};

/// Largest candidate-plan count the exhaustive planner will enumerate.
const MAX_PLAN_COUNT: u64 = 2_000_000;

/// Maps buffer occupancy to a ladder index. At or below the reservoir the
/// lowest level is chosen, at or above the cushion the highest; in between
/// the target rate ramps linearly between the ladder extremes and the
/// highest level not exceeding it is selected.
pub fn policy_buffer_based(buffer_seconds: f64, config: &SimulationConfig) -> usize {
    let ladder = &config.ladder;
    let top = ladder.len() - 1;
    if buffer_seconds <= config.bb_reservoir_seconds {
        return 0;
    }
    if buffer_seconds >= config.bb_cushion_seconds {
        return top;
    }
    let slope = (ladder[top].kbps - ladder[0].kbps)
        / (config.bb_cushion_seconds - config.bb_reservoir_seconds);
    let target = ladder[0].kbps + slope * (buffer_seconds - config.bb_reservoir_seconds);
    ladder.iter().rposition(|level| level.kbps <= target).unwrap_or(0)
}

/// Picks the next chunk's ladder index by exhaustively scoring every
/// bitrate sequence over the lookahead window.
///
/// Each candidate sequence is replayed through the exact download dynamics
/// against a belief signal: the current epoch keeps its measured rate (the
/// signal is constant within an epoch), later epochs take the forecast, and
/// epochs beyond it hold the forecast's last value. Sequences are scored
/// with the session objective (quality, switch penalty, rebuffer penalty,
/// and startup penalty if playback has not begun); ties keep the
/// lexicographically earliest sequence.
pub fn policy_mpc(
    predictions: &[f64],
    current_rate_kbps: f64,
    state: &PlayerState,
    config: &SimulationConfig,
    epoch_seconds: f64,
) -> Result<usize> {
    if predictions.is_empty() {
        return Err(Error::Argument("planner needs at least one predicted rate".into()));
    }
    if predictions.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(Error::Argument("predicted rates must be positive and finite".into()));
    }
    if !current_rate_kbps.is_finite() || current_rate_kbps <= 0.0 {
        return Err(Error::Argument("current rate must be positive and finite".into()));
    }
    if !epoch_seconds.is_finite() || epoch_seconds <= 0.0 {
        return Err(Error::Argument("epoch length must be positive and finite".into()));
    }
    if state.remaining_chunks == 0 {
        return Err(Error::Argument("no chunks remain to plan".into()));
    }

    let levels = config.ladder.len();
    let plan_len = config.mpc_horizon_chunks.min(state.remaining_chunks);
    let plan_count = (levels as u64)
        .checked_pow(plan_len as u32)
        .filter(|n| *n <= MAX_PLAN_COUNT)
        .ok_or_else(|| {
            Error::Argument(format!(
                "exhaustive lookahead over {levels} levels and {plan_len} chunks is too large"
            ))
        })?;

    let base_epoch = (state.wall_seconds / epoch_seconds).floor() as usize;
    let rate = PlanRate::new(base_epoch, current_rate_kbps, predictions, epoch_seconds);

    let mut best_value = f64::NEG_INFINITY;
    let mut best_first = 0usize;
    let mut plan = vec![0usize; plan_len];
    for code in 0..plan_count {
        // Most-significant digit first, so ascending codes enumerate plans
        // in lexicographic order and strict improvement keeps the earliest.
        let mut rest = code;
        for slot in (0..plan_len).rev() {
            plan[slot] = (rest % levels as u64) as usize;
            rest /= levels as u64;
        }
        let value = score_plan(&plan, &rate, state, config);
        if value > best_value {
            best_value = value;
            best_first = plan[0];
        }
    }
    Ok(best_first)
}

/// Replays one candidate sequence through the chunk dynamics and returns its
/// objective value. Mirrors the live simulator exactly so that a perfect
/// forecast makes planned and realized values coincide.
fn score_plan(
    plan: &[usize],
    rate: &PlanRate<'_>,
    state: &PlayerState,
    config: &SimulationConfig,
) -> f64 {
    let mut head = Playhead {
        wall_seconds: state.wall_seconds,
        buffer_seconds: state.buffer_seconds,
        started: state.started,
    };
    let mut prev_quality = state.prev_level.map(|idx| config.ladder[idx].quality);
    let mut value = 0.0;
    for (i, &level) in plan.iter().enumerate() {
        let was_started = head.started;
        let chunk_kbits = config.ladder[level].kbps * config.chunk_seconds;
        let stats = advance_chunk(
            rate,
            &mut head,
            chunk_kbits,
            config.chunk_seconds,
            config.buffer_capacity_seconds,
            i + 1 < state.remaining_chunks,
        );
        let quality = config.ladder[level].quality;
        value += quality;
        if let Some(prev) = prev_quality {
            value -= config.switch_penalty * (quality - prev).abs();
        }
        value -= config.rebuffer_penalty_per_second * stats.rebuffer_seconds;
        if !was_started {
            value -= config.startup_penalty_per_second * stats.download_seconds;
        }
        prev_quality = Some(quality);
    }
    value
}
