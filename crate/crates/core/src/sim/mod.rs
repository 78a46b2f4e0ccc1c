//! Chunked-streaming playback simulator: replays a throughput trace against
//! a bitrate ladder under different adaptation policies and scores each
//! playback with a session-quality objective.
//!
//! A session is split into fixed-length chunks. Before each chunk the active
//! policy picks a ladder level; the chunk downloads through the trace's
//! piecewise-constant throughput while the playout buffer drains, stalling
//! when it empties and idling when it fills. The objective rewards average
//! quality and penalizes quality switches, stall time, and startup delay.

mod engine;
mod optimal;
mod policy;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::predictors::Predictor;
use crate::trace::SessionTrace;
use crate::{Error, Result};
use engine::{advance_chunk, playable_chunks, Playhead, TraceRate};

pub use policy::{policy_buffer_based, policy_mpc};

/// One rung of the bitrate ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderLevel {
    /// Encoded bitrate of this rung.
    pub kbps: f64,
    /// Perceptual quality credited per chunk at this rung.
    pub quality: f64,
}

/// Player, ladder, and objective parameters for a simulated session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    /// Playback length of one chunk.
    pub chunk_seconds: f64,
    /// Available rungs, ascending by bitrate.
    pub ladder: Vec<LadderLevel>,
    /// Playout buffer cap; the player idles when a fetched chunk would not
    /// leave room for the next one.
    pub buffer_capacity_seconds: f64,
    /// Weight on per-chunk quality changes.
    pub switch_penalty: f64,
    /// Weight on stall time.
    pub rebuffer_penalty_per_second: f64,
    /// Weight on startup delay (the first chunk's download time).
    pub startup_penalty_per_second: f64,
    /// Chunks the receding-horizon planner looks ahead.
    pub mpc_horizon_chunks: usize,
    /// Buffer level at or below which the buffer-based policy stays at the
    /// lowest rung.
    pub bb_reservoir_seconds: f64,
    /// Buffer level at or above which the buffer-based policy goes to the
    /// highest rung.
    pub bb_cushion_seconds: f64,
    /// Upper bound on simulated chunks per session.
    pub max_chunks: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let ladder = [300.0, 750.0, 1200.0, 1850.0, 2850.0, 4300.0]
            .iter()
            .map(|&kbps| LadderLevel { kbps, quality: kbps / 1000.0 })
            .collect();
        Self {
            chunk_seconds: 4.0,
            ladder,
            buffer_capacity_seconds: 30.0,
            switch_penalty: 1.0,
            rebuffer_penalty_per_second: 3.0,
            startup_penalty_per_second: 3.0,
            mpc_horizon_chunks: 5,
            bb_reservoir_seconds: 5.0,
            bb_cushion_seconds: 20.0,
            max_chunks: 120,
        }
    }
}

impl SimulationConfig {
    /// Checks internal consistency; every entry point calls this first.
    pub fn validate(&self) -> Result<()> {
        if !self.chunk_seconds.is_finite() || self.chunk_seconds <= 0.0 {
            return Err(Error::Validation("chunk length must be positive and finite".into()));
        }
        if !self.buffer_capacity_seconds.is_finite()
            || self.buffer_capacity_seconds < self.chunk_seconds
        {
            return Err(Error::Validation(
                "buffer capacity must be finite and hold at least one chunk".into(),
            ));
        }
        if self.ladder.is_empty() {
            return Err(Error::Validation("bitrate ladder must not be empty".into()));
        }
        for level in &self.ladder {
            if !level.kbps.is_finite() || level.kbps <= 0.0 {
                return Err(Error::Validation("ladder bitrates must be positive and finite".into()));
            }
            if !level.quality.is_finite() {
                return Err(Error::Validation("ladder qualities must be finite".into()));
            }
        }
        for pair in self.ladder.windows(2) {
            if pair[1].kbps <= pair[0].kbps {
                return Err(Error::Validation("ladder bitrates must be strictly ascending".into()));
            }
            if pair[1].quality < pair[0].quality {
                return Err(Error::Validation("ladder qualities must be non-decreasing".into()));
            }
        }
        for (name, value) in [
            ("switch penalty", self.switch_penalty),
            ("rebuffer penalty", self.rebuffer_penalty_per_second),
            ("startup penalty", self.startup_penalty_per_second),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Validation(format!(
                    "{name} must be non-negative and finite"
                )));
            }
        }
        if self.mpc_horizon_chunks == 0 {
            return Err(Error::Validation("planner lookahead must be at least one chunk".into()));
        }
        if !self.bb_reservoir_seconds.is_finite() || self.bb_reservoir_seconds < 0.0 {
            return Err(Error::Validation("reservoir must be non-negative and finite".into()));
        }
        if !self.bb_cushion_seconds.is_finite()
            || self.bb_cushion_seconds <= self.bb_reservoir_seconds
        {
            return Err(Error::Validation("cushion must be finite and exceed the reservoir".into()));
        }
        if self.max_chunks == 0 {
            return Err(Error::Validation("session must allow at least one chunk".into()));
        }
        Ok(())
    }
}

/// Player state handed to decision policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayerState {
    /// Wall-clock seconds since the session began.
    pub wall_seconds: f64,
    /// Seconds of video currently buffered.
    pub buffer_seconds: f64,
    /// Whether playback has begun (false only before the first chunk).
    pub started: bool,
    /// Ladder index of the previous chunk, if any.
    pub prev_level: Option<usize>,
    /// Chunks left to download, including the one being decided.
    pub remaining_chunks: usize,
}

/// Result of one simulated session.
///
/// The objective decomposes exactly as
/// `qoe_value = avg_quality * n - switch_penalty * quality_variation_sum
/// - rebuffer_penalty_per_second * rebuffer_seconds
/// - startup_penalty_per_second * startup_seconds`
/// where `n` is `chosen_bitrates_kbps.len()`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlaybackOutcome {
    /// Ladder bitrate selected for each chunk, in order.
    pub chosen_bitrates_kbps: Vec<f64>,
    /// Objective value of the session.
    pub qoe_value: f64,
    /// Mean per-chunk quality.
    pub avg_quality: f64,
    /// Sum of absolute quality changes between consecutive chunks.
    pub quality_variation_sum: f64,
    /// Total stall time.
    pub rebuffer_seconds: f64,
    /// Download time of the first chunk.
    pub startup_seconds: f64,
}

/// An adaptation policy to simulate.
pub enum Policy<'a> {
    /// Map buffer occupancy to a rung through the reservoir/cushion ramp.
    BufferBased,
    /// Plan ahead against the given throughput predictor.
    Mpc(&'a dyn Predictor),
    /// Always fetch the given ladder index.
    FixedLevel(usize),
    /// Replay the best plan computed from the full trace.
    Optimal,
}

enum Decider<'a> {
    BufferBased,
    Mpc(&'a dyn Predictor),
    Fixed(usize),
    Plan(&'a [usize]),
}

/// Simulates one session under `policy`.
pub fn simulate(
    trace: &SessionTrace,
    policy: &Policy<'_>,
    config: &SimulationConfig,
) -> Result<PlaybackOutcome> {
    config.validate()?;
    match policy {
        Policy::BufferBased => run_playback(trace, &Decider::BufferBased, config),
        Policy::Mpc(predictor) => run_playback(trace, &Decider::Mpc(*predictor), config),
        Policy::FixedLevel(idx) => {
            if *idx >= config.ladder.len() {
                return Err(Error::Argument(format!(
                    "fixed level {idx} is outside the {}-rung ladder",
                    config.ladder.len()
                )));
            }
            run_playback(trace, &Decider::Fixed(*idx), config)
        }
        Policy::Optimal => {
            let plan = optimal::optimal_plan(trace, config)?;
            run_playback(trace, &Decider::Plan(&plan), config)
        }
    }
}

/// Best achievable playback for `trace` under the same dynamics and
/// objective the policies are scored with.
pub fn offline_optimal(
    trace: &SessionTrace,
    config: &SimulationConfig,
) -> Result<PlaybackOutcome> {
    simulate(trace, &Policy::Optimal, config)
}

fn run_playback(
    trace: &SessionTrace,
    decider: &Decider<'_>,
    config: &SimulationConfig,
) -> Result<PlaybackOutcome> {
    let epoch_seconds = f64::from(trace.epoch_seconds());
    let num_chunks =
        playable_chunks(trace.duration_seconds(), config.chunk_seconds, config.max_chunks)?;
    let samples = trace.samples();
    let rate = TraceRate::new(samples, epoch_seconds);

    let mut head = Playhead::initial();
    let mut prev_level: Option<usize> = None;
    let mut chosen = Vec::with_capacity(num_chunks);
    let mut sum_quality = 0.0;
    let mut variation = 0.0;
    let mut rebuffer = 0.0;
    let mut startup = 0.0;

    for k in 0..num_chunks {
        let level = match decider {
            Decider::BufferBased => policy_buffer_based(head.buffer_seconds, config),
            Decider::Fixed(idx) => *idx,
            Decider::Plan(plan) => plan[k],
            Decider::Mpc(predictor) => {
                let epoch_now = (head.wall_seconds / epoch_seconds).floor() as usize;
                let seen = epoch_now.min(samples.len() - 1);
                let horizon_slots = ((config.mpc_horizon_chunks as f64 * config.chunk_seconds
                    / epoch_seconds)
                    .ceil() as usize)
                    .max(1);
                let window = crate::predictors::HistoryWindow::new(
                    samples[..=seen].to_vec(),
                    horizon_slots,
                )?;
                let predictions = predictor.forecast(&window)?;
                let state = PlayerState {
                    wall_seconds: head.wall_seconds,
                    buffer_seconds: head.buffer_seconds,
                    started: head.started,
                    prev_level,
                    remaining_chunks: num_chunks - k,
                };
                policy_mpc(&predictions, samples[seen], &state, config, epoch_seconds)?
            }
        };

        let was_started = head.started;
        let stats = advance_chunk(
            &rate,
            &mut head,
            config.ladder[level].kbps * config.chunk_seconds,
            config.chunk_seconds,
            config.buffer_capacity_seconds,
            k + 1 < num_chunks,
        );
        if !was_started {
            startup = stats.download_seconds;
        }
        rebuffer += stats.rebuffer_seconds;
        let quality = config.ladder[level].quality;
        sum_quality += quality;
        if let Some(prev) = prev_level {
            variation += (quality - config.ladder[prev].quality).abs();
        }
        prev_level = Some(level);
        chosen.push(config.ladder[level].kbps);
    }

    let n = num_chunks as f64;
    let avg_quality = sum_quality / n;
    let qoe_value = avg_quality * n
        - config.switch_penalty * variation
        - config.rebuffer_penalty_per_second * rebuffer
        - config.startup_penalty_per_second * startup;
    Ok(PlaybackOutcome {
        chosen_bitrates_kbps: chosen,
        qoe_value,
        avg_quality,
        quality_variation_sum: variation,
        rebuffer_seconds: rebuffer,
        startup_seconds: startup,
    })
}

/// One row of a policy comparison: a session played under one policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QoeRow {
    pub session_id: String,
    pub policy: String,
    pub qoe_value: f64,
    /// Session value divided by the offline optimum; absent when the
    /// optimum is not positive, since the ratio is meaningless there.
    pub normalized_qoe: Option<f64>,
    pub avg_quality: f64,
    pub quality_variation_sum: f64,
    pub rebuffer_seconds: f64,
    pub startup_seconds: f64,
}

/// Plays every session under every named policy and normalizes each value
/// by the session's offline optimum.
pub fn evaluate_qoe(
    traces: &[SessionTrace],
    policies: &[(String, Policy<'_>)],
    config: &SimulationConfig,
) -> Result<Vec<QoeRow>> {
    config.validate()?;
    if traces.is_empty() {
        return Err(Error::Argument("policy comparison needs at least one session".into()));
    }
    if policies.is_empty() {
        return Err(Error::Argument("policy comparison needs at least one policy".into()));
    }
    let per_trace: Vec<Vec<QoeRow>> = traces
        .par_iter()
        .map(|trace| {
            let reference = offline_optimal(trace, config)?;
            policies
                .iter()
                .map(|(name, policy)| {
                    let outcome = match policy {
                        Policy::Optimal => reference.clone(),
                        other => simulate(trace, other, config)?,
                    };
                    let normalized_qoe = (reference.qoe_value > 0.0)
                        .then(|| outcome.qoe_value / reference.qoe_value);
                    Ok(QoeRow {
                        session_id: trace.session_id().to_string(),
                        policy: name.clone(),
                        qoe_value: outcome.qoe_value,
                        normalized_qoe,
                        avg_quality: outcome.avg_quality,
                        quality_variation_sum: outcome.quality_variation_sum,
                        rebuffer_seconds: outcome.rebuffer_seconds,
                        startup_seconds: outcome.startup_seconds,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(per_trace.into_iter().flatten().collect())
}

/// Serializes comparison rows as CSV; the normalization column is empty for
/// sessions whose offline optimum was not positive.
pub fn qoe_rows_to_csv(rows: &[QoeRow]) -> String {
    let mut out = String::from(
        "session_id,policy,qoe_value,normalized_qoe,avg_quality,quality_variation_sum,rebuffer_seconds,startup_seconds\n",
    );
    for row in rows {
        let normalized =
            row.normalized_qoe.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.session_id,
            row.policy,
            row.qoe_value,
            normalized,
            row.avg_quality,
            row.quality_variation_sum,
            row.rebuffer_seconds,
            row.startup_seconds
        ));
    }
    out
}
