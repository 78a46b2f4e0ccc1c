//! Chunk-stepping core shared by the live simulator, the MPC plan scorer,
//! and the offline-optimal search, so every code path prices downloads with
//! identical dynamics.

use crate::{Error, Result};

/// A piecewise-constant throughput signal: `rate_kbps(e)` holds over the
/// wall-clock interval `[e * epoch_seconds, (e + 1) * epoch_seconds)`.
pub(crate) trait EpochRate {
    fn epoch_seconds(&self) -> f64;
    fn rate_kbps(&self, epoch: usize) -> f64;
}

/// The measured trace itself; epochs past its end hold the last sample.
pub(crate) struct TraceRate<'a> {
    samples: &'a [f64],
    epoch_seconds: f64,
}

impl<'a> TraceRate<'a> {
    pub(crate) fn new(samples: &'a [f64], epoch_seconds: f64) -> Self {
        debug_assert!(!samples.is_empty());
        Self { samples, epoch_seconds }
    }
}

impl EpochRate for TraceRate<'_> {
    fn epoch_seconds(&self) -> f64 {
        self.epoch_seconds
    }

    fn rate_kbps(&self, epoch: usize) -> f64 {
        self.samples[epoch.min(self.samples.len() - 1)]
    }
}

/// What a planner believes: the current epoch's rate is known exactly (the
/// signal is constant within an epoch), later epochs come from the forecast,
/// and epochs beyond the forecast hold its last value.
pub(crate) struct PlanRate<'a> {
    base_epoch: usize,
    current_rate_kbps: f64,
    predictions: &'a [f64],
    epoch_seconds: f64,
}

impl<'a> PlanRate<'a> {
    pub(crate) fn new(
        base_epoch: usize,
        current_rate_kbps: f64,
        predictions: &'a [f64],
        epoch_seconds: f64,
    ) -> Self {
        debug_assert!(!predictions.is_empty());
        Self { base_epoch, current_rate_kbps, predictions, epoch_seconds }
    }
}

impl EpochRate for PlanRate<'_> {
    fn epoch_seconds(&self) -> f64 {
        self.epoch_seconds
    }

    fn rate_kbps(&self, epoch: usize) -> f64 {
        if epoch <= self.base_epoch {
            self.current_rate_kbps
        } else {
            let ahead = epoch - self.base_epoch - 1;
            self.predictions[ahead.min(self.predictions.len() - 1)]
        }
    }
}

/// Wall clock, playout buffer, and whether playback has begun.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Playhead {
    pub wall_seconds: f64,
    pub buffer_seconds: f64,
    pub started: bool,
}

impl Playhead {
    pub(crate) fn initial() -> Self {
        Self { wall_seconds: 0.0, buffer_seconds: 0.0, started: false }
    }
}

/// Per-chunk accounting produced by [`advance_chunk`].
#[derive(Debug, Clone, Copy)]
pub(crate) struct ChunkStats {
    pub download_seconds: f64,
    pub rebuffer_seconds: f64,
    #[allow(dead_code)]
    pub idle_seconds: f64,
}

/// Seconds needed to move `kbits` through the piecewise-constant signal
/// starting at `start_wall`, integrating epoch by epoch.
pub(crate) fn download_duration(rate: &impl EpochRate, start_wall: f64, kbits: f64) -> f64 {
    debug_assert!(kbits > 0.0);
    let eps = rate.epoch_seconds();
    let mut epoch = (start_wall / eps).floor() as usize;
    let mut wall = start_wall;
    let mut remaining = kbits;
    loop {
        let r = rate.rate_kbps(epoch);
        debug_assert!(r > 0.0, "throughput must be positive");
        let boundary = (epoch as f64 + 1.0) * eps;
        let span = (boundary - wall).max(0.0);
        let capacity_kbits = r * span;
        if remaining <= capacity_kbits {
            wall += remaining / r;
            return wall - start_wall;
        }
        remaining -= capacity_kbits;
        wall = boundary;
        epoch += 1;
    }
}

/// Downloads one chunk and applies the player dynamics in order: the buffer
/// drains while the download runs (rebuffering when it empties), the fetched
/// chunk is appended, and — unless this was the final chunk — the player
/// idles until the buffer has room for the next chunk.
pub(crate) fn advance_chunk(
    rate: &impl EpochRate,
    head: &mut Playhead,
    chunk_kbits: f64,
    chunk_seconds: f64,
    capacity_seconds: f64,
    more_chunks: bool,
) -> ChunkStats {
    let download = download_duration(rate, head.wall_seconds, chunk_kbits);
    let mut rebuffer = 0.0;
    if head.started {
        rebuffer = (download - head.buffer_seconds).max(0.0);
        head.buffer_seconds = (head.buffer_seconds - download).max(0.0);
    }
    head.wall_seconds += download;
    head.buffer_seconds += chunk_seconds;
    head.started = true;

    let mut idle = 0.0;
    if more_chunks && head.buffer_seconds + chunk_seconds > capacity_seconds {
        idle = head.buffer_seconds + chunk_seconds - capacity_seconds;
        head.buffer_seconds -= idle;
        head.wall_seconds += idle;
    }
    debug_assert!(head.buffer_seconds >= 0.0);
    debug_assert!(!more_chunks || head.buffer_seconds <= capacity_seconds + 1e-9);

    ChunkStats { download_seconds: download, rebuffer_seconds: rebuffer, idle_seconds: idle }
}

/// Number of whole chunks the trace can cover, capped by the configured
/// session length.
pub(crate) fn playable_chunks(
    trace_duration_seconds: f64,
    chunk_seconds: f64,
    max_chunks: usize,
) -> Result<usize> {
    let fit = (trace_duration_seconds / chunk_seconds).floor() as usize;
    if fit == 0 {
        return Err(Error::Infeasible(format!(
            "trace covers {trace_duration_seconds} s, shorter than one {chunk_seconds} s chunk"
        )));
    }
    Ok(fit.min(max_chunks))
}
