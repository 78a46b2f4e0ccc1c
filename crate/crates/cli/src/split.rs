//! Deterministic train/test session split: sort by id, shuffle with a
//! seeded generator, cut at the configured fraction.

use clap::ValueEnum;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use throughcast::trace::SessionTrace;

/// Which side of the split a command should operate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    Train,
    Test,
    All,
}

/// Splits sessions into (train, test).
///
/// Sessions are ordered by id, shuffled by a generator seeded only with
/// `seed`, and the first `round(fraction * n)` go to the training side;
/// each side is then re-sorted by id. The same inputs always produce the
/// same split regardless of the incoming order.
pub fn split_sessions(
    mut traces: Vec<SessionTrace>,
    fraction: f64,
    seed: u64,
) -> (Vec<SessionTrace>, Vec<SessionTrace>) {
    traces.sort_by(|a, b| a.session_id().cmp(b.session_id()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    traces.shuffle(&mut rng);
    let cut = ((traces.len() as f64) * fraction).round() as usize;
    let cut = cut.min(traces.len());
    let test = traces.split_off(cut);
    let mut train = traces;
    train.sort_by(|a, b| a.session_id().cmp(b.session_id()));
    let mut test = test;
    test.sort_by(|a, b| a.session_id().cmp(b.session_id()));
    (train, test)
}

/// Applies `choice` to the split.
pub fn select_split(
    traces: Vec<SessionTrace>,
    choice: SplitChoice,
    fraction: f64,
    seed: u64,
) -> Vec<SessionTrace> {
    match choice {
        SplitChoice::All => {
            let mut traces = traces;
            traces.sort_by(|a, b| a.session_id().cmp(b.session_id()));
            traces
        }
        SplitChoice::Train => split_sessions(traces, fraction, seed).0,
        SplitChoice::Test => split_sessions(traces, fraction, seed).1,
    }
}
