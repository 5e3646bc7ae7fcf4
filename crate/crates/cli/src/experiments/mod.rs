//! One function per CLI subcommand. Each returns a [`Report`] and never
//! touches the filesystem; writing is left to the caller.

mod calibrate;
mod fig2;
mod fig3;
mod fig4;
mod pipeline;

pub use calibrate::run_calibrate;
pub use fig2::run_fig2;
pub use fig3::run_fig3;
pub use fig4::run_fig4;
pub use pipeline::{run_e2e, run_pipeline, run_table1, BlockResult, PipelineResult, PipelineStatus};

use dmcv::protocol::{run_protocol, ProtocolParams, TrialRecord};
use dmcv::rng::StreamSeed;

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::Report;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] dmcv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Fig2,
    Fig3,
    Fig4,
    Table1,
    E2e,
    Calibrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fig2 => "fig2",
            Command::Fig3 => "fig3",
            Command::Fig4 => "fig4",
            Command::Table1 => "table1",
            Command::E2e => "e2e",
            Command::Calibrate => "calibrate",
        }
    }
}

/// A report plus whether post-processing produced matching keys.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub reconciliation_failed: bool,
}

pub fn run(command: Command, config: &ExperimentConfig) -> Result<Outcome, RunError> {
    config.validate()?;
    let plain = |report| Outcome {
        report,
        reconciliation_failed: false,
    };
    Ok(match command {
        Command::Fig2 => plain(run_fig2(config)?),
        Command::Fig3 => plain(run_fig3(config)?),
        Command::Fig4 => plain(run_fig4(config)?),
        Command::Calibrate => plain(run_calibrate(config)?),
        Command::Table1 => {
            let (report, result) = run_table1(config)?;
            Outcome {
                report,
                reconciliation_failed: result.status == PipelineStatus::Failed,
            }
        }
        Command::E2e => {
            let (report, result) = run_e2e(config)?;
            Outcome {
                report,
                reconciliation_failed: result.status == PipelineStatus::Failed,
            }
        }
    })
}

/// Independent root seed for each experiment, derived from the config seed.
pub(crate) fn experiment_seed(config: &ExperimentConfig, command: Command) -> StreamSeed {
    StreamSeed(config.protocol.seed).child(command as u64)
}

/// Runs enough pulses to collect `n_sifted` basis-matched records. Returns
/// the first `n_sifted` matched records and every mismatched record from
/// the same run.
pub(crate) fn collect_sifted(params: &ProtocolParams, n_sifted: usize) -> dmcv::Result<(Vec<TrialRecord>, Vec<TrialRecord>)> {
    let mut n_pulses = 2 * n_sifted + 8 * ((2 * n_sifted) as f64).sqrt() as usize + 16;
    loop {
        let records = run_protocol(&ProtocolParams { n_pulses, ..*params })?;
        let (mut matched, unmatched): (Vec<_>, Vec<_>) =
            records.into_iter().partition(|r| r.alice_basis == r.bob_basis);
        if matched.len() >= n_sifted {
            matched.truncate(n_sifted);
            return Ok((matched, unmatched));
        }
        n_pulses += n_pulses / 2;
    }
}
