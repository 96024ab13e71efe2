//! Tournament aggregation of pairwise separators.

use rayon::prelude::*;

use crate::data::ExampleSource;
use crate::error::{Error, Result};
use crate::model::{label_pairs, PseudoMlcWeights};

use super::config::TrainConfig;
use super::pairwise::{pairwise_init_train, pairwise_local3_train, pairwise_localk_train, GeometryGuess, PairOutput};
use super::{GeometryMode, LearnerKind};

#[derive(Debug, Clone, PartialEq)]
pub struct PairResult {
    pub i: u32,
    pub j: u32,
    pub output: PairOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateResult {
    pub weights: PseudoMlcWeights,
    pub pairs: Vec<PairResult>,
    /// Accuracy and confidence each pair was trained with.
    pub pair_epsilon: f64,
    pub pair_delta: f64,
}

impl AggregateResult {
    pub fn samples_drawn(&self) -> u64 {
        self.pairs.iter().map(|p| p.output.trace.samples_drawn).sum()
    }
}

/// Trains every pair `i < j` with accuracy `ε/k²` and confidence `δ/k²`
/// and assembles the pseudo-MLC. Pair `p` (in [`label_pairs`] order) uses
/// the source fork and configuration seed derived from `p + 1`, so the
/// result does not depend on how pairs are scheduled across threads.
pub fn aggregate_train<S>(source: &S, cfg: &TrainConfig, kind: &LearnerKind) -> Result<AggregateResult>
where
    S: ExampleSource + Sync,
{
    cfg.validate()?;
    let k = source.num_classes();
    let pairs: Vec<(u32, u32)> = label_pairs(k).collect();
    match kind {
        LearnerKind::Local3 if k != 3 => {
            return Err(Error::PreconditionViolated(format!(
                "the three-class localized learner needs k = 3, got {k}"
            )));
        }
        LearnerKind::Localk(GeometryMode::Oracle(table)) if table.len() != pairs.len() => {
            return Err(Error::InvalidParameter(format!(
                "oracle geometry lists {} pairs, k = {k} has {}",
                table.len(),
                pairs.len()
            )));
        }
        _ => {}
    }
    let k2 = (k * k) as f64;
    let pair_cfg = cfg.with_accuracy(cfg.epsilon / k2, cfg.delta / k2);
    let results = pairs
        .par_iter()
        .enumerate()
        .map(|(p, &(i, j))| {
            let stream = p as u64 + 1;
            let mut fork = source.fork(stream);
            let cfg = pair_cfg.with_seed(cfg.seed.derive(stream));
            let output = match kind {
                LearnerKind::Init => pairwise_init_train(&mut fork, i, j, &cfg),
                LearnerKind::Local3 => pairwise_local3_train(&mut fork, i, j, &cfg),
                LearnerKind::Localk(mode) => {
                    let guess = match mode {
                        GeometryMode::Oracle(table) => GeometryGuess::Oracle {
                            t_hat: table[p].0,
                            phi_hat: table[p].1,
                        },
                        GeometryMode::Grid => GeometryGuess::Grid,
                    };
                    pairwise_localk_train(&mut fork, i, j, &cfg, guess)
                }
            };
            output.map(|output| PairResult { i, j, output }).map_err(|e| e.in_pair(i, j))
        })
        .collect::<Vec<_>>();
    let pairs = results.into_iter().collect::<Result<Vec<_>>>()?;
    let weights = PseudoMlcWeights::new(k, pairs.iter().map(|p| p.output.w.clone()).collect())?;
    Ok(AggregateResult {
        weights,
        pairs,
        pair_epsilon: pair_cfg.epsilon,
        pair_delta: pair_cfg.delta,
    })
}
