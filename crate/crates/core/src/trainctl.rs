//! Model-agnostic training-loop control: cosine learning-rate schedule,
//! mosaic cutoff, early stopping and best-checkpoint selection.
//!
//! Nothing here touches weights. Validation metrics are fed in from outside,
//! one epoch at a time.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How successive rounds share the cosine schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundSchedule {
    /// Every round restarts the cosine from `lr0`.
    #[default]
    Restart,
    /// One cosine spans all `rounds * epochs` epochs.
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    /// `eta_min = lr0 * lr_final_fraction`.
    pub lr_final_fraction: f64,
    /// Recorded only; no optimizer lives here.
    pub momentum: f64,
    /// Recorded only.
    pub weight_decay: f64,
    /// Recorded only; applies inside the network.
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub mosaic_cutoff: usize,
    pub rounds: usize,
    pub round_schedule: RoundSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 0.01,
            lr_final_fraction: 0.01,
            momentum: 0.9,
            weight_decay: 0.05,
            dropout: 0.2,
            epochs: 30,
            batch_size: 8,
            patience: 10,
            mosaic_cutoff: 10,
            rounds: 2,
            round_schedule: RoundSchedule::Restart,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr0 > 0.0
            && self.lr_final_fraction > 0.0
            && self.lr_final_fraction <= 1.0
            && self.epochs > 0
            && self.patience >= 1
            && self.rounds >= 1
            && self.batch_size >= 1
            && (0.0..1.0).contains(&self.dropout);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training configuration: {self:?}")))
        }
    }

    pub fn eta_min(&self) -> f64 {
        self.lr0 * self.lr_final_fraction
    }
}

fn cosine(epoch: usize, span: usize, lr0: f64, eta_min: f64) -> f64 {
    if span <= 1 {
        return lr0;
    }
    let t = epoch as f64 / (span - 1) as f64;
    eta_min + (lr0 - eta_min) * (1.0 + (PI * t).cos()) / 2.0
}

/// Learning rate for `epoch` within one round.
pub fn cosine_lr(epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(Error::Usage(format!(
            "epoch {epoch} outside 0..{}",
            cfg.epochs
        )));
    }
    Ok(cosine(epoch, cfg.epochs, cfg.lr0, cfg.eta_min()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochEntry {
    pub round: usize,
    /// Epoch index within the round.
    pub epoch: usize,
    pub lr: f64,
    pub mosaic_on: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochPlan {
    pub entries: Vec<EpochEntry>,
}

impl EpochPlan {
    /// `round,epoch,lr,mosaic_on` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,epoch,lr,mosaic_on\n");
        for e in &self.entries {
            writeln!(out, "{},{},{},{}", e.round, e.epoch, e.lr, e.mosaic_on).unwrap();
        }
        out
    }
}

/// Mosaic is on for every epoch before the final `cutoff` of a round.
pub fn mosaic_active(epoch: usize, epochs_total: usize, cutoff: usize) -> bool {
    epoch < epochs_total.saturating_sub(cutoff)
}

pub fn build_plan(cfg: &TrainConfig) -> Result<EpochPlan> {
    cfg.validate()?;
    let total = cfg.rounds * cfg.epochs;
    let entries = (0..total)
        .map(|global| {
            let (round, epoch) = (global / cfg.epochs, global % cfg.epochs);
            let lr = match cfg.round_schedule {
                RoundSchedule::Restart => cosine(epoch, cfg.epochs, cfg.lr0, cfg.eta_min()),
                RoundSchedule::Continuous => cosine(global, total, cfg.lr0, cfg.eta_min()),
            };
            EpochEntry {
                round,
                epoch,
                lr,
                mosaic_on: mosaic_active(epoch, cfg.epochs, cfg.mosaic_cutoff),
            }
        })
        .collect();
    Ok(EpochPlan { entries })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Patience-based early stopping on a metric where larger is better.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EarlyStopper {
    patience: usize,
    best_epoch: Option<usize>,
    best_metric: f64,
    since_improvement: usize,
}

/// Metric increase required to count as an improvement.
const IMPROVEMENT_EPS: f64 = 1e-12;

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience: patience.max(1),
            best_epoch: None,
            best_metric: f64::NEG_INFINITY,
            since_improvement: 0,
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }

    pub fn best_metric(&self) -> Option<f64> {
        self.best_epoch.map(|_| self.best_metric)
    }

    pub fn since_improvement(&self) -> usize {
        self.since_improvement
    }

    /// Records the validation metric of `epoch`. Equal-to-best does not
    /// reset the patience counter.
    pub fn step(&mut self, epoch: usize, metric: f64) -> Result<StopDecision> {
        if !(0.0..=1.0).contains(&metric) {
            return Err(Error::Validation(format!(
                "metric {metric} for epoch {epoch} outside [0, 1]"
            )));
        }
        if metric > self.best_metric + IMPROVEMENT_EPS {
            self.best_metric = metric;
            self.best_epoch = Some(epoch);
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        Ok(if self.since_improvement >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        })
    }
}

/// Epoch with the highest metric; the earliest one on ties.
pub fn select_checkpoint(history: &[(usize, f64)]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(epoch, metric) in history {
        match best {
            Some((_, m)) if metric <= m => {}
            _ => best = Some((epoch, metric)),
        }
    }
    best.map(|(e, _)| e)
        .ok_or_else(|| Error::Usage("checkpoint selection needs a non-empty history".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationOutcome {
    /// Epoch at which the stopper fired, if it did.
    pub stop_epoch: Option<usize>,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_metric: f64,
}

/// Replays a metric series through the stopper, halting when it fires.
pub fn simulate(patience: usize, history: &[(usize, f64)]) -> Result<SimulationOutcome> {
    let mut stopper = EarlyStopper::new(patience);
    let mut seen = Vec::new();
    let mut stop_epoch = None;
    for &(epoch, metric) in history {
        seen.push((epoch, metric));
        if stopper.step(epoch, metric)? == StopDecision::Stop {
            stop_epoch = Some(epoch);
            break;
        }
    }
    let best_epoch = select_checkpoint(&seen)?;
    Ok(SimulationOutcome {
        stop_epoch,
        epochs_run: seen.len(),
        best_epoch,
        best_metric: stopper.best_metric().unwrap_or(0.0),
    })
}

/// Reads `epoch,metric` CSV (header required).
pub fn read_metric_history<R: std::io::Read>(reader: R) -> Result<Vec<(usize, f64)>> {
    #[derive(Deserialize)]
    struct Row {
        epoch: usize,
        metric: f64,
    }
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize()
        .map(|r| r.map(|row: Row| (row.epoch, row.metric)).map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints_and_midpoint() {
        let cfg = TrainConfig::default();
        assert_eq!(cosine_lr(0, &cfg).unwrap(), 0.01);
        assert!((cosine_lr(29, &cfg).unwrap() - 0.0001).abs() < 1e-12);
        let odd = TrainConfig { epochs: 31, ..cfg.clone() };
        let mid = cosine_lr(15, &odd).unwrap();
        assert!((mid - (odd.lr0 + odd.eta_min()) / 2.0).abs() < 1e-12);
        assert!(matches!(cosine_lr(30, &cfg), Err(Error::Usage(_))));
    }

    #[test]
    fn cosine_is_non_increasing_and_bounded() {
        let cfg = TrainConfig::default();
        let lrs: Vec<f64> = (0..cfg.epochs).map(|e| cosine_lr(e, &cfg).unwrap()).collect();
        assert!(lrs.windows(2).all(|w| w[1] <= w[0]));
        assert!(lrs.iter().all(|&lr| lr >= cfg.eta_min() - 1e-15 && lr <= cfg.lr0));
    }

    #[test]
    fn stopper_increasing_never_stops() {
        let mut s = EarlyStopper::new(10);
        for e in 0..50 {
            assert_eq!(s.step(e, e as f64 / 100.0).unwrap(), StopDecision::Continue);
        }
        assert_eq!(s.best_epoch(), Some(49));
    }

    #[test]
    fn stopper_fires_patience_after_best() {
        let mut s = EarlyStopper::new(10);
        let mut stopped = None;
        for e in 0..40 {
            let metric = if e <= 5 { 0.05 * e as f64 } else { 0.25 };
            if s.step(e, metric).unwrap() == StopDecision::Stop {
                stopped = Some(e);
                break;
            }
        }
        assert_eq!(stopped, Some(15));
        assert_eq!(s.best_epoch(), Some(5));
    }

    #[test]
    fn equal_metric_does_not_reset() {
        let mut s = EarlyStopper::new(2);
        s.step(0, 0.3).unwrap();
        assert_eq!(s.step(1, 0.3).unwrap(), StopDecision::Continue);
        assert_eq!(s.step(2, 0.3).unwrap(), StopDecision::Stop);
        assert_eq!(s.best_epoch(), Some(0));
    }

    #[test]
    fn stopper_rejects_out_of_range_metric() {
        assert!(EarlyStopper::new(3).step(0, 1.5).is_err());
        assert!(EarlyStopper::new(3).step(0, f64::NAN).is_err());
    }

    #[test]
    fn checkpoint_selection() {
        assert_eq!(select_checkpoint(&[(0, 0.1), (1, 0.3), (2, 0.2)]).unwrap(), 1);
        assert_eq!(select_checkpoint(&[(0, 0.3), (1, 0.3)]).unwrap(), 0);
        assert!(select_checkpoint(&[]).is_err());
    }

    #[test]
    fn plateau_near_033_selects_the_peak() {
        let history: Vec<(usize, f64)> = [0.12, 0.21, 0.27, 0.30, 0.32, 0.33, 0.329, 0.325, 0.33, 0.328]
            .iter()
            .copied()
            .enumerate()
            .collect();
        assert_eq!(select_checkpoint(&history).unwrap(), 5);
    }

    #[test]
    fn default_plan_shape() {
        let plan = build_plan(&TrainConfig::default()).unwrap();
        assert_eq!(plan.entries.len(), 60);
        for (i, e) in plan.entries.iter().enumerate() {
            let off = (20..30).contains(&i) || (50..60).contains(&i);
            assert_eq!(e.mosaic_on, !off, "entry {i}");
        }
        assert_eq!(plan.entries[30].lr, 0.01);
        for round in plan.entries.chunks(30) {
            assert!(round.windows(2).all(|w| w[1].lr <= w[0].lr && w[1].lr > 0.0));
        }
    }

    #[test]
    fn degenerate_plans() {
        let all_mosaic = build_plan(&TrainConfig { mosaic_cutoff: 0, ..Default::default() }).unwrap();
        assert!(all_mosaic.entries.iter().all(|e| e.mosaic_on));
        let single = build_plan(&TrainConfig { rounds: 1, epochs: 1, ..Default::default() }).unwrap();
        assert_eq!(single.entries.len(), 1);
        assert_eq!(single.entries[0].lr, 0.01);
    }

    #[test]
    fn continuous_schedule_spans_all_rounds() {
        let cfg = TrainConfig { round_schedule: RoundSchedule::Continuous, ..Default::default() };
        let plan = build_plan(&cfg).unwrap();
        assert!(plan.entries.windows(2).all(|w| w[1].lr <= w[0].lr));
        assert!((plan.entries[59].lr - cfg.eta_min()).abs() < 1e-15);
    }

    #[test]
    fn simulation_reports_stop_and_best() {
        let history: Vec<(usize, f64)> = (0..30).map(|e| (e, if e <= 5 { 0.05 * e as f64 } else { 0.2 })).collect();
        let out = simulate(10, &history).unwrap();
        assert_eq!(out.stop_epoch, Some(15));
        assert_eq!(out.best_epoch, 5);
        assert_eq!(out.epochs_run, 16);
    }

    #[test]
    fn reads_metric_csv() {
        let h = read_metric_history("epoch,metric\n0,0.1\n1,0.25\n".as_bytes()).unwrap();
        assert_eq!(h, vec![(0, 0.1), (1, 0.25)]);
    }
}
