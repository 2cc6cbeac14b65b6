//! Grid-sweep calibration of ordinary-agent model parameters against an
//! empirical attitude trace, using pure-ABM runs.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abm::{
    population, simulate, AbmError, BcParams, HkParams, LorenzParams, ModelKind, ModelParams, OpinionModel,
    RaParams, SignConvention, SjParams, UpdateSchedule,
};
use crate::metrics::{bias_diversity_from_stats, deltas, AttitudeTrace, MetricError};
use crate::rng::derive_seed;
use crate::runner::RunConfig;
use crate::types::AgentId;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("grid is for {grid} but {requested} was requested")]
    KindMismatch { grid: ModelKind, requested: ModelKind },
    #[error("grid has no values for `{0}`")]
    MissingParameter(String),
    #[error("`{0}` is not a parameter of {1}")]
    UnknownParameter(String, ModelKind),
    #[error("invalid grid combination {index}: {source}")]
    InvalidCombination { index: usize, source: AbmError },
    #[error("empty grid")]
    EmptyGrid,
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("empirical target has no rounds")]
    EmptyTarget,
    #[error("no reference parameters for {0} on `{1}`")]
    NoReference(ModelKind, String),
    #[error(transparent)]
    Abm(#[from] AbmError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("grid file: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parameter names per model, in grid enumeration order (first varies slowest).
pub fn parameter_names(kind: ModelKind) -> &'static [&'static str] {
    match kind {
        ModelKind::Bc => &["alpha", "epsilon"],
        ModelKind::Hk => &["epsilon"],
        ModelKind::Ra => &["alpha", "init_uncertainty"],
        ModelKind::Sj => &["alpha", "acc_thred", "rej_thred"],
        ModelKind::Lorenz => &["alpha", "lambda", "k", "rho", "m", "credibility"],
    }
}

fn canonical(name: &str) -> &str {
    match name {
        "bc_bound" => "epsilon",
        "init_uct" => "init_uncertainty",
        "tho" => "rho",
        "boundary" => "m",
        other => other,
    }
}

fn optional(kind: ModelKind, name: &str) -> Option<f64> {
    match (kind, name) {
        (ModelKind::Lorenz, "m" | "credibility") => Some(1.0),
        _ => None,
    }
}

/// Ordered value lists per parameter. JSON form:
/// `{"kind": "bc", "alpha": [0.05, 0.1], "epsilon": [0.3]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub kind: ModelKind,
    #[serde(flatten)]
    pub values: BTreeMap<String, Vec<f64>>,
}

fn build(kind: ModelKind, v: &BTreeMap<&str, f64>) -> ModelParams {
    match kind {
        ModelKind::Bc => ModelParams::Bc(BcParams {
            alpha: v["alpha"],
            epsilon: v["epsilon"],
        }),
        ModelKind::Hk => ModelParams::Hk(HkParams { epsilon: v["epsilon"] }),
        ModelKind::Ra => ModelParams::Ra(RaParams {
            alpha: v["alpha"],
            init_uncertainty: v["init_uncertainty"],
        }),
        ModelKind::Sj => ModelParams::Sj(SjParams {
            alpha: v["alpha"],
            acc_thred: v["acc_thred"],
            rej_thred: v["rej_thred"],
        }),
        ModelKind::Lorenz => ModelParams::Lorenz(LorenzParams {
            alpha: v["alpha"],
            lambda: v["lambda"],
            k: v["k"],
            rho: v["rho"],
            boundary: v["m"],
            credibility: v["credibility"],
        }),
    }
}

fn values_of(p: &ModelParams) -> Vec<(&'static str, f64)> {
    match *p {
        ModelParams::Bc(p) => vec![("alpha", p.alpha), ("epsilon", p.epsilon)],
        ModelParams::Hk(p) => vec![("epsilon", p.epsilon)],
        ModelParams::Ra(p) => vec![("alpha", p.alpha), ("init_uncertainty", p.init_uncertainty)],
        ModelParams::Sj(p) => vec![("alpha", p.alpha), ("acc_thred", p.acc_thred), ("rej_thred", p.rej_thred)],
        ModelParams::Lorenz(p) => vec![
            ("alpha", p.alpha),
            ("lambda", p.lambda),
            ("k", p.k),
            ("rho", p.rho),
            ("m", p.boundary),
            ("credibility", p.credibility),
        ],
    }
}

impl ParameterGrid {
    pub fn new(kind: ModelKind, values: impl IntoIterator<Item = (&'static str, Vec<f64>)>) -> Self {
        ParameterGrid {
            kind,
            values: values.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CalibrationError> {
        serde_json::from_str(text).map_err(|e| CalibrationError::Parse(e.to_string()))
    }

    /// All combinations in grid order, each validated.
    pub fn combinations(&self) -> Result<Vec<ModelParams>, CalibrationError> {
        let names = parameter_names(self.kind);
        let mut lists: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for (k, v) in &self.values {
            let c = canonical(k);
            if !names.contains(&c) {
                return Err(CalibrationError::UnknownParameter(k.clone(), self.kind));
            }
            lists.insert(names.iter().find(|n| **n == c).unwrap(), v.clone());
        }
        let mut axes: Vec<(&str, Vec<f64>)> = Vec::with_capacity(names.len());
        for &n in names {
            match (lists.remove(n), optional(self.kind, n)) {
                (Some(v), _) if v.is_empty() => return Err(CalibrationError::EmptyGrid),
                (Some(v), _) => axes.push((n, v)),
                (None, Some(d)) => axes.push((n, vec![d])),
                (None, None) => return Err(CalibrationError::MissingParameter(n.to_string())),
            }
        }
        let total: usize = axes.iter().map(|a| a.1.len()).product();
        let mut out = Vec::with_capacity(total);
        for index in 0..total {
            let mut rest = index;
            let mut chosen = BTreeMap::new();
            for (name, vals) in axes.iter().rev() {
                chosen.insert(*name, vals[rest % vals.len()]);
                rest /= vals.len();
            }
            let p = build(self.kind, &chosen);
            p.validate()
                .map_err(|source| CalibrationError::InvalidCombination { index, source })?;
            out.push(p);
        }
        Ok(out)
    }
}

/// Values of the published calibration table, keyed by dataset.
pub fn reference_params(dataset: &str, kind: ModelKind) -> Result<ModelParams, CalibrationError> {
    let lorenz = |alpha, lambda, k, rho| {
        ModelParams::Lorenz(LorenzParams {
            alpha,
            lambda,
            k,
            rho,
            boundary: 1.0,
            credibility: 1.0,
        })
    };
    let p = match (dataset.to_ascii_lowercase().as_str(), kind) {
        ("metoo", ModelKind::Bc) => ModelParams::Bc(BcParams { alpha: 0.10, epsilon: 0.30 }),
        ("metoo", ModelKind::Hk) => ModelParams::Hk(HkParams { epsilon: 0.10 }),
        ("metoo", ModelKind::Ra) => ModelParams::Ra(RaParams { alpha: 0.30, init_uncertainty: 0.20 }),
        ("metoo", ModelKind::Sj) => ModelParams::Sj(SjParams { alpha: 0.15, acc_thred: 0.10, rej_thred: 0.90 }),
        ("metoo", ModelKind::Lorenz) => lorenz(0.10, 1.00, 2.00, 0.90),
        ("roe", ModelKind::Bc) => ModelParams::Bc(BcParams { alpha: 0.15, epsilon: 0.10 }),
        ("roe", ModelKind::Hk) => ModelParams::Hk(HkParams { epsilon: 0.10 }),
        ("roe", ModelKind::Ra) => ModelParams::Ra(RaParams { alpha: 0.10, init_uncertainty: 0.20 }),
        ("roe", ModelKind::Sj) => ModelParams::Sj(SjParams { alpha: 0.30, acc_thred: 0.10, rej_thred: 1.90 }),
        ("roe", ModelKind::Lorenz) => lorenz(0.10, 2.00, 10.00, 0.50),
        ("blm", ModelKind::Bc) => ModelParams::Bc(BcParams { alpha: 0.15, epsilon: 0.10 }),
        ("blm", ModelKind::Hk) => ModelParams::Hk(HkParams { epsilon: 0.10 }),
        ("blm", ModelKind::Ra) => ModelParams::Ra(RaParams { alpha: 0.10, init_uncertainty: 0.20 }),
        ("blm", ModelKind::Sj) => ModelParams::Sj(SjParams { alpha: 0.20, acc_thred: 0.50, rej_thred: 1.50 }),
        ("blm", ModelKind::Lorenz) => lorenz(0.10, 2.00, 2.00, 0.30),
        _ => return Err(CalibrationError::NoReference(kind, dataset.to_string())),
    };
    Ok(p)
}

fn step_of(name: &str) -> f64 {
    match name {
        "lambda" => 0.5,
        "k" => 1.0,
        _ => 0.05,
    }
}

/// Bracket each value with two neighbours on either side. Values leaving the
/// valid range are dropped; `m` and `credibility` stay fixed.
pub fn default_grid(center: &ModelParams) -> ParameterGrid {
    let kind = center.kind();
    let mut values = BTreeMap::new();
    for (name, v) in values_of(center) {
        let list: Vec<f64> = if matches!(name, "m" | "credibility") {
            vec![v]
        } else {
            let s = step_of(name);
            (-2..=2)
                .map(|i| ((v + f64::from(i) * s) * 1e6).round() / 1e6)
                .filter(|x| {
                    *x > 0.0 && (!matches!(name, "alpha" | "rho") || *x <= 1.0)
                })
                .collect()
        };
        values.insert(name.to_string(), list);
    }
    ParameterGrid { kind, values }
}

/// Pure-ABM target: initial population and empirical per-round
/// (mean, std) statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationTarget {
    pub initial: Vec<(AgentId, f64)>,
    pub stats: Vec<(f64, f64)>,
}

impl CalibrationTarget {
    pub fn from_trace(initial: Vec<(AgentId, f64)>, trace: &AttitudeTrace) -> Result<Self, CalibrationError> {
        Ok(CalibrationTarget {
            initial,
            stats: trace.round_stats()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub index: usize,
    pub params: ModelParams,
    pub delta_bias: f64,
    pub delta_div: f64,
    pub objective: f64,
    pub replications: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub best: ModelParams,
    pub objective: f64,
    pub table: Vec<CalibrationRow>,
}

impl CalibrationResult {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), CalibrationError> {
        let Some(first) = self.table.first() else {
            return Ok(());
        };
        let names: Vec<&str> = values_of(&first.params).into_iter().map(|(n, _)| n).collect();
        writeln!(w, "index,kind,{},delta_bias,delta_div,objective,replications", names.join(","))?;
        for r in &self.table {
            let vals: Vec<String> = values_of(&r.params).into_iter().map(|(_, v)| v.to_string()).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                r.index,
                r.params.kind(),
                vals.join(","),
                r.delta_bias,
                r.delta_div,
                r.objective,
                r.replications
            )?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ModelSettings {
    pub signs: SignConvention,
    pub schedule: UpdateSchedule,
}

pub fn calibrate(
    kind: ModelKind,
    grid: &ParameterGrid,
    target: &CalibrationTarget,
    replications: usize,
    seed: u64,
) -> Result<CalibrationResult, CalibrationError> {
    calibrate_with(kind, grid, target, replications, seed, ModelSettings::default())
}

/// Averages ΔBias and ΔDiv over replications for every combination and
/// keeps the minimum of their sum. Ties: lower ΔBias, then grid order.
pub fn calibrate_with(
    kind: ModelKind,
    grid: &ParameterGrid,
    target: &CalibrationTarget,
    replications: usize,
    seed: u64,
    settings: ModelSettings,
) -> Result<CalibrationResult, CalibrationError> {
    if grid.kind != kind {
        return Err(CalibrationError::KindMismatch {
            grid: grid.kind,
            requested: kind,
        });
    }
    if replications == 0 {
        return Err(CalibrationError::NoReplications);
    }
    if target.stats.is_empty() {
        return Err(CalibrationError::EmptyTarget);
    }
    let combos = grid.combinations()?;
    if combos.is_empty() {
        return Err(CalibrationError::EmptyGrid);
    }
    let real = bias_diversity_from_stats(&target.stats)?;
    let rounds = target.stats.len() as u32;
    let jobs: Vec<(usize, usize)> = (0..combos.len())
        .flat_map(|c| (0..replications).map(move |r| (c, r)))
        .collect();
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let params = combos[c];
            let model = OpinionModel {
                params,
                signs: settings.signs,
                schedule: settings.schedule,
            };
            let init = population(&params, &target.initial);
            let run_seed = derive_seed(&[seed, c as u64, r as u64]);
            let trace = AttitudeTrace::new(simulate(&model, &init, rounds, run_seed, 0)?);
            let sim = bias_diversity_from_stats(&trace.round_stats()?)?;
            Ok(deltas(sim, real))
        })
        .collect::<Result<_, CalibrationError>>()?;
    let mut table = Vec::with_capacity(combos.len());
    for (c, params) in combos.iter().enumerate() {
        let (mut b, mut d) = (0.0, 0.0);
        for r in 0..replications {
            let (db, dd) = results[c * replications + r];
            b += db;
            d += dd;
        }
        let n = replications as f64;
        table.push(CalibrationRow {
            index: c,
            params: *params,
            delta_bias: b / n,
            delta_div: d / n,
            objective: b / n + d / n,
            replications,
        });
    }
    let best = table
        .iter()
        .min_by(|a, b| {
            a.objective
                .total_cmp(&b.objective)
                .then(a.delta_bias.total_cmp(&b.delta_bias))
                .then(a.index.cmp(&b.index))
        })
        .unwrap();
    Ok(CalibrationResult {
        best: best.params,
        objective: best.objective,
        table,
    })
}

/// Installs calibrated ordinary-agent parameters into a hybrid run config.
pub fn apply_calibrated(params: &ModelParams, config: &RunConfig) -> Result<RunConfig, CalibrationError> {
    params.validate()?;
    if params.kind() != config.model.kind() {
        return Err(CalibrationError::KindMismatch {
            grid: params.kind(),
            requested: config.model.kind(),
        });
    }
    let mut out = config.clone();
    out.model = *params;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target() -> CalibrationTarget {
        let initial: Vec<(AgentId, f64)> = (0..200).map(|i| (AgentId(i), (i as f64 / 100.0) - 1.0)).collect();
        let model = OpinionModel::new(ModelParams::Bc(BcParams { alpha: 0.1, epsilon: 0.3 }));
        let init = population(&model.params, &initial);
        let trace = AttitudeTrace::new(simulate(&model, &init, 5, 77, 0).unwrap());
        CalibrationTarget::from_trace(initial, &trace).unwrap()
    }

    #[test]
    fn grid_enumeration_order_and_aliases() {
        let g = ParameterGrid::from_json(r#"{"kind":"bc","alpha":[0.1,0.2],"bc_bound":[0.3,0.4,0.5]}"#).unwrap();
        let c = g.combinations().unwrap();
        assert_eq!(c.len(), 6);
        assert_eq!(c[1], ModelParams::Bc(BcParams { alpha: 0.1, epsilon: 0.4 }));
        assert_eq!(c[3], ModelParams::Bc(BcParams { alpha: 0.2, epsilon: 0.3 }));
        let bad = ParameterGrid::new(ModelKind::Bc, [("alpha", vec![1.5]), ("epsilon", vec![0.3])]);
        assert!(matches!(bad.combinations(), Err(CalibrationError::InvalidCombination { index: 0, .. })));
        let missing = ParameterGrid::new(ModelKind::Sj, [("alpha", vec![0.1])]);
        assert!(matches!(missing.combinations(), Err(CalibrationError::MissingParameter(_))));
    }

    #[test]
    fn default_grid_brackets_reference() {
        let g = default_grid(&reference_params("metoo", ModelKind::Bc).unwrap());
        assert_eq!(g.values["alpha"], vec![0.05, 0.1, 0.15, 0.2]);
        assert_eq!(g.values["epsilon"], vec![0.2, 0.25, 0.3, 0.35, 0.4]);
        assert!(g.combinations().is_ok());
        for kind in ModelKind::ALL {
            for ds in ["metoo", "roe", "blm"] {
                assert!(default_grid(&reference_params(ds, kind).unwrap()).combinations().is_ok());
            }
        }
    }

    #[test]
    fn single_combination_is_returned() {
        let g = ParameterGrid::new(ModelKind::Bc, [("alpha", vec![0.2]), ("epsilon", vec![0.5])]);
        let r = calibrate(ModelKind::Bc, &g, &target(), 2, 1).unwrap();
        assert_eq!(r.best, ModelParams::Bc(BcParams { alpha: 0.2, epsilon: 0.5 }));
        assert_eq!(r.table.len(), 1);
        assert!(calibrate(ModelKind::Sj, &g, &target(), 2, 1).is_err());
        assert!(calibrate(ModelKind::Bc, &g, &target(), 0, 1).is_err());
    }

    #[test]
    fn ties_break_by_grid_order() {
        // alpha = 0 leaves everyone in place whatever epsilon is.
        let g = ParameterGrid::new(ModelKind::Bc, [("alpha", vec![0.0]), ("epsilon", vec![0.4, 0.2])]);
        let r = calibrate(ModelKind::Bc, &g, &target(), 1, 3).unwrap();
        assert_eq!(r.table[0].objective, r.table[1].objective);
        assert_eq!(r.best, ModelParams::Bc(BcParams { alpha: 0.0, epsilon: 0.4 }));
    }

    #[test]
    fn deterministic_and_best_is_minimal() {
        let g = ParameterGrid::new(ModelKind::Bc, [("alpha", vec![0.05, 0.1, 0.2]), ("epsilon", vec![0.2, 0.3])]);
        let a = calibrate(ModelKind::Bc, &g, &target(), 2, 9).unwrap();
        let b = calibrate(ModelKind::Bc, &g, &target(), 2, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.table.iter().all(|r| r.objective >= a.objective));
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("index,kind,alpha,epsilon,delta_bias"));
        assert_eq!(text.lines().count(), 7);
    }

    #[test]
    fn apply_calibrated_contract() {
        let cfg = RunConfig::default();
        let bc = reference_params("metoo", ModelKind::Bc).unwrap();
        let once = apply_calibrated(&bc, &cfg).unwrap();
        assert_eq!(once.model, bc);
        assert_eq!(once.driver, cfg.driver);
        assert_eq!(apply_calibrated(&bc, &once).unwrap(), once);
        let sj = reference_params("metoo", ModelKind::Sj).unwrap();
        assert!(matches!(apply_calibrated(&sj, &cfg), Err(CalibrationError::KindMismatch { .. })));
    }
}
