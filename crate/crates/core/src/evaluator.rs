//! Ground-truth scoring of chosen configurations.
//!
//! The evaluator is the only stage allowed to read the scenario's true
//! channels. It reports per-user true rates next to the optimizer's
//! predictions and a weighted average in which non-line-of-sight users
//! count double.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::compose_channel;
use crate::error::{Error, Result};
use crate::optimizer::ConfigurationResult;
use crate::rate::achievable_rate;
use crate::seed::{rng_for, Stream};
use crate::simulator::GroundTruthScenario;
use crate::transform::dft_channel;
use crate::IrsConfiguration;

/// How the weighted average is normalized. Kept in the report because a
/// sum-of-weights mean and a per-user mean differ by a constant factor.
pub const WEIGHTING_NOTE: &str =
    "weighted mean: w=2 for non-line-of-sight users, w=1 for line-of-sight, normalized by sum of weights";

/// One user's scoring row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UserRateEntry {
    pub user: usize,
    pub true_rate: f64,
    pub predicted_rate: f64,
    pub los: bool,
}

/// Scoring summary for one scenario.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateReport {
    pub per_user: Vec<UserRateEntry>,
    /// Weighted average of the true rates of the submitted configurations.
    pub weighted_average: f64,
    /// Label → weighted average true rate of a baseline configuration set.
    pub baselines: BTreeMap<String, f64>,
    pub weighting: String,
    /// Largest and mean relative |predicted - true| / true over users.
    pub prediction_gap_max: f64,
    pub prediction_gap_mean: f64,
}

/// True achievable rate of `theta` for one user, from the scenario's ground
/// truth: `B/(K+M-1) Σ_ν log2(1 + P|h̄_θ[ν]|²/(B·N0))`.
pub fn true_rate(
    scenario: &GroundTruthScenario,
    user: usize,
    theta: &IrsConfiguration,
    power: f64,
    bandwidth: f64,
    noise_psd: f64,
) -> Result<f64> {
    if power <= 0.0 || bandwidth <= 0.0 || noise_psd <= 0.0 {
        return Err(Error::InvalidConfig(
            "power, bandwidth and noise PSD must be positive".into(),
        ));
    }
    let dims = scenario.config().dims;
    let model = scenario.effective_model(user)?;
    let composed = compose_channel(&model, theta)?;
    let response = dft_channel(&composed, &dims)?;
    let snr_scale = power / (bandwidth * noise_psd);
    Ok(achievable_rate(
        response.bins(),
        snr_scale,
        bandwidth,
        dims.block_len(),
    ))
}

/// Weighted mean of `(rate, los)` entries: `Σ w_i R_i / Σ w_i` with
/// `w = 2` for NLoS and `w = 1` for LoS users.
pub fn weighted_average_rate(entries: &[(f64, bool)]) -> Result<f64> {
    if entries.is_empty() {
        return Err(Error::Validation("cannot average zero rate entries".into()));
    }
    let mut weighted = 0.0;
    let mut weight_sum = 0.0;
    for &(rate, los) in entries {
        let w = if los { 1.0 } else { 2.0 };
        weighted += w * rate;
        weight_sum += w;
    }
    Ok(weighted / weight_sum)
}

/// Named baseline configuration sets (one configuration per user).
pub type BaselineSet = BTreeMap<String, Vec<IrsConfiguration>>;

/// The standard baselines: a seeded random configuration per user and the
/// all-ones configuration.
pub fn standard_baselines(scenario: &GroundTruthScenario) -> BaselineSet {
    let n = scenario.config().dims.elements();
    let seed = scenario.config().seed;
    let users = scenario.users().len();
    let mut set = BaselineSet::new();
    set.insert(
        "random".into(),
        (0..users)
            .map(|user| {
                IrsConfiguration::random(n, &mut rng_for(seed, Stream::BaselineConfigs { user }))
            })
            .collect(),
    );
    set.insert("all-ones".into(), vec![IrsConfiguration::all_plus(n); users]);
    set
}

/// Scores submitted configurations and baselines against the ground truth.
///
/// `results` must contain one configuration per user, in user order.
pub fn compare_report(
    scenario: &GroundTruthScenario,
    results: &[ConfigurationResult],
    baselines: &BaselineSet,
    power: f64,
    bandwidth: f64,
) -> Result<RateReport> {
    let users = scenario.users().len();
    if results.len() != users {
        return Err(Error::Validation(format!(
            "results cover {} users, scenario has {users}",
            results.len()
        )));
    }
    let noise_psd = scenario.noise_psd();

    let mut per_user = Vec::with_capacity(users);
    for (user, result) in results.iter().enumerate() {
        let rate = true_rate(scenario, user, &result.theta, power, bandwidth, noise_psd)?;
        per_user.push(UserRateEntry {
            user,
            true_rate: rate,
            predicted_rate: result.predicted_rate,
            los: scenario.users()[user].los,
        });
    }
    let entries: Vec<(f64, bool)> = per_user.iter().map(|e| (e.true_rate, e.los)).collect();
    let weighted_average = weighted_average_rate(&entries)?;

    let mut baseline_averages = BTreeMap::new();
    for (label, configs) in baselines {
        if configs.len() != users {
            return Err(Error::Validation(format!(
                "baseline '{label}' covers {} users, scenario has {users}",
                configs.len()
            )));
        }
        let mut entries = Vec::with_capacity(users);
        for (user, theta) in configs.iter().enumerate() {
            let rate = true_rate(scenario, user, theta, power, bandwidth, noise_psd)?;
            entries.push((rate, scenario.users()[user].los));
        }
        baseline_averages.insert(label.clone(), weighted_average_rate(&entries)?);
    }

    let mut gap_max = 0.0f64;
    let mut gap_sum = 0.0f64;
    for entry in &per_user {
        let gap = if entry.true_rate > 0.0 {
            (entry.predicted_rate - entry.true_rate).abs() / entry.true_rate
        } else {
            entry.predicted_rate.abs()
        };
        gap_max = gap_max.max(gap);
        gap_sum += gap;
    }

    Ok(RateReport {
        weighted_average,
        baselines: baseline_averages,
        weighting: WEIGHTING_NOTE.into(),
        prediction_gap_max: gap_max,
        prediction_gap_mean: gap_sum / users as f64,
        per_user,
    })
}

impl RateReport {
    /// Aligned-column text rendering.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>5}  {:>16}  {:>16}  {:>5}\n",
            "user", "true bits/s", "predicted bits/s", "los"
        ));
        for entry in &self.per_user {
            out.push_str(&format!(
                "{:>5}  {:>16.6e}  {:>16.6e}  {:>5}\n",
                entry.user,
                entry.true_rate,
                entry.predicted_rate,
                if entry.los { "yes" } else { "no" }
            ));
        }
        out.push_str(&format!(
            "\nweighted average: {:.6e} bits/s  ({})\n",
            self.weighted_average, self.weighting
        ));
        for (label, value) in &self.baselines {
            out.push_str(&format!("baseline {label:>10}: {value:.6e} bits/s\n"));
        }
        out.push_str(&format!(
            "prediction gap: max {:.3e}, mean {:.3e}\n",
            self.prediction_gap_max, self.prediction_gap_mean
        ));
        out
    }
}
