//! Lognormal regional damage with phase-specific spatial effects and a
//! per-storm severity effect, plus the sequential density used to split an
//! observed storm total across the locations it hit.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::count::{EnsoCalendar, Phase};
use crate::data::StormRecord;
use crate::error::{Error, Result};
use crate::lognormal::{log_pdf, lognormal_sum_match_with, LognormalParams, MatchOptions};
use crate::mcar::EffectRows;
use crate::path::{sigma_from_values, sigma_names, sigma_values};

#[derive(Debug, Clone, PartialEq)]
pub struct DamageParams {
    /// Phase intercepts on the log-dollar scale.
    pub intercepts: [f64; 3],
    pub effects: EffectRows,
    /// Log-damage variance `sigma^2`.
    pub sigma2: f64,
    /// Severity variance `sigma_zeta^2`.
    pub severity_var: f64,
    pub sigma: Matrix3<f64>,
}

impl DamageParams {
    pub fn new(n_locations: usize, intercepts: [f64; 3], sigma2: f64, severity_var: f64) -> Self {
        Self {
            intercepts,
            effects: std::array::from_fn(|_| vec![0.0; n_locations]),
            sigma2,
            severity_var,
            sigma: Matrix3::identity(),
        }
    }

    pub fn n_locations(&self) -> usize {
        self.effects[0].len()
    }

    /// Log-scale location of damage at `s` before the severity effect.
    pub fn location_mu(&self, phase: Phase, s: usize) -> f64 {
        let k = phase.index();
        self.intercepts[k] + self.effects[k][s]
    }

    pub fn component(&self, phase: Phase, s: usize, severity: f64) -> LognormalParams {
        LognormalParams::new(self.location_mu(phase, s) + severity, self.sigma2)
    }

    /// Names matching [`DamageParams::to_vec`].
    pub fn parameter_names(locations: &[String]) -> Vec<String> {
        let mut names: Vec<String> = Phase::ALL.iter().map(|p| format!("xi0_{p}")).collect();
        names.push("sigma2".into());
        names.push("sigma2_zeta".into());
        names.extend(sigma_names("sigma_xi"));
        for phase in Phase::ALL {
            names.extend(locations.iter().map(|l| format!("xi_{phase}_{l}")));
        }
        names
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut out = self.intercepts.to_vec();
        out.push(self.sigma2);
        out.push(self.severity_var);
        out.extend(sigma_values(&self.sigma));
        for row in &self.effects {
            out.extend_from_slice(row);
        }
        out
    }

    pub fn from_slice(values: &[f64], n_locations: usize) -> Result<Self> {
        if values.len() != 11 + 3 * n_locations {
            return Err(Error::InvalidArgument(format!(
                "{} values do not form a damage parameter vector for {n_locations} locations",
                values.len()
            )));
        }
        let mut params = Self::new(
            n_locations,
            [values[0], values[1], values[2]],
            values[3],
            values[4],
        );
        params.sigma = sigma_from_values(&values[5..11]);
        for k in 0..3 {
            let start = 11 + k * n_locations;
            params.effects[k].copy_from_slice(&values[start..start + n_locations]);
        }
        Ok(params)
    }
}

/// Unobserved per-storm quantities of the damage model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StormLatents {
    pub severity: f64,
    /// Damage per hit location, ascending location order, summing to the total.
    pub location_damages: Vec<f64>,
}

impl StormLatents {
    /// Checks positivity and the sum constraint against `total`.
    pub fn check(&self, total: f64) -> Result<()> {
        if let Some(&bad) = self.location_damages.iter().find(|&&v| !(v > 0.0)) {
            return Err(Error::NonPositiveDamage(bad));
        }
        let sum: f64 = self.location_damages.iter().sum();
        if (sum - total).abs() > 1e-9 * total.abs() {
            return Err(Error::SimplexViolation);
        }
        Ok(())
    }
}

/// Lognormal log-likelihood of the location damages held in `latents`.
pub fn damage_log_likelihood(
    storms: &[StormRecord],
    latents: &[StormLatents],
    params: &DamageParams,
    calendar: &EnsoCalendar,
) -> Result<f64> {
    if storms.len() != latents.len() {
        return Err(Error::InvalidArgument(format!(
            "{} storms but {} latent records",
            storms.len(),
            latents.len()
        )));
    }
    let mut total = 0.0;
    for (storm, latent) in storms.iter().zip(latents) {
        let phase = calendar.phase(storm.year())?;
        let members = storm.path.members();
        if latent.location_damages.len() != members.len() {
            return Err(Error::InvalidStorm {
                storm: storm.id.clone(),
                message: "latent damages do not match the path".into(),
            });
        }
        for (&s, &y) in members.iter().zip(&latent.location_damages) {
            if !(y > 0.0) {
                return Err(Error::NonPositiveDamage(y));
            }
            total += log_pdf(y, params.location_mu(phase, s) + latent.severity, params.sigma2);
        }
    }
    Ok(total)
}

/// Matched lognormals for the tail sums: entry `m` approximates the sum of
/// `components[m + 1..]`. The last entry is the final component itself.
pub fn tail_approximations(
    components: &[LognormalParams],
    options: &MatchOptions,
) -> Result<Vec<LognormalParams>> {
    let m = components.len();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "a decomposition needs at least two components".into(),
        ));
    }
    (1..m)
        .map(|start| {
            let rest = &components[start..];
            if rest.len() == 1 {
                Ok(rest[0])
            } else {
                lognormal_sum_match_with(rest, options).map(|r| r.params)
            }
        })
        .collect()
}

/// Log-density of the first `M - 1` location damages given the storm total,
/// as the product over `m` of the own lognormal term and the matched tail
/// term evaluated at what remains.
pub fn latent_decomposition_log_density(
    partial: &[f64],
    total: f64,
    components: &[LognormalParams],
) -> Result<f64> {
    let tails = tail_approximations(components, &MatchOptions::default())?;
    latent_decomposition_log_density_with(partial, total, components, &tails)
}

/// As [`latent_decomposition_log_density`] with precomputed tail approximations.
pub fn latent_decomposition_log_density_with(
    partial: &[f64],
    total: f64,
    components: &[LognormalParams],
    tails: &[LognormalParams],
) -> Result<f64> {
    let m = components.len();
    if partial.len() + 1 != m || tails.len() + 1 != m {
        return Err(Error::InvalidArgument(format!(
            "{} partial damages and {} tails for {m} components",
            partial.len(),
            tails.len()
        )));
    }
    let mut remaining = total;
    let mut density = 0.0;
    for ((&y, own), tail) in partial.iter().zip(components).zip(tails) {
        remaining -= y;
        if !(y > 0.0) || !(remaining > 0.0) {
            return Err(Error::SimplexViolation);
        }
        density += own.log_pdf(y) + tail.log_pdf(remaining);
    }
    Ok(density)
}
