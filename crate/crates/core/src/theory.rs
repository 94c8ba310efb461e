//! Closed-form performance predictions for the hyperparameter and rate estimators.
//!
//! Moments of `λ̂_j` conditional on `λ_j` are low-order Taylor approximations
//! (second order for means, first order for variances) and are labelled as
//! such in every report.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::model::HyperParams;

/// Mean and variance of an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
}

impl Moments {
    pub fn rmse(&self, truth: f64) -> Result<f64> {
        rmse(self.mean, self.var, truth)
    }
}

/// Whether the conditioned node contributes to the consensus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Conditioning {
    #[default]
    Excluded,
    Included,
}

/// Inputs to the conditional-moment predictions for a target node `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub hp: HyperParams,
    pub sample_sizes: Vec<u64>,
    /// 0-based target node.
    pub target: usize,
    pub lambda_j: f64,
    #[serde(default)]
    pub conditioning: Conditioning,
}

impl TheoryInputs {
    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        check_sizes(&self.sample_sizes)?;
        if self.target >= self.sample_sizes.len() {
            return Err(Error::InvalidParameter(format!(
                "target node {} outside 1..={}",
                self.target + 1,
                self.sample_sizes.len()
            )));
        }
        require_positive("lambda_j", self.lambda_j)
    }

    pub fn n_j(&self) -> f64 {
        self.sample_sizes[self.target] as f64
    }

    /// Sizes of the nodes whose data enter `b̂^hom`.
    pub fn participating_sizes(&self) -> Vec<u64> {
        match self.conditioning {
            Conditioning::Included => self.sample_sizes.clone(),
            Conditioning::Excluded => self
                .sample_sizes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != self.target)
                .map(|(_, &n)| n)
                .collect(),
        }
    }
}

fn check_sizes(sizes: &[u64]) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::InvalidParameter("at least one node is required".into()));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidParameter("sample sizes must be ≥ 1".into()));
    }
    Ok(())
}

/// Cramér-Rao bound on unbiased estimators of `b`: `(b/a) / Σ n_i/(n_i b + 1)`.
pub fn crb(hp: &HyperParams, sizes: &[u64]) -> Result<f64> {
    hp.validate()?;
    check_sizes(sizes)?;
    let info: f64 = sizes.iter().map(|&n| n as f64 / (n as f64 * hp.b + 1.0)).sum();
    Ok(hp.b / hp.a / info)
}

/// Upper envelope `(b/a)(n_max b + 1)/N` of the bound.
pub fn crb_upper(hp: &HyperParams, n_max: u64, nodes: usize) -> f64 {
    hp.b / hp.a * (n_max as f64 * hp.b + 1.0) / nodes as f64
}

/// Variance of `b̂^hom = σ/(a n)`: `b/(a n) + b²/(a n²) Σ n_i²`.
pub fn var_bhom(hp: &HyperParams, sizes: &[u64]) -> Result<f64> {
    hp.validate()?;
    check_sizes(sizes)?;
    let n: f64 = sizes.iter().map(|&x| x as f64).sum();
    let sq: f64 = sizes.iter().map(|&x| (x as f64).powi(2)).sum();
    Ok(hp.b / (hp.a * n) + hp.b * hp.b / (hp.a * n * n) * sq)
}

/// Variance of the local estimate `b̂_i(t)` whose mixing weights are row `i` of `Φ(t)`:
/// `(b/a) Σ φ² n / (Σ φ n)² + (b²/a) Σ φ² n² / (Σ φ n)²`.
pub fn var_bhom_transient(hp: &HyperParams, sizes: &[u64], phi_row: &[f64]) -> Result<f64> {
    hp.validate()?;
    check_sizes(sizes)?;
    if phi_row.len() != sizes.len() {
        return Err(Error::DimensionMismatch {
            expected: sizes.len(),
            found: phi_row.len(),
        });
    }
    let (mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0);
    for (&phi, &n) in phi_row.iter().zip(sizes) {
        let n = n as f64;
        s1 += phi * n;
        s2 += phi * phi * n;
        s3 += phi * phi * n * n;
    }
    if s1 <= 0.0 {
        return Err(Error::DegenerateData("Σ φ_ik n_k vanishes".into()));
    }
    let d = s1 * s1;
    Ok(hp.b / hp.a * s2 / d + hp.b * hp.b / hp.a * s3 / d)
}

/// Ergodicity bound `b (1 + 2 b n_max) / (μ a) · δ` on `|VAR[b̂_i(t)] − VAR[b̂^hom]|`.
pub fn var_bhom_bound(hp: &HyperParams, n_max: u64, mu: f64, delta: f64) -> Result<f64> {
    hp.validate()?;
    require_positive("mu", mu)?;
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            domain: "[0, 1]",
        });
    }
    Ok(hp.b * (1.0 + 2.0 * hp.b * n_max as f64) / (mu * hp.a) * delta)
}

/// Whether `|var_t − var_hom| ≤ bound`, with a roundoff slack of a few ulps of `var_hom`
/// since `δ` can underflow to zero before the variances agree bit for bit.
pub fn within_bound(var_t: f64, var_hom: f64, bound: f64) -> bool {
    (var_t - var_hom).abs() <= bound + 64.0 * f64::EPSILON * var_hom.abs()
}

/// Asymptotic conditional moments of the Empirical Bayes estimate at node `j`:
/// mean `b/(1+n_j b)(a + n_j λ_j)`, variance `(b/(1+n_j b))² n_j λ_j`.
pub fn eb_asymptotic_moments(inputs: &TheoryInputs) -> Result<Moments> {
    inputs.validate()?;
    let (a, b) = (inputs.hp.a, inputs.hp.b);
    let (n, l) = (inputs.n_j(), inputs.lambda_j);
    let x = b / (1.0 + n * b);
    Ok(Moments {
        mean: x * (a + n * l),
        var: x * x * n * l,
    })
}

/// Transient conditional moments of the ad-hoc estimate at node `j` given
/// `VAR[b̂_j(t)] = var_b`.
///
/// The variance's second coefficient uses `2 n_j/(1+n_j b)³` as published,
/// which agrees with the first-order factor `1/(1+n_j b)²` only at `n_j b = 1`.
pub fn adhoc_transient_moments(inputs: &TheoryInputs, var_b: f64) -> Result<Moments> {
    inputs.validate()?;
    if var_b.is_nan() || var_b < 0.0 {
        return Err(Error::Domain {
            name: "var_b",
            value: var_b,
            domain: "[0, ∞)",
        });
    }
    let (a, b) = (inputs.hp.a, inputs.hp.b);
    let (n, l) = (inputs.n_j(), inputs.lambda_j);
    let c = 1.0 + n * b;
    let x = b / c - n / c.powi(3) * var_b;
    let k = 2.0 * n / c.powi(3);
    let y = a + n * l;
    Ok(Moments {
        mean: y * x,
        var: x * x * n * l + k * k * var_b * (y * y + n * l),
    })
}

/// Conditional mean of `b̂_j(t)` when node `j` participates:
/// `b − (φ_jj n_j / η_j)(b − λ_j/a)`.
pub fn exact_conditional_mean_included(inputs: &TheoryInputs, phi_jj: f64, eta_j: f64) -> Result<f64> {
    inputs.validate()?;
    require_positive("eta_j", eta_j)?;
    let (a, b) = (inputs.hp.a, inputs.hp.b);
    Ok(b - phi_jj * inputs.n_j() / eta_j * (b - inputs.lambda_j / a))
}

/// Ad-hoc mean with the participation shift: the Taylor mean re-centred on
/// `m = E[b̂_j | λ_j]` instead of `b`. Variance is left as in the excluded case.
pub fn adhoc_included_moments(inputs: &TheoryInputs, var_b: f64, cond_mean_b: f64) -> Result<Moments> {
    let base = adhoc_transient_moments(inputs, var_b)?;
    require_positive("conditional mean of b", cond_mean_b)?;
    let n = inputs.n_j();
    let c = 1.0 + n * cond_mean_b;
    let x = cond_mean_b / c - n / c.powi(3) * var_b;
    Ok(Moments {
        mean: (inputs.hp.a + n * inputs.lambda_j) * x,
        var: base.var,
    })
}

/// Root mean square error `√(var + (mean − truth)²)`.
pub fn rmse(mean: f64, var: f64, truth: f64) -> Result<f64> {
    if var.is_nan() || var < 0.0 {
        return Err(Error::Domain {
            name: "var",
            value: var,
            domain: "[0, ∞)",
        });
    }
    Ok((var + (mean - truth).powi(2)).sqrt())
}

/// Closed-form summary for one configuration and target node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub approximation: &'static str,
    pub crb: f64,
    pub crb_upper: f64,
    pub var_bhom: f64,
    /// `VAR[b̂_j(t)]` along a realized `Φ(t)`, when supplied.
    pub var_bhom_t: Option<Vec<f64>>,
    pub decentralized: Moments,
    pub eb_asymptotic: Moments,
    pub adhoc_steady: Moments,
    pub adhoc_transient: Option<Vec<Moments>>,
    pub rmse_decentralized: f64,
    pub rmse_eb_asymptotic: f64,
    pub rmse_adhoc_steady: f64,
    /// RMSEs divided by the decentralized RMSE `√(λ_j / n_j)`.
    pub normalized_eb_asymptotic: f64,
    pub normalized_adhoc_steady: f64,
}

/// Builds a [`TheoryReport`]. `phi_rows`, if given, are the target's rows of
/// `Φ(t)` for consecutive `t`.
pub fn theory_report(inputs: &TheoryInputs, phi_rows: Option<&[Vec<f64>]>) -> Result<TheoryReport> {
    inputs.validate()?;
    let hp = &inputs.hp;
    let all = &inputs.sample_sizes;
    let part = inputs.participating_sizes();
    let var_b = if part.is_empty() {
        return Err(Error::InvalidParameter("no participating nodes".into()));
    } else {
        var_bhom(hp, &part)?
    };
    let n_max = *all.iter().max().expect("validated non-empty");
    let (n_j, l) = (inputs.n_j(), inputs.lambda_j);

    let decentralized = Moments { mean: l, var: l / n_j };
    let eb = eb_asymptotic_moments(inputs)?;
    let adhoc = adhoc_transient_moments(inputs, var_b)?;

    let (var_t, adhoc_t) = match phi_rows {
        None => (None, None),
        Some(rows) => {
            let mut vs = Vec::with_capacity(rows.len());
            let mut ms = Vec::with_capacity(rows.len());
            for row in rows {
                let (sizes, phi): (Vec<u64>, Vec<f64>) = match inputs.conditioning {
                    Conditioning::Included => (all.clone(), row.clone()),
                    Conditioning::Excluded => all
                        .iter()
                        .zip(row)
                        .enumerate()
                        .filter(|&(k, _)| k != inputs.target)
                        .map(|(_, (&n, &p))| (n, p))
                        .unzip(),
                };
                let v = var_bhom_transient(hp, &sizes, &phi)?;
                vs.push(v);
                ms.push(adhoc_transient_moments(inputs, v)?);
            }
            (Some(vs), Some(ms))
        }
    };

    let r_dec = decentralized.rmse(l)?;
    let r_eb = eb.rmse(l)?;
    let r_ad = adhoc.rmse(l)?;
    Ok(TheoryReport {
        approximation: "second-order mean, first-order variance",
        crb: crb(hp, &part)?,
        crb_upper: crb_upper(hp, n_max, part.len()),
        var_bhom: var_b,
        var_bhom_t: var_t,
        decentralized,
        eb_asymptotic: eb,
        adhoc_steady: adhoc,
        adhoc_transient: adhoc_t,
        rmse_decentralized: r_dec,
        rmse_eb_asymptotic: r_eb,
        rmse_adhoc_steady: r_ad,
        normalized_eb_asymptotic: r_eb / r_dec,
        normalized_adhoc_steady: r_ad / r_dec,
    })
}
