//! Closed-form Normal-Inverse-Gamma machinery: the (χ, n) natural-statistics
//! bijection, conjugate posterior blending, NIG differential entropy, the
//! Bayesian SDF loss and its analytic gradients with respect to the raw grid
//! parameters (evidence logit and second-moment pre-activation).

use crate::error::{Error, Result};
use crate::special::{digamma, ln_gamma, trigamma};
use crate::{sigmoid, softplus};

/// Minimum allowed central second moment, keeps the implied beta positive.
pub const EPS_VAR: f64 = 1e-9;
/// Additive floor on the softplus-rectified second moment tau.
pub const EPS_TAU: f64 = 1e-6;

const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// NIG parameters (mu0, lambda, alpha, beta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NigParams {
    pub mu0: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NigParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::Domain(format!(
                "NIG parameters need lambda, alpha, beta > 0, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Natural-form sufficient statistics: first/second moment and evidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaturalStats {
    pub chi1: f64,
    pub chi2: f64,
    pub n: f64,
}

impl NaturalStats {
    pub fn new(chi1: f64, chi2: f64, n: f64) -> Self {
        Self { chi1, chi2, n }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n > 0.0) {
            return Err(Error::Domain(format!("evidence must be positive, got n={}", self.n)));
        }
        if self.chi2 - self.chi1 * self.chi1 < EPS_VAR {
            return Err(Error::Domain(format!(
                "second central moment {} below {EPS_VAR}",
                self.chi2 - self.chi1 * self.chi1
            )));
        }
        Ok(())
    }
}

/// Loss configuration: entropy-regularizer weight and truncation distance.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    pub gamma: f64,
    pub tr: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { gamma: 1e-4, tr: 0.10 }
    }
}

/// Hyperparameters of the evidence / second-moment parameterization.
#[derive(Debug, Clone, Copy)]
pub struct UncertaintyHyper {
    /// Evidence scale N_S; evidence is n_i = N_S * sigmoid(rho_raw).
    pub evidence_scale: f64,
    /// Fixed prior natural statistics.
    pub prior: NaturalStats,
}

impl Default for UncertaintyHyper {
    fn default() -> Self {
        Self {
            evidence_scale: 15f64.exp(),
            prior: NaturalStats::new(0.0, 3.0, 1.0),
        }
    }
}

/// (chi1, chi2, n) -> (mu0, lambda, alpha, beta) under n = lambda = 2 alpha.
pub fn natural_to_nig(s: NaturalStats) -> Result<NigParams> {
    s.validate()?;
    let alpha = 0.5 * s.n;
    Ok(NigParams {
        mu0: s.chi1,
        lambda: s.n,
        alpha,
        beta: alpha * (s.chi2 - s.chi1 * s.chi1),
    })
}

/// Inverse of [`natural_to_nig`]. Only meaningful for NIG parameters on the
/// n = lambda = 2 alpha slice; uses n = lambda.
pub fn nig_to_natural(m: NigParams) -> Result<NaturalStats> {
    m.validate()?;
    Ok(NaturalStats {
        chi1: m.mu0,
        chi2: m.mu0 * m.mu0 + m.beta / m.alpha,
        n: m.lambda,
    })
}

/// Evidence-weighted blend of sufficient statistics (the conjugate update).
pub fn posterior_update(prior: NaturalStats, pseudo: NaturalStats) -> Result<NaturalStats> {
    prior.validate()?;
    if pseudo.n < 0.0 {
        return Err(Error::Domain(format!("pseudo evidence must be >= 0, got {}", pseudo.n)));
    }
    let n = prior.n + pseudo.n;
    Ok(NaturalStats {
        chi1: (prior.n * prior.chi1 + pseudo.n * pseudo.chi1) / n,
        chi2: (prior.n * prior.chi2 + pseudo.n * pseudo.chi2) / n,
        n,
    })
}

/// Differential entropy of the NIG in nats. May be negative.
pub fn nig_entropy(m: NigParams) -> f64 {
    HALF_LN_TWO_PI + 1.5 * m.beta.ln() + ln_gamma(m.alpha) - 0.5 * m.lambda.ln()
        - (m.alpha + 1.5) * digamma(m.alpha)
        + m.alpha
        + 0.5
}

/// Expected Gaussian NLL under the NIG minus the entropy regularizer.
pub fn evidential_loss(s_gt: f64, m: NigParams, cfg: &LossConfig) -> Result<f64> {
    m.validate()?;
    let r = s_gt - m.mu0;
    let nll = 0.5
        * (m.alpha / m.beta * r * r + 1.0 / m.lambda - digamma(m.alpha)
            + (2.0 * std::f64::consts::PI * m.beta).ln());
    Ok(nll - cfg.gamma * nig_entropy(m))
}

/// Loss and analytic gradients with respect to the raw grid values.
///
/// The chain is: rho_raw -> n_i, tau_raw -> tau_i, pseudo stats
/// (s_i, s_i^2 + tau_i, n_i), conjugate blend with `prior`, bijection to NIG,
/// then the Bayesian loss. `s_i` is held constant; nothing flows into it.
pub fn loss_and_grad(
    s_gt: f64,
    prior: NaturalStats,
    s_i: f64,
    rho_raw: f64,
    tau_raw: f64,
    hyper: &UncertaintyHyper,
    cfg: &LossConfig,
) -> Result<(f64, f64, f64)> {
    let sig = sigmoid(rho_raw);
    let n_i = hyper.evidence_scale * sig;
    let tau_sig = sigmoid(tau_raw);
    let tau_i = softplus(tau_raw) + EPS_TAU;

    let pseudo = NaturalStats::new(s_i, s_i * s_i + tau_i, n_i);
    let post = posterior_update(prior, pseudo)?;
    let var = post.chi2 - post.chi1 * post.chi1;
    if var <= 0.0 {
        return Err(Error::NonFinite { what: "posterior central moment", value: var });
    }

    let n = post.n;
    let mu0 = post.chi1;
    let lambda = n;
    let alpha = 0.5 * n;
    let beta = alpha * var;

    let psi = digamma(alpha);
    let psi1 = trigamma(alpha);
    let r = s_gt - mu0;

    let loss = 0.5
        * (alpha / beta * r * r + 1.0 / lambda - psi
            + (2.0 * std::f64::consts::PI * beta).ln())
        - cfg.gamma
            * (HALF_LN_TWO_PI + 1.5 * beta.ln() + ln_gamma(alpha) - 0.5 * lambda.ln()
                - (alpha + 1.5) * psi
                + alpha
                + 0.5);
    if !loss.is_finite() {
        return Err(Error::NonFinite { what: "loss", value: loss });
    }

    // Partials of the loss in (mu0, lambda, alpha, beta).
    let dl_dmu0 = -(alpha / beta) * r - cfg.gamma * 0.0;
    let dl_dlambda = -0.5 / (lambda * lambda) + cfg.gamma * 0.5 / lambda;
    let dl_dalpha = 0.5 * (r * r / beta - psi1) - cfg.gamma * (1.0 - (alpha + 1.5) * psi1);
    let dl_dbeta = 0.5 * (1.0 / beta - alpha / (beta * beta) * r * r) - cfg.gamma * 1.5 / beta;

    // NIG parameters in terms of (chi1, chi2, n).
    let dbeta_dchi1 = -n * post.chi1;
    let dbeta_dchi2 = 0.5 * n;
    let dbeta_dn = 0.5 * var;

    let dl_dchi1 = dl_dmu0 + dl_dbeta * dbeta_dchi1;
    let dl_dchi2 = dl_dbeta * dbeta_dchi2;
    let dl_dn_direct = dl_dlambda + 0.5 * dl_dalpha + dl_dbeta * dbeta_dn;

    // Posterior stats in terms of the pseudo inputs.
    let dchi1_dni = (pseudo.chi1 - post.chi1) / n;
    let dchi2_dni = (pseudo.chi2 - post.chi2) / n;
    let dchi2_dtau = n_i / n;

    let dl_dni = dl_dchi1 * dchi1_dni + dl_dchi2 * dchi2_dni + dl_dn_direct;
    let dl_dtaui = dl_dchi2 * dchi2_dtau;

    let d_rho = dl_dni * hyper.evidence_scale * sig * (1.0 - sig);
    let d_tau = dl_dtaui * tau_sig;
    if !d_rho.is_finite() {
        return Err(Error::NonFinite { what: "d_rho", value: d_rho });
    }
    if !d_tau.is_finite() {
        return Err(Error::NonFinite { what: "d_tau", value: d_tau });
    }
    Ok((loss, d_rho, d_tau))
}

/// Rectified posterior entropy at raw grid values; what planning consumes.
pub fn posterior_entropy(s_i: f64, rho_raw: f64, tau_raw: f64, hyper: &UncertaintyHyper) -> f64 {
    let n_i = hyper.evidence_scale * sigmoid(rho_raw);
    let tau_i = softplus(tau_raw) + EPS_TAU;
    let pseudo = NaturalStats::new(s_i, s_i * s_i + tau_i, n_i);
    let post = posterior_update(hyper.prior, pseudo).expect("valid prior");
    let m = natural_to_nig(post).expect("blend keeps variance positive");
    softplus(nig_entropy(m))
}
