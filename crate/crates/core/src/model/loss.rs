use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use super::mlp::{backward, check_row, forward_cache, sigmoid, MlpParams};
use super::ModelError;

/// Probability clamp applied before every logarithm.
pub const PROB_EPS: f64 = 1e-7;

/// Training objective.
///
/// The forward-correction variants assume the only corruption is positives
/// observed as negatives, with probability `prior` (FC) or a per-instance
/// prior looked up from the instance's features (FFC).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossSpec {
    Bce,
    /// Positive log-likelihood plus `lambda · KL(prior ‖ mean prediction on negatives)`.
    Lr {
        lambda: f64,
        prior: f64,
    },
    Fc {
        prior: f64,
    },
    /// Feature id → prior for negatives carrying that feature.
    Ffc {
        feature_priors: BTreeMap<String, f64>,
    },
}

impl LossSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Bce => "bce",
            LossSpec::Lr { .. } => "lr",
            LossSpec::Fc { .. } => "fc",
            LossSpec::Ffc { .. } => "ffc",
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let prob = |p: f64, what: &str| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(ModelError::InvalidConfig(format!("{what} must lie in [0,1], got {p}")))
            }
        };
        match self {
            LossSpec::Bce => Ok(()),
            LossSpec::Lr { lambda, prior } => {
                if !(*lambda >= 0.0 && lambda.is_finite()) {
                    return Err(ModelError::InvalidConfig(format!("lambda must be >= 0, got {lambda}")));
                }
                prob(*prior, "prior")
            }
            LossSpec::Fc { prior } => prob(*prior, "prior"),
            LossSpec::Ffc { feature_priors } => feature_priors.values().try_for_each(|p| prob(*p, "feature prior")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Bce,
    Lr { lambda: f64, prior: f64 },
    Fc { prior: f64 },
    Ffc { priors: BTreeMap<usize, f64> },
}

/// A [`LossSpec`] with feature ids resolved to input indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    kind: Kind,
}

impl Objective {
    /// Resolves FFC feature ids with `resolve`; ids it does not know are
    /// dropped (they can never be present in an input row).
    pub fn new(spec: &LossSpec, resolve: impl Fn(&str) -> Option<usize>) -> Result<Self, ModelError> {
        spec.validate()?;
        let kind = match spec {
            LossSpec::Bce => Kind::Bce,
            LossSpec::Lr { lambda, prior } => Kind::Lr {
                lambda: *lambda,
                prior: *prior,
            },
            LossSpec::Fc { prior } => Kind::Fc { prior: *prior },
            LossSpec::Ffc { feature_priors } => {
                let mut priors = BTreeMap::new();
                for (f, p) in feature_priors {
                    match resolve(f) {
                        Some(i) => {
                            priors.insert(i, *p);
                        }
                        None => log::warn!("FFC prior for unknown feature {f} ignored"),
                    }
                }
                Kind::Ffc { priors }
            }
        };
        Ok(Self { kind })
    }

    /// Objective whose FFC priors are already keyed by input index.
    pub fn ffc_indexed(priors: BTreeMap<usize, f64>) -> Self {
        Self {
            kind: Kind::Ffc { priors },
        }
    }

    pub fn bce() -> Self {
        Self { kind: Kind::Bce }
    }

    /// Noise prior applied to an instance with observed label `y`.
    pub fn instance_prior(&self, x: &[(usize, f64)], y: u8) -> f64 {
        match &self.kind {
            Kind::Bce | Kind::Lr { .. } => 0.0,
            Kind::Fc { prior } => *prior,
            Kind::Ffc { priors } => {
                if y != 0 {
                    return 0.0;
                }
                x.iter()
                    .filter(|(_, v)| *v != 0.0)
                    .filter_map(|(i, _)| priors.get(i))
                    .fold(0.0, |m, p| f64::max(m, *p))
            }
        }
    }
}

static CLAMP_WARNED: AtomicBool = AtomicBool::new(false);

fn clamp(p: f64) -> (f64, bool) {
    if p < PROB_EPS {
        (PROB_EPS, true)
    } else if p > 1.0 - PROB_EPS {
        (1.0 - PROB_EPS, true)
    } else {
        (p, false)
    }
}

/// Forward-corrected cross-entropy term and its derivative w.r.t. `p`.
/// With `q = 0` this is plain binary cross-entropy.
fn corrected_term(y: u8, p: f64, q: f64) -> (f64, f64) {
    let (pc, p_clamped) = clamp(p);
    let (u, u_clamped) = clamp((1.0 - q) * pc);
    if u_clamped && !p_clamped && q > 0.0 && y != 0 && !CLAMP_WARNED.swap(true, Ordering::Relaxed) {
        log::warn!("corrected probability clamped at {PROB_EPS}; prior close to 1 on a positive");
    }
    let live = !(p_clamped || u_clamped);
    if y != 0 {
        let d = if live { -(1.0 - q) / u } else { 0.0 };
        (-u.ln(), d)
    } else {
        let d = if live { (1.0 - q) / (1.0 - u) } else { 0.0 };
        (-(1.0 - u).ln(), d)
    }
}

/// Bernoulli KL divergence `KL(a ‖ b)` with `0 ln 0 = 0`, and its derivative in `b`.
pub fn bernoulli_kl(a: f64, b: f64) -> (f64, f64) {
    let term = |x: f64, y: f64| if x == 0.0 { 0.0 } else { x * (x / y).ln() };
    let kl = term(a, b) + term(1.0 - a, 1.0 - b);
    let d = -a / b + (1.0 - a) / (1.0 - b);
    (kl, d)
}

/// Batch loss and its derivative with respect to each output probability.
///
/// `ps` are unclamped model outputs, `qs` per-instance noise priors.
pub fn output_loss(kind_obj: &Objective, ps: &[f64], ys: &[u8], qs: &[f64]) -> (f64, Vec<f64>) {
    let n = ps.len() as f64;
    let mut dp = vec![0.0; ps.len()];
    let mut total = 0.0;
    match &kind_obj.kind {
        Kind::Lr { lambda, prior } => {
            for (i, (&p, &y)) in ps.iter().zip(ys).enumerate() {
                if y != 0 {
                    let (l, d) = corrected_term(1, p, 0.0);
                    total += l;
                    dp[i] = d / n;
                }
            }
            let negatives: Vec<usize> = (0..ps.len()).filter(|i| ys[*i] == 0).collect();
            let mut loss = total / n;
            if !negatives.is_empty() && *lambda > 0.0 {
                let m = negatives.len() as f64;
                let mean = negatives.iter().map(|i| ps[*i]).sum::<f64>() / m;
                let (ph, clamped) = clamp(mean);
                let (kl, dkl) = bernoulli_kl(*prior, ph);
                loss += lambda * kl;
                if !clamped {
                    for i in negatives {
                        dp[i] = lambda * dkl / m;
                    }
                }
            }
            (loss, dp)
        }
        _ => {
            for (i, ((&p, &y), &q)) in ps.iter().zip(ys).zip(qs).enumerate() {
                let (l, d) = corrected_term(y, p, q);
                total += l;
                dp[i] = d / n;
            }
            (total / n, dp)
        }
    }
}

fn check_batch(params: &MlpParams, rows: &[&[(usize, f64)]], labels: &[u8]) -> Result<(), ModelError> {
    if rows.is_empty() {
        return Err(ModelError::EmptyInput);
    }
    if rows.len() != labels.len() {
        return Err(ModelError::InvalidConfig(format!(
            "{} rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    rows.iter().try_for_each(|r| check_row(params, r))
}

pub fn loss(params: &MlpParams, rows: &[&[(usize, f64)]], labels: &[u8], obj: &Objective) -> Result<f64, ModelError> {
    check_batch(params, rows, labels)?;
    let ps: Vec<f64> = rows.iter().map(|r| sigmoid(forward_cache(params, r).logit())).collect();
    let qs: Vec<f64> = rows
        .iter()
        .zip(labels)
        .map(|(r, y)| obj.instance_prior(r, *y))
        .collect();
    Ok(output_loss(obj, &ps, labels, &qs).0)
}

/// Loss and its gradient with respect to every parameter.
pub fn loss_grad(
    params: &MlpParams,
    rows: &[&[(usize, f64)]],
    labels: &[u8],
    obj: &Objective,
) -> Result<(f64, MlpParams), ModelError> {
    check_batch(params, rows, labels)?;
    let caches: Vec<_> = rows.iter().map(|r| forward_cache(params, r)).collect();
    let ps: Vec<f64> = caches.iter().map(|c| sigmoid(c.logit())).collect();
    let qs: Vec<f64> = rows
        .iter()
        .zip(labels)
        .map(|(r, y)| obj.instance_prior(r, *y))
        .collect();
    let (l, dp) = output_loss(obj, &ps, labels, &qs);
    let mut grads = params.zeros_like();
    for ((row, cache), (p, d)) in rows.iter().zip(&caches).zip(ps.iter().zip(&dp)) {
        let dlogit = d * p * (1.0 - p);
        if dlogit != 0.0 {
            backward(params, row, cache, dlogit, &mut grads);
        }
    }
    Ok((l, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }

    #[test]
    fn reference_values() {
        let bce = Objective::bce();
        close(output_loss(&bce, &[0.5], &[1], &[0.0]).0, std::f64::consts::LN_2);
        let fc = Objective::new(&LossSpec::Fc { prior: 0.3 }, |_| None).unwrap();
        close(output_loss(&fc, &[0.8], &[0], &[0.3]).0, -(0.44f64).ln());
        close(-(0.44f64).ln(), 0.8210);
    }

    #[test]
    fn ffc_prior_lookup() {
        let obj = Objective::ffc_indexed([(2usize, 0.9), (5, 0.4)].into());
        assert_eq!(obj.instance_prior(&[(1, 1.0)], 0), 0.0);
        assert_eq!(obj.instance_prior(&[(2, 1.0), (5, 1.0)], 0), 0.9);
        assert_eq!(obj.instance_prior(&[(5, 1.0)], 0), 0.4);
        assert_eq!(obj.instance_prior(&[(2, 1.0)], 1), 0.0);
    }

    #[test]
    fn lr_kl_vanishes_at_prior() {
        let obj = Objective::new(
            &LossSpec::Lr {
                lambda: 1.0,
                prior: 0.2,
            },
            |_| None,
        )
        .unwrap();
        let (l, _) = output_loss(&obj, &[0.2, 0.2, 0.9], &[0, 0, 1], &[0.0; 3]);
        close(l, -(0.9f64).ln() / 3.0);
        // no negatives: KL skipped
        let (l, _) = output_loss(&obj, &[0.9], &[1], &[0.0]);
        close(l, -(0.9f64).ln());
    }

    #[test]
    fn fc_penalizes_high_p_less_as_prior_grows() {
        let at = |q: f64, p: f64| output_loss(&Objective::bce(), &[p], &[0], &[q]).0;
        for &q in &[0.1, 0.5, 0.9] {
            assert!(at(q, 0.6) > at(q, 0.5), "increasing in p at y=0");
            assert!(at(q + 0.05, 0.6) <= at(q, 0.6), "non-increasing in prior");
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(LossSpec::Fc { prior: 1.5 }.validate().is_err());
        assert!(LossSpec::Lr {
            lambda: -1.0,
            prior: 0.1
        }
        .validate()
        .is_err());
        let spec = LossSpec::Ffc {
            feature_priors: [("cwe:89".to_string(), 0.95)].into(),
        };
        let obj = Objective::new(&spec, |f| (f == "cwe:89").then_some(3)).unwrap();
        assert_eq!(obj.instance_prior(&[(3, 1.0)], 0), 0.95);
    }

    #[test]
    fn extreme_prior_stays_finite() {
        let (l, d) = output_loss(&Objective::bce(), &[0.7], &[1], &[1.0]);
        assert!(l.is_finite() && d.iter().all(|x| x.is_finite()));
    }
}
