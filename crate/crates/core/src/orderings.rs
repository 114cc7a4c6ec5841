//! Degradability checks and the combined class report.
//!
//! A channel is degradable when some channel `D` maps its output onto the
//! environment's output, `D o N = N^c`. The check minimizes the Frobenius
//! distance between the Choi matrices of `D o N` and `N^c` with
//! Levenberg-Marquardt over the Kraus operators of `D`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::channels::{compose, KrausChannel};
use crate::optimize::{
    self, default_ensemble_size, LessNoisyProbe, OptConfig, Probe, Verdict, N1_CAVEAT,
};
use crate::qmat::{CMatrix, C64};
use crate::rng;

/// Best degrading map found and its Choi residual.
#[derive(Clone, Debug, Serialize)]
pub struct DegradabilityCheck {
    pub residual: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caveat: Option<&'static str>,
    /// The minimizing map, returned when the verdict is HOLDS.
    #[serde(skip)]
    pub map: Option<KrausChannel>,
}

fn verdict_for(residual: f64, cfg: &OptConfig) -> Verdict {
    if residual < cfg.degradable_tol {
        Verdict::Holds
    } else if residual > cfg.nondegradable_tol {
        Verdict::Violated
    } else {
        Verdict::Inconclusive
    }
}

/// Search for `D` with `D o N = N^c`.
pub fn check_degradable(ch: &KrausChannel, cfg: &OptConfig) -> DegradabilityCheck {
    degrade_towards(ch, &ch.complementary(), cfg)
}

/// Search for `D` with `D o N = conj(N^c)`.
pub fn check_conjugate_degradable(ch: &KrausChannel, cfg: &OptConfig) -> DegradabilityCheck {
    degrade_towards(ch, &ch.complementary().conjugate(), cfg)
}

fn degrade_towards(ch: &KrausChannel, target: &KrausChannel, cfg: &OptConfig) -> DegradabilityCheck {
    let problem = Degrading::new(ch, target);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for r in 0..cfg.degrade_restarts.max(1) {
        let mut g = rng::substream(cfg.seed ^ 0xDE6_0000, r as u64);
        let x0: Vec<f64> = (0..problem.n_params())
            .map(|_| rng::gaussian_c64(&mut g).re)
            .collect();
        let (res, x) = problem.levenberg_marquardt(x0, cfg.degrade_max_iters);
        if best.as_ref().is_none_or(|(b, _)| res < *b) {
            best = Some((res, x));
        }
        // further restarts cannot change a HOLDS verdict
        if res < 1e-3 * cfg.degradable_tol {
            break;
        }
    }
    let (_, x) = best.expect("at least one restart");
    let map = problem.channel(&x);
    let residual = problem.residual_of(&map);
    let verdict = verdict_for(residual, cfg);
    DegradabilityCheck {
        residual,
        verdict,
        caveat: verdict.caveat(),
        map: (verdict == Verdict::Holds).then_some(map),
    }
}

struct Degrading<'a> {
    ch: &'a KrausChannel,
    target_choi: CMatrix,
    dim_b: usize,
    dim_e: usize,
    count: usize,
}

impl<'a> Degrading<'a> {
    fn new(ch: &'a KrausChannel, target: &KrausChannel) -> Self {
        let dim_b = ch.dim_out();
        let dim_e = target.dim_out();
        Self {
            ch,
            target_choi: target.choi(),
            dim_b,
            dim_e,
            count: dim_b * dim_e,
        }
    }

    fn n_params(&self) -> usize {
        2 * self.count * self.dim_e * self.dim_b
    }

    fn raw_kraus(&self, x: &[f64]) -> Vec<CMatrix> {
        let block = self.dim_e * self.dim_b;
        (0..self.count)
            .map(|k| {
                CMatrix::from_fn(self.dim_e, self.dim_b, |i, j| {
                    let at = 2 * (k * block + i * self.dim_b + j);
                    C64::new(x[at], x[at + 1])
                })
            })
            .collect()
    }

    /// `L_i M^{-1/2}` with `M = sum L_i^dagger L_i`, which is trace preserving.
    fn channel(&self, x: &[f64]) -> KrausChannel {
        let raw = self.raw_kraus(x);
        match KrausChannel::renormalized(self.dim_b, self.dim_e, raw) {
            Ok(ch) => ch,
            // degenerate Gram matrix: fall back to the trace-and-prepare map
            Err(_) => {
                let kraus = (0..self.count)
                    .map(|k| {
                        CMatrix::from_fn(self.dim_e, self.dim_b, |i, j| {
                            if i == 0 && k == j {
                                C64::new(1.0, 0.0)
                            } else {
                                C64::new(0.0, 0.0)
                            }
                        })
                    })
                    .collect();
                KrausChannel::new(self.dim_b, self.dim_e, kraus).expect("trace-and-prepare")
            }
        }
    }

    fn params(&self, d: &KrausChannel) -> Vec<f64> {
        d.kraus()
            .iter()
            .flat_map(|k| k.as_slice().iter().flat_map(|z| [z.re, z.im]).collect::<Vec<_>>())
            .collect()
    }

    fn diff(&self, d: &KrausChannel) -> CMatrix {
        let composed = compose(d, self.ch).expect("dimensions agree");
        &composed.choi() - &self.target_choi
    }

    fn residual_of(&self, d: &KrausChannel) -> f64 {
        self.diff(d).frobenius_norm()
    }

    fn residual_vector(&self, x: &[f64]) -> Vec<f64> {
        self.diff(&self.channel(x))
            .as_slice()
            .iter()
            .flat_map(|z| [z.re, z.im])
            .collect()
    }

    /// Returns the final residual and the (normalized) parameters.
    fn levenberg_marquardt(&self, x0: Vec<f64>, max_iters: usize) -> (f64, Vec<f64>) {
        let n = x0.len();
        let mut x = self.params(&self.channel(&x0));
        let mut r = self.residual_vector(&x);
        let mut cost: f64 = r.iter().map(|v| v * v).sum();
        let mut mu = 1e-3;
        for _ in 0..max_iters {
            if cost.sqrt() < 1e-12 {
                break;
            }
            let m = r.len();
            let mut jac = DMatrix::<f64>::zeros(m, n);
            for p in 0..n {
                let h = 1e-6 * (1.0 + x[p].abs());
                let mut xp = x.clone();
                xp[p] += h;
                let mut xm = x.clone();
                xm[p] -= h;
                let rp = self.residual_vector(&xp);
                let rm = self.residual_vector(&xm);
                for i in 0..m {
                    jac[(i, p)] = (rp[i] - rm[i]) / (2.0 * h);
                }
            }
            let rv = DVector::from_vec(r.clone());
            let jtj = jac.transpose() * &jac;
            let grad = jac.transpose() * rv;
            let scale = (0..n).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(1e-12);
            let mut improved = false;
            while mu < 1e10 {
                let mut a = jtj.clone();
                for i in 0..n {
                    a[(i, i)] += mu * scale;
                }
                let Some(chol) = a.cholesky() else {
                    mu *= 4.0;
                    continue;
                };
                let step = chol.solve(&(-&grad));
                let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                let trial = self.params(&self.channel(&trial));
                let rt = self.residual_vector(&trial);
                let ct: f64 = rt.iter().map(|v| v * v).sum();
                if ct < cost {
                    let gain = cost - ct;
                    x = trial;
                    r = rt;
                    cost = ct;
                    mu = (mu / 3.0).max(1e-12);
                    improved = gain > 1e-30;
                    break;
                }
                mu *= 4.0;
            }
            if !improved {
                break;
            }
        }
        (cost.sqrt(), x)
    }
}

/// Everything known about a channel's position in the class hierarchy.
#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub channel: String,
    pub degradable: DegradabilityCheck,
    pub conjugate_degradable: DegradabilityCheck,
    pub more_capable_n1: Probe,
    pub less_noisy_n1: LessNoisyProbe,
    /// Single-letter quantum capacity estimate, bits.
    pub q1: f64,
    /// Best private information found, a lower bound on `Cp1`, bits.
    pub cp1_lower: f64,
    pub caveat: &'static str,
    /// Inclusion rules broken by the verdicts above; empty when consistent.
    pub inconsistencies: Vec<String>,
}

impl ClassReport {
    /// Check the verdicts against the class inclusions
    /// degradable, conjugate degradable ⊆ less noisy ⊆ more capable.
    pub fn validate(&self) -> Vec<String> {
        let ln = self.less_noisy_n1.probe.verdict;
        let mc = self.more_capable_n1.verdict;
        let mut out = Vec::new();
        if self.degradable.verdict == Verdict::Holds && ln == Verdict::Violated {
            out.push("degradable HOLDS but less_noisy_n1 VIOLATED".to_string());
        }
        if self.conjugate_degradable.verdict == Verdict::Holds && ln == Verdict::Violated {
            out.push("conjugate_degradable HOLDS but less_noisy_n1 VIOLATED".to_string());
        }
        if ln != Verdict::Violated && mc == Verdict::Violated {
            out.push("less_noisy_n1 not VIOLATED but more_capable_n1 VIOLATED".to_string());
        }
        out
    }

    pub fn is_consistent(&self) -> bool {
        self.validate().is_empty()
    }
}

/// Run every check and probe on `ch` and assemble the report.
pub fn classify(id: &str, ch: &KrausChannel, cfg: &OptConfig) -> ClassReport {
    let ((degradable, conjugate_degradable), (q1, cp1, mc, ln)) = rayon::join(
        || {
            rayon::join(
                || check_degradable(ch, cfg),
                || check_conjugate_degradable(ch, cfg),
            )
        },
        || {
            let q1 = optimize::max_coherent_information(ch, cfg);
            let cp1 = optimize::max_private_information_from(
                ch,
                default_ensemble_size(ch, cfg),
                cfg,
                q1.state().expect("state"),
            );
            let mc = optimize::probe_more_capable(ch, cfg);
            let seeds: Vec<_> = mc.witness.iter().cloned().collect();
            let ln = optimize::probe_less_noisy_with(ch, cfg, &seeds);
            (q1, cp1, mc, ln)
        },
    );
    let mut report = ClassReport {
        channel: id.to_string(),
        degradable,
        conjugate_degradable,
        more_capable_n1: mc,
        less_noisy_n1: ln,
        q1: q1.value,
        cp1_lower: cp1.value,
        caveat: N1_CAVEAT,
        inconsistencies: Vec::new(),
    };
    report.inconsistencies = report.validate();
    report
}

/// Classify several channels in parallel, preserving order.
pub fn classify_all(items: &[(String, KrausChannel)], cfg: &OptConfig) -> Vec<ClassReport> {
    items
        .par_iter()
        .map(|(id, ch)| classify(id, ch, cfg))
        .collect()
}
