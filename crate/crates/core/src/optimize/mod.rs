//! Single-letter maximizers (`Q1`, `Cp1`) and the n=1 probes for the
//! more-capable, less-noisy, concavity and two-copy additivity conditions.
//!
//! Every search is a seeded multi-start Nelder-Mead run over an
//! unconstrained parameterization. Restarts are independent and run on the
//! rayon pool; the best restart wins, ties going to the lowest index, so
//! results depend only on the configuration.

pub mod nelder_mead;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::KrausChannel;
use crate::entropic::{Ensemble, Gap, Wiretap};
use crate::qmat::{hermitian_eig, CMatrix, DensityMatrix, C64};
use crate::rng::{self, SeededRng};
use crate::{Error, Result};

use nelder_mead::{Minimum, NelderMead};

/// Label attached to every HOLDS verdict of an n=1 probe.
pub const N1_CAVEAT: &str = "n=1 evidence only, not a proof for all n";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct OptConfig {
    pub seed: u64,
    pub restarts: usize,
    pub max_iters: usize,
    pub tol: f64,
    /// Ensemble size for `Cp1`; `None` means `dim_in^2`.
    pub ensemble_size: Option<usize>,
    pub concavity_samples: usize,
    /// Threshold for capacity-level violations, in bits.
    pub capacity_tol: f64,
    /// Threshold for identity-level violations (concavity slack), in bits.
    pub identity_tol: f64,
    /// Choi residual below which a degrading map counts as found.
    pub degradable_tol: f64,
    /// Choi residual above which the channel counts as not degradable.
    pub nondegradable_tol: f64,
    pub degrade_restarts: usize,
    pub degrade_max_iters: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 32,
            max_iters: 2000,
            tol: 1e-7,
            ensemble_size: None,
            concavity_samples: 500,
            capacity_tol: 1e-5,
            identity_tol: 1e-7,
            degradable_tol: 1e-6,
            nondegradable_tol: 1e-3,
            degrade_restarts: 8,
            degrade_max_iters: 200,
        }
    }
}

impl OptConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    /// Set a named tolerance; returns an error for unknown keys.
    pub fn set_tolerance(&mut self, key: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::InvalidParameter(format!("tolerance {key}={value}")));
        }
        match key {
            "tol" | "opt" => self.tol = value,
            "capacity" => self.capacity_tol = value,
            "identity" => self.identity_tol = value,
            "degradable" => self.degradable_tol = value,
            "nondegradable" => self.nondegradable_tol = value,
            _ => return Err(Error::InvalidParameter(format!("unknown tolerance `{key}`"))),
        }
        Ok(())
    }

    fn nelder_mead(&self) -> NelderMead {
        NelderMead {
            max_iters: self.max_iters,
            tol: self.tol,
            ..Default::default()
        }
    }

    fn restarts(&self) -> usize {
        self.restarts.max(1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "HOLDS",
            Verdict::Violated => "VIOLATED",
            Verdict::Inconclusive => "INCONCLUSIVE",
        }
    }

    /// The caveat that must accompany this verdict, if any.
    pub fn caveat(self) -> Option<&'static str> {
        (self == Verdict::Holds).then_some(N1_CAVEAT)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Argmax {
    State(DensityMatrix),
    Ensemble(Ensemble),
}

#[derive(Clone, Debug, Serialize)]
pub struct OptResult {
    /// Objective re-evaluated at `argmax`, in bits.
    pub value: f64,
    pub argmax: Argmax,
    pub restarts: usize,
    pub converged: bool,
    pub iterations: usize,
}

impl OptResult {
    pub fn state(&self) -> Option<&DensityMatrix> {
        match &self.argmax {
            Argmax::State(s) => Some(s),
            Argmax::Ensemble(_) => None,
        }
    }

    pub fn ensemble(&self) -> Option<&Ensemble> {
        match &self.argmax {
            Argmax::Ensemble(e) => Some(e),
            Argmax::State(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// One state with positive coherent information of the complement.
    ComplementCoherentInformation,
    /// A pair `(rho, rho_hat)` with negative divergence gap.
    NegativeDivergenceGap,
    /// A mixture whose coherent information lies below the average.
    ConcavityViolation,
    /// A two-copy input and a single-copy input; margin is
    /// `I_c(two-copy) - 2 I_c(single)`.
    TwoCopyExcess,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum WitnessObject {
    State(DensityMatrix),
    Ensemble(Ensemble),
}

#[derive(Clone, Debug, Serialize)]
pub struct Witness {
    pub kind: WitnessKind,
    pub objects: Vec<WitnessObject>,
    /// Size of the violation in bits, as re-evaluated from `objects`.
    pub margin: f64,
}

impl Witness {
    fn build(kind: WitnessKind, objects: Vec<WitnessObject>, ch: &KrausChannel) -> Result<Self> {
        let mut w = Witness {
            kind,
            objects,
            margin: f64::NAN,
        };
        w.margin = w.recheck(ch)?;
        Ok(w)
    }

    fn state(&self, i: usize) -> Result<&DensityMatrix> {
        match self.objects.get(i) {
            Some(WitnessObject::State(s)) => Ok(s),
            _ => Err(Error::InvalidParameter(format!("witness object {i} is not a state"))),
        }
    }

    /// Recompute the margin from the stored objects.
    pub fn recheck(&self, ch: &KrausChannel) -> Result<f64> {
        let wt = Wiretap::new(ch);
        match self.kind {
            WitnessKind::ComplementCoherentInformation => {
                wt.swapped().coherent_information(self.state(0)?)
            }
            WitnessKind::NegativeDivergenceGap => {
                match wt.divergence_gap(self.state(0)?, self.state(1)?)? {
                    Gap::Bits(x) => Ok(x),
                    Gap::Indeterminate => Err(Error::Indeterminate("witness gap".into())),
                }
            }
            WitnessKind::ConcavityViolation => match self.objects.first() {
                Some(WitnessObject::Ensemble(ens)) => concavity_slack(&wt, ens),
                _ => Err(Error::InvalidParameter("witness object 0 is not an ensemble".into())),
            },
            WitnessKind::TwoCopyExcess => {
                let two = Wiretap::new(&ch.tensor(ch));
                Ok(two.coherent_information(self.state(0)?)?
                    - 2.0 * wt.coherent_information(self.state(1)?)?)
            }
        }
    }

    /// Whether the stored margin is reproduced within `tol`.
    pub fn verifies(&self, ch: &KrausChannel, tol: f64) -> bool {
        self.recheck(ch)
            .map(|m| (m - self.margin).abs() <= tol)
            .unwrap_or(false)
    }
}

/// Outcome of an n=1 probe.
#[derive(Clone, Debug, Serialize)]
pub struct Probe {
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caveat: Option<&'static str>,
    /// The searched quantity: complement `Q1` for the more-capable probe,
    /// minimal divergence gap for the less-noisy probe.
    pub value: f64,
    pub witness: Option<Witness>,
}

impl Probe {
    fn new(verdict: Verdict, value: f64, witness: Option<Witness>) -> Self {
        Self {
            verdict,
            caveat: verdict.caveat(),
            value,
            witness,
        }
    }
}

/// Result of the less-noisy probe together with its concavity cross-check.
#[derive(Clone, Debug, Serialize)]
pub struct LessNoisyProbe {
    #[serde(flatten)]
    pub probe: Probe,
    pub concavity: ConcavityProbe,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcavityProbe {
    pub samples: usize,
    pub worst_slack: f64,
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SubadditivityProbe {
    pub single_copy: f64,
    pub two_copy: f64,
    /// `two_copy - 2 single_copy`
    pub excess: f64,
    pub witness: Option<Witness>,
}

// ---------------------------------------------------------------------------
// parameterizations

/// `G G^dagger / Tr`, `G` packed as real and imaginary parts row by row.
fn state_from_params(x: &[f64], d: usize) -> Option<DensityMatrix> {
    let g = CMatrix::from_fn(d, d, |i, j| {
        let k = 2 * (i * d + j);
        C64::new(x[k], x[k + 1])
    });
    let gram = g.mul_adjoint(&g);
    if !(gram.trace().re > 1e-300) {
        return None;
    }
    DensityMatrix::from_psd(gram).ok()
}

fn state_params_len(d: usize) -> usize {
    2 * d * d
}

/// Parameters of `sqrt(rho)`, which maps back to `rho`.
fn params_from_state(rho: &DensityMatrix) -> Vec<f64> {
    let root = rho
        .matrix()
        .hermitian_map(|x| x.max(0.0).sqrt())
        .expect("density matrices are Hermitian");
    root.as_slice().iter().flat_map(|z| [z.re, z.im]).collect()
}

fn random_state_params(rng: &mut SeededRng, d: usize) -> Vec<f64> {
    (0..state_params_len(d)).map(|_| rng::gaussian_c64(rng).re).collect()
}

/// Ensemble of `m` states; weights `w_u` give `p_u = w_u^2 / sum w^2`.
fn ensemble_from_params(x: &[f64], d: usize, m: usize) -> Option<Ensemble> {
    let w2: Vec<f64> = x[..m].iter().map(|w| w * w).collect();
    let total: f64 = w2.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return None;
    }
    let mut probs: Vec<f64> = w2.iter().map(|w| w / total).collect();
    let s: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= s);
    let n = state_params_len(d);
    let states = (0..m)
        .map(|u| state_from_params(&x[m + u * n..m + (u + 1) * n], d))
        .collect::<Option<Vec<_>>>()?;
    Ensemble::new(probs, states).ok()
}

fn params_from_ensemble(ens: &Ensemble) -> Vec<f64> {
    let mut x: Vec<f64> = ens.probs().iter().map(|p| p.sqrt()).collect();
    for s in ens.states() {
        x.extend(params_from_state(s));
    }
    x
}

/// Fit an ensemble to exactly `m` members, padding with zero weight or
/// merging the lightest members into the heaviest.
fn resize_ensemble(ens: &Ensemble, m: usize) -> Ensemble {
    let mut pairs: Vec<(f64, DensityMatrix)> = ens
        .iter()
        .map(|(p, s)| (p, s.clone()))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    while pairs.len() > m {
        let (p, s) = pairs.pop().expect("nonempty");
        let (q, t) = &pairs[0];
        let merged = DensityMatrix::mixture(&[q / (p + q), p / (p + q)], &[t.clone(), s])
            .expect("mixture of states");
        pairs[0] = (p + q, merged);
    }
    let d = ens.dim();
    while pairs.len() < m {
        pairs.push((0.0, DensityMatrix::maximally_mixed(d)));
    }
    let (probs, states) = pairs.into_iter().unzip();
    Ensemble::new(probs, states).expect("resized ensemble")
}

// ---------------------------------------------------------------------------
// multi-start driver

struct Run {
    min: Minimum,
}

/// Minimize `f` from each start in parallel; returns the best run (lowest
/// value, lowest index on ties) and the total iteration count.
fn multistart<F>(nm: &NelderMead, starts: Vec<Vec<f64>>, f: F) -> (Minimum, usize)
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let runs: Vec<Run> = starts
        .into_par_iter()
        .map(|x0| Run {
            min: nm.minimize(&f, &x0),
        })
        .collect();
    let iterations = runs.iter().map(|r| r.min.iterations).sum();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.min.value < a.min.value { b } else { a })
        .expect("at least one restart");
    (best.min, iterations)
}

// ---------------------------------------------------------------------------
// maximizers

/// `Q1 = max_rho I_c(rho)`. Restart 0 starts at the maximally mixed state.
pub fn max_coherent_information(ch: &KrausChannel, cfg: &OptConfig) -> OptResult {
    max_coherent_information_from(ch, cfg, &[])
}

/// As [`max_coherent_information`], with extra starting states appended to
/// the random restarts.
pub fn max_coherent_information_from(
    ch: &KrausChannel,
    cfg: &OptConfig,
    seeds: &[DensityMatrix],
) -> OptResult {
    let wt = Wiretap::new(ch);
    let d = ch.dim_in();
    let mut starts = vec![params_from_state(&DensityMatrix::maximally_mixed(d))];
    for r in 1..cfg.restarts() {
        starts.push(random_state_params(&mut rng::substream(cfg.seed, r as u64), d));
    }
    starts.extend(seeds.iter().filter(|s| s.dim() == d).map(params_from_state));
    let objective = |x: &[f64]| match state_from_params(x, d) {
        Some(rho) => wt.coherent_information(&rho).map(|v| -v).unwrap_or(f64::NAN),
        None => f64::NAN,
    };
    let (best, iterations) = multistart(&cfg.nelder_mead(), starts, objective);
    let rho = state_from_params(&best.x, d).unwrap_or_else(|| DensityMatrix::maximally_mixed(d));
    let value = wt.coherent_information(&rho).expect("dimensions match");
    OptResult {
        value,
        argmax: Argmax::State(rho),
        restarts: cfg.restarts(),
        converged: best.converged,
        iterations,
    }
}

/// `Cp1 = max I(U;B) - I(U;E)` over ensembles of `m` states. Restart 0 is
/// the eigen-ensemble of the `Q1` maximizer, so the result is at least `Q1`.
pub fn max_private_information(ch: &KrausChannel, m: usize, cfg: &OptConfig) -> OptResult {
    let q1 = max_coherent_information(ch, cfg);
    max_private_information_from(ch, m, cfg, q1.state().expect("Q1 returns a state"))
}

/// As [`max_private_information`] with an explicit state whose
/// eigen-ensemble seeds restart 0.
pub fn max_private_information_from(
    ch: &KrausChannel,
    m: usize,
    cfg: &OptConfig,
    seed_state: &DensityMatrix,
) -> OptResult {
    let wt = Wiretap::new(ch);
    let d = ch.dim_in();
    let m = m.max(1);
    let mut starts = vec![params_from_ensemble(&resize_ensemble(&Ensemble::eigen(seed_state), m))];
    for r in 1..cfg.restarts() {
        let mut g = rng::substream(cfg.seed ^ 0x5EED_0001, r as u64);
        let mut x: Vec<f64> = (0..m).map(|_| g.gen_range(0.2..1.0)).collect();
        for _ in 0..m {
            x.extend(random_state_params(&mut g, d));
        }
        starts.push(x);
    }
    let objective = |x: &[f64]| match ensemble_from_params(x, d, m) {
        Some(ens) => wt.private_information(&ens).map(|v| -v).unwrap_or(f64::NAN),
        None => f64::NAN,
    };
    let (best, iterations) = multistart(&cfg.nelder_mead(), starts, objective);
    let ens = ensemble_from_params(&best.x, d, m)
        .unwrap_or_else(|| resize_ensemble(&Ensemble::eigen(seed_state), m));
    let value = wt.private_information(&ens).expect("dimensions match");
    OptResult {
        value,
        argmax: Argmax::Ensemble(ens),
        restarts: cfg.restarts(),
        converged: best.converged,
        iterations,
    }
}

/// Default ensemble size `dim_in^2`.
pub fn default_ensemble_size(ch: &KrausChannel, cfg: &OptConfig) -> usize {
    cfg.ensemble_size.unwrap_or(ch.dim_in() * ch.dim_in())
}

// ---------------------------------------------------------------------------
// probes

/// HOLDS when the complement has `Q1 <= capacity_tol`; otherwise VIOLATED
/// with the complement's maximizer as witness.
pub fn probe_more_capable(ch: &KrausChannel, cfg: &OptConfig) -> Probe {
    let res = max_coherent_information(&ch.complementary(), cfg);
    if res.value > cfg.capacity_tol {
        let rho = res.state().expect("state").clone();
        let w = Witness::build(
            WitnessKind::ComplementCoherentInformation,
            vec![WitnessObject::State(rho)],
            ch,
        )
        .expect("witness state matches the channel");
        Probe::new(Verdict::Violated, res.value, Some(w))
    } else {
        Probe::new(Verdict::Holds, res.value, None)
    }
}

fn concavity_slack(wt: &Wiretap, ens: &Ensemble) -> Result<f64> {
    let mut avg = 0.0;
    for (p, s) in ens.iter() {
        avg += p * wt.coherent_information(s)?;
    }
    Ok(wt.coherent_information(&ens.average())? - avg)
}

/// Smallest `I_c(sum p_i rho_i) - sum p_i I_c(rho_i)` over random mixtures
/// of two or three states, each pure or Hilbert-Schmidt random.
pub fn concavity_probe(ch: &KrausChannel, samples: usize, seed: u64) -> ConcavityProbe {
    concavity_probe_tol(ch, samples, seed, OptConfig::default().identity_tol)
}

pub fn concavity_probe_tol(ch: &KrausChannel, samples: usize, seed: u64, tol: f64) -> ConcavityProbe {
    let wt = Wiretap::new(ch);
    let d = ch.dim_in();
    let slacks: Vec<(f64, Ensemble)> = (0..samples.max(1))
        .into_par_iter()
        .map(|i| {
            let mut g = rng::substream(seed ^ 0xC0DC_A7E0, i as u64);
            let m = if g.gen_bool(0.5) { 2 } else { 3 };
            let probs = rng::random_probabilities(&mut g, m);
            let states = (0..m)
                .map(|_| {
                    if g.gen_bool(0.5) {
                        rng::random_pure(&mut g, d)
                    } else {
                        rng::random_density(&mut g, d)
                    }
                })
                .collect();
            let ens = Ensemble::new(probs, states).expect("valid random mixture");
            let slack = concavity_slack(&wt, &ens).expect("dimensions match");
            (slack, ens)
        })
        .collect();
    let (worst_slack, ens) = slacks
        .into_iter()
        .reduce(|a, b| if b.0 < a.0 { b } else { a })
        .expect("at least one sample");
    let witness = (worst_slack < -tol).then(|| {
        Witness::build(
            WitnessKind::ConcavityViolation,
            vec![WitnessObject::Ensemble(ens)],
            ch,
        )
        .expect("witness matches the channel")
    });
    ConcavityProbe {
        samples: samples.max(1),
        worst_slack,
        witness,
    }
}

fn gap_value(wt: &Wiretap, rho: &DensityMatrix, rho_hat: &DensityMatrix) -> f64 {
    match wt.divergence_gap(rho, rho_hat) {
        Ok(Gap::Bits(x)) if x.is_finite() => x,
        _ => f64::INFINITY,
    }
}

/// Pull a state towards the maximally mixed one so that it is full rank.
fn interior(rho: &DensityMatrix, t: f64) -> DensityMatrix {
    let d = rho.dim();
    DensityMatrix::mixture(&[1.0 - t, t], &[rho.clone(), DensityMatrix::maximally_mixed(d)])
        .expect("mixture of states")
}

/// Candidate pairs suggested by a witness of another probe: each member (or
/// eigenvector) against the average.
fn pairs_from_witness(w: &Witness) -> Vec<(DensityMatrix, DensityMatrix)> {
    let ens = match (w.kind, w.objects.first()) {
        (WitnessKind::ConcavityViolation, Some(WitnessObject::Ensemble(e))) => e.clone(),
        (WitnessKind::ComplementCoherentInformation, Some(WitnessObject::State(s))) => {
            Ensemble::eigen(s)
        }
        _ => return Vec::new(),
    };
    let avg = interior(&ens.average(), 1e-3);
    ens.states()
        .iter()
        .map(|s| (interior(s, 1e-3), avg.clone()))
        .collect()
}

/// Minimize the divergence gap over pairs `(rho, rho_hat)`. Restarts begin
/// at full-rank random pairs; pairs where both relative entropies diverge
/// (or the gap is otherwise not finite) are skipped. VIOLATED when the
/// minimum lies below `-capacity_tol`. The concavity probe is run alongside,
/// and its witness, as well as a more-capable witness, seed extra restarts.
pub fn probe_less_noisy(ch: &KrausChannel, cfg: &OptConfig) -> LessNoisyProbe {
    let mc = probe_more_capable(ch, cfg);
    let seeds: Vec<Witness> = mc.witness.into_iter().collect();
    probe_less_noisy_with(ch, cfg, &seeds)
}

pub fn probe_less_noisy_with(ch: &KrausChannel, cfg: &OptConfig, seeds: &[Witness]) -> LessNoisyProbe {
    let concavity = concavity_probe_tol(ch, cfg.concavity_samples, cfg.seed, cfg.identity_tol);
    let wt = Wiretap::new(ch);
    let d = ch.dim_in();
    let n = state_params_len(d);

    let mut starts = Vec::new();
    for r in 0..cfg.restarts() {
        let mut g = rng::substream(cfg.seed ^ 0x6A9_0000, r as u64);
        let a = rng::random_full_rank(&mut g, d, 0.05 / d as f64);
        let b = rng::random_full_rank(&mut g, d, 0.05 / d as f64);
        let mut x = params_from_state(&a);
        x.extend(params_from_state(&b));
        starts.push(x);
    }
    for w in seeds.iter().chain(&concavity.witness) {
        for (a, b) in pairs_from_witness(w) {
            let mut x = params_from_state(&a);
            x.extend(params_from_state(&b));
            starts.push(x);
        }
    }
    let split = |x: &[f64]| Some((state_from_params(&x[..n], d)?, state_from_params(&x[n..], d)?));
    let objective = |x: &[f64]| match split(x) {
        Some((a, b)) => gap_value(&wt, &a, &b),
        None => f64::NAN,
    };
    let (best, _) = multistart(&cfg.nelder_mead(), starts, objective);
    let (value, witness) = match split(&best.x) {
        Some((a, b)) => {
            let v = gap_value(&wt, &a, &b);
            let w = (v < -cfg.capacity_tol).then(|| {
                Witness::build(
                    WitnessKind::NegativeDivergenceGap,
                    vec![WitnessObject::State(a), WitnessObject::State(b)],
                    ch,
                )
                .expect("witness matches the channel")
            });
            (v, w)
        }
        None => (f64::INFINITY, None),
    };
    let verdict = if witness.is_some() {
        Verdict::Violated
    } else {
        Verdict::Holds
    };
    LessNoisyProbe {
        probe: Probe::new(verdict, value, witness),
        concavity,
    }
}

/// Two-copy coherent information against twice the single-copy value.
/// The two-copy search includes `rho* (x) rho*` as a start, so the excess is
/// never below zero by more than the single-copy optimizer's slack.
pub fn subadditivity_probe(ch: &KrausChannel, cfg: &OptConfig) -> Result<SubadditivityProbe> {
    if ch.dim_in() > 3 {
        return Err(Error::Precondition(format!(
            "two-copy search needs dim_in <= 3, got {}",
            ch.dim_in()
        )));
    }
    let single = max_coherent_information(ch, cfg);
    let star = single.state().expect("state").clone();
    let two = ch.tensor(ch);
    let two_cfg = OptConfig {
        seed: cfg.seed ^ 0x2C0_9E5,
        ..cfg.clone()
    };
    let pair = max_coherent_information_from(&two, &two_cfg, &[star.tensor(&star)]);
    let rho2 = pair.state().expect("state").clone();
    let excess = pair.value - 2.0 * single.value;
    let witness = (excess > cfg.capacity_tol).then(|| {
        Witness::build(
            WitnessKind::TwoCopyExcess,
            vec![WitnessObject::State(rho2), WitnessObject::State(star)],
            ch,
        )
        .expect("witness matches the channel")
    });
    Ok(SubadditivityProbe {
        single_copy: single.value,
        two_copy: pair.value,
        excess,
        witness,
    })
}

/// The ensemble `{lambda: rho_hat} U {beta_x: |phi_x><phi_x|}` built from
/// the eigendecomposition of `rho* - lambda rho_hat`, where `lambda` is the
/// largest weight keeping that operator positive. Its average is `rho*` and
/// its private information is `I_c(rho*) - lambda I_c(rho_hat)`.
pub fn negative_state_construction(
    ch: &KrausChannel,
    rho_star: &DensityMatrix,
    rho_hat: &DensityMatrix,
) -> Result<Ensemble> {
    let d = ch.dim_in();
    if rho_star.dim() != d || rho_hat.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "states of dims {} and {} for a channel on {d} dims",
            rho_star.dim(),
            rho_hat.dim()
        )));
    }
    let floor = rho_star.min_eigenvalue();
    if !(floor > 1e-8) {
        return Err(Error::NotFullRank(floor));
    }
    let ic_hat = Wiretap::new(ch).coherent_information(rho_hat)?;
    if ic_hat >= 0.0 {
        return Err(Error::Precondition(format!(
            "I_c(rho_hat) = {ic_hat} is not negative"
        )));
    }
    let lambda = largest_psd_weight(rho_star.matrix(), rho_hat.matrix())?;
    let rest = rho_star.matrix() - &rho_hat.matrix().scale_real(lambda);
    let eig = hermitian_eig(&rest.hermitian_part())?;
    let mut probs = vec![lambda];
    let mut states = vec![rho_hat.clone()];
    for (k, &beta) in eig.values.iter().enumerate() {
        probs.push(beta.max(0.0));
        states.push(DensityMatrix::pure(&eig.vectors.col(k))?);
    }
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ensemble::new(probs, states)
}

/// Largest `lambda` in `[0, 1]` with `a - lambda b` positive semidefinite,
/// by bisection to `1e-10`. The returned value is on the feasible side.
pub fn largest_psd_weight(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let min_eig = |l: f64| -> Result<f64> {
        Ok(hermitian_eig(&(a - &b.scale_real(l)).hermitian_part())?.min_value())
    };
    if min_eig(1.0)? >= 0.0 {
        return Ok(1.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if min_eig(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
