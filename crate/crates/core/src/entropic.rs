//! Information quantities of a channel and its complement, in bits.
//!
//! The wiretap picture: the sender prepares `rho_A`, the legitimate receiver
//! sees `N_B(rho)` and the eavesdropper sees `N_E(rho)`.

use serde::{Serialize, Serializer};

use crate::channels::KrausChannel;
use crate::qmat::{tol, CMatrix, DensityMatrix};
use crate::{Error, Result};

/// Logarithm base of every reported quantity.
pub const LOG_BASE: f64 = 2.0;

#[inline]
fn log(x: f64) -> f64 {
    x.log2()
}

/// An information value in bits. May be `+inf` for a relative entropy.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct InfoValue(f64);

impl InfoValue {
    pub const INFINITE: InfoValue = InfoValue(f64::INFINITY);

    pub fn bits(value: f64) -> Self {
        InfoValue(value)
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    /// Convert to a logarithm of another base, e.g. `E` for nats.
    pub fn in_base(self, base: f64) -> f64 {
        self.0 * LOG_BASE.ln() / base.ln()
    }
}

impl Serialize for InfoValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        serialize_bits(self.0, s)
    }
}

fn serialize_bits<S: Serializer>(x: f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(x)
    } else if x > 0.0 {
        s.serialize_str("+inf")
    } else if x < 0.0 {
        s.serialize_str("-inf")
    } else {
        s.serialize_str("nan")
    }
}

/// Difference of two relative entropies; `inf - inf` has no value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gap {
    /// Bits; may be `+inf` or `-inf` when exactly one side diverges.
    Bits(f64),
    Indeterminate,
}

impl Gap {
    pub fn finite(self) -> Option<f64> {
        match self {
            Gap::Bits(x) if x.is_finite() => Some(x),
            _ => None,
        }
    }
}

impl Serialize for Gap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gap::Bits(x) => serialize_bits(*x, s),
            Gap::Indeterminate => s.serialize_str("indeterminate"),
        }
    }
}

/// Probability-weighted list of states of equal dimension.
#[derive(Clone, Debug, Serialize)]
pub struct Ensemble {
    probs: Vec<f64>,
    states: Vec<DensityMatrix>,
}

impl Ensemble {
    pub fn new(probs: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        if probs.len() != states.len() || states.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for {} states",
                probs.len(),
                states.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("negative probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}")));
        }
        let d = states[0].dim();
        if states.iter().any(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch("ensemble states differ in dimension".into()));
        }
        Ok(Self { probs, states })
    }

    /// Eigen-ensemble `{lambda_x, |psi_x><psi_x|}` of a state.
    pub fn eigen(rho: &DensityMatrix) -> Self {
        let eig = rho.eig();
        let raw: Vec<f64> = eig.values.iter().map(|x| x.max(0.0)).collect();
        let total: f64 = raw.iter().sum();
        let probs = raw.iter().map(|x| x / total).collect();
        let states = (0..rho.dim())
            .map(|k| DensityMatrix::pure(&eig.vectors.col(k)).expect("unit eigenvector"))
            .collect();
        Self { probs, states }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &DensityMatrix)> {
        self.probs.iter().copied().zip(&self.states)
    }

    /// `sum_u p_u rho_u`
    pub fn average(&self) -> DensityMatrix {
        let d = self.dim();
        let mut acc = CMatrix::zeros(d, d);
        for (p, s) in self.iter() {
            acc = &acc + &s.matrix().scale_real(p);
        }
        DensityMatrix::from_psd(acc).expect("average of states is a state")
    }
}

/// von Neumann entropy `-Tr rho log rho`.
pub fn entropy(rho: &DensityMatrix) -> InfoValue {
    InfoValue(spectrum_entropy(rho.spectrum()))
}

/// Shannon entropy of a spectrum, ignoring entries below [`tol::ZERO_EIG`].
pub fn spectrum_entropy(spectrum: &[f64]) -> f64 {
    let h: f64 = spectrum
        .iter()
        .filter(|&&x| x > tol::ZERO_EIG)
        .map(|&x| -x * log(x))
        .sum();
    h.clamp(0.0, log(spectrum.len().max(1) as f64))
}

/// `D(rho || sigma) = Tr rho (log rho - log sigma)`, `+inf` when the support of
/// `rho` is not contained in that of `sigma`.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<InfoValue> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "relative entropy of {}-dim and {}-dim states",
            rho.dim(),
            sigma.dim()
        )));
    }
    let er = rho.eig();
    let es = sigma.eig();
    let n = rho.dim();
    let null: Vec<usize> = (0..n).filter(|&j| es.values[j] <= tol::SUPPORT_TOL).collect();
    for i in 0..n {
        if er.values[i] <= tol::SUPPORT_TOL {
            continue;
        }
        let leak: f64 = null
            .iter()
            .map(|&j| {
                (0..n)
                    .map(|r| es.vectors[(r, j)].conj() * er.vectors[(r, i)])
                    .sum::<crate::qmat::C64>()
                    .norm_sqr()
            })
            .sum();
        if leak > tol::SUPPORT_TOL {
            return Ok(InfoValue::INFINITE);
        }
    }
    let neg_h: f64 = er
        .values
        .iter()
        .filter(|&&x| x > tol::ZERO_EIG)
        .map(|&x| x * log(x))
        .sum();
    let mut cross = 0.0;
    for j in 0..n {
        let mu = es.values[j];
        if mu <= tol::SUPPORT_TOL {
            continue;
        }
        // <v_j| rho |v_j>
        let mut w = 0.0;
        for r in 0..n {
            for cc in 0..n {
                w += (es.vectors[(r, j)].conj() * rho.matrix()[(r, cc)] * es.vectors[(cc, j)]).re;
            }
        }
        cross += w * log(mu);
    }
    Ok(InfoValue((neg_h - cross).max(0.0)))
}

/// A channel paired with its complement, for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Wiretap {
    main: KrausChannel,
    env: KrausChannel,
}

impl Wiretap {
    pub fn new(ch: &KrausChannel) -> Self {
        Self {
            main: ch.clone(),
            env: ch.complementary(),
        }
    }

    pub fn main(&self) -> &KrausChannel {
        &self.main
    }

    pub fn env(&self) -> &KrausChannel {
        &self.env
    }

    /// The roles swapped: the environment becomes the legitimate receiver.
    pub fn swapped(&self) -> Wiretap {
        Wiretap {
            main: self.env.clone(),
            env: self.main.clone(),
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.main.dim_in() {
            return Err(Error::DimensionMismatch(format!(
                "{d}-dim input to a channel on {} dims",
                self.main.dim_in()
            )));
        }
        Ok(())
    }

    /// `(H(N_B(rho)), H(N_E(rho)))`
    pub fn output_entropies(&self, rho: &DensityMatrix) -> Result<(f64, f64)> {
        self.check_dim(rho.dim())?;
        let hb = entropy(&self.main.apply(rho)?).value();
        let he = entropy(&self.env.apply(rho)?).value();
        Ok((hb, he))
    }

    pub fn coherent_information(&self, rho: &DensityMatrix) -> Result<f64> {
        let (hb, he) = self.output_entropies(rho)?;
        Ok(hb - he)
    }

    /// Holevo quantities `(I(U;B), I(U;E))`.
    pub fn holevo_pair(&self, ens: &Ensemble) -> Result<(f64, f64)> {
        self.check_dim(ens.dim())?;
        let (hb_avg, he_avg) = self.output_entropies(&ens.average())?;
        let (mut cb, mut ce) = (0.0, 0.0);
        for (p, s) in ens.iter() {
            if p == 0.0 {
                continue;
            }
            let (hb, he) = self.output_entropies(s)?;
            cb += p * hb;
            ce += p * he;
        }
        Ok((hb_avg - cb, he_avg - ce))
    }

    pub fn private_information(&self, ens: &Ensemble) -> Result<f64> {
        let (ib, ie) = self.holevo_pair(ens)?;
        Ok(ib - ie)
    }

    pub fn divergence_gap(&self, rho: &DensityMatrix, rho_hat: &DensityMatrix) -> Result<Gap> {
        self.check_dim(rho.dim())?;
        self.check_dim(rho_hat.dim())?;
        let db = relative_entropy(&self.main.apply(rho)?, &self.main.apply(rho_hat)?)?.value();
        let de = relative_entropy(&self.env.apply(rho)?, &self.env.apply(rho_hat)?)?.value();
        Ok(match (db.is_finite(), de.is_finite()) {
            (true, true) => Gap::Bits(db - de),
            (false, true) => Gap::Bits(f64::INFINITY),
            (true, false) => Gap::Bits(f64::NEG_INFINITY),
            (false, false) => Gap::Indeterminate,
        })
    }

    /// Private information of `{lambda: rho, 1 - lambda: rho_hat}`.
    pub fn f_lambda(&self, rho: &DensityMatrix, rho_hat: &DensityMatrix, lambda: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidParameter(format!("lambda {lambda} outside [0, 1]")));
        }
        self.f_extended(rho, rho_hat, lambda)
    }

    /// The same expression written with entropies. Valid for any `lambda`
    /// at which both outputs of `lambda rho + (1 - lambda) rho_hat` are still
    /// positive semidefinite, which includes small negative `lambda` when the
    /// outputs of `rho_hat` are full rank.
    fn f_extended(&self, rho: &DensityMatrix, rho_hat: &DensityMatrix, lambda: f64) -> Result<f64> {
        self.check_dim(rho.dim())?;
        self.check_dim(rho_hat.dim())?;
        let mix = &rho.matrix().scale_real(lambda) + &rho_hat.matrix().scale_real(1.0 - lambda);
        let hb_bar = entropy(&DensityMatrix::new(self.main.apply_matrix(&mix)?)?).value();
        let he_bar = entropy(&DensityMatrix::new(self.env.apply_matrix(&mix)?)?).value();
        let (hb0, he0) = self.output_entropies(rho)?;
        let (hb1, he1) = self.output_entropies(rho_hat)?;
        let ib = hb_bar - lambda * hb0 - (1.0 - lambda) * hb1;
        let ie = he_bar - lambda * he0 - (1.0 - lambda) * he1;
        Ok(ib - ie)
    }

    /// Slope of `f_lambda` at zero by Richardson-extrapolated finite differences
    /// on the step schedule [`SLOPE_STEPS`]. Central differences when the
    /// outputs stay positive for small negative `lambda`, forward otherwise.
    pub fn f_slope_at_zero(&self, rho: &DensityMatrix, rho_hat: &DensityMatrix) -> Result<f64> {
        match self.divergence_gap(rho, rho_hat)? {
            Gap::Bits(x) if x.is_finite() => {}
            other => {
                return Err(Error::Indeterminate(format!(
                    "relative entropies diverge ({other:?}); slope at 0 is not finite"
                )))
            }
        }
        let f = |l: f64| self.f_extended(rho, rho_hat, l);
        match slope_central(f) {
            Ok(s) => Ok(s),
            Err(_) => slope_forward(f),
        }
    }
}

/// Finite-difference steps for `f'(0)`: `1e-3` halved twice.
pub const SLOPE_STEPS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

/// Central differences, extrapolated over the `h^2`, `h^4` error terms.
fn slope_central(f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let d: Vec<f64> = SLOPE_STEPS
        .iter()
        .map(|&h| Ok((f(h)? - f(-h)?) / (2.0 * h)))
        .collect::<Result<_>>()?;
    let r1a = (4.0 * d[1] - d[0]) / 3.0;
    let r1b = (4.0 * d[2] - d[1]) / 3.0;
    Ok((16.0 * r1b - r1a) / 15.0)
}

/// Forward differences, extrapolated over the `h`, `h^2` error terms.
fn slope_forward(f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    let f0 = f(0.0)?;
    let d: Vec<f64> = SLOPE_STEPS
        .iter()
        .map(|&h| Ok((f(h)? - f0) / h))
        .collect::<Result<_>>()?;
    let r1a = 2.0 * d[1] - d[0];
    let r1b = 2.0 * d[2] - d[1];
    Ok((4.0 * r1b - r1a) / 3.0)
}

/// `H(N_B(rho)) - H(N_E(rho))`
pub fn coherent_information(ch: &KrausChannel, rho: &DensityMatrix) -> Result<InfoValue> {
    Wiretap::new(ch).coherent_information(rho).map(InfoValue)
}

/// Holevo quantity `H(N(rho_bar)) - sum_u p_u H(N(rho_u))`.
pub fn cq_mutual_information(ens: &Ensemble, ch: &KrausChannel) -> Result<InfoValue> {
    if ens.dim() != ch.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "{}-dim ensemble into a channel on {} dims",
            ens.dim(),
            ch.dim_in()
        )));
    }
    let h_avg = entropy(&ch.apply(&ens.average())?).value();
    let mut cond = 0.0;
    for (p, s) in ens.iter() {
        if p > 0.0 {
            cond += p * entropy(&ch.apply(s)?).value();
        }
    }
    Ok(InfoValue(h_avg - cond))
}

/// `I(U;B) - I(U;E)`
pub fn private_information(ens: &Ensemble, ch: &KrausChannel) -> Result<InfoValue> {
    let ib = cq_mutual_information(ens, ch)?.value();
    let ie = cq_mutual_information(ens, &ch.complementary())?.value();
    Ok(InfoValue(ib - ie))
}

/// `D(N_B(rho) || N_B(rho_hat)) - D(N_E(rho) || N_E(rho_hat))`
pub fn divergence_gap(ch: &KrausChannel, rho: &DensityMatrix, rho_hat: &DensityMatrix) -> Result<Gap> {
    Wiretap::new(ch).divergence_gap(rho, rho_hat)
}

/// `f(lambda) = I(U_lambda;B) - I(U_lambda;E)` for the two-point ensemble
/// `{lambda: rho, 1 - lambda: rho_hat}`.
pub fn f_lambda(
    ch: &KrausChannel,
    rho: &DensityMatrix,
    rho_hat: &DensityMatrix,
    lambda: f64,
) -> Result<InfoValue> {
    Wiretap::new(ch).f_lambda(rho, rho_hat, lambda).map(InfoValue)
}

/// Finite-difference `f'(0)`; see [`Wiretap::f_slope_at_zero`].
pub fn f_slope_at_zero(ch: &KrausChannel, rho: &DensityMatrix, rho_hat: &DensityMatrix) -> Result<f64> {
    Wiretap::new(ch).f_slope_at_zero(rho, rho_hat)
}

/// An ensemble refined through the eigendecompositions of its members:
/// the label `X~ = (u, x)` determines `U = u`.
#[derive(Clone, Debug)]
pub struct EigenRefinement {
    /// `{P_U(u) alpha_{u,x}, |psi_{u,x}>}` over all pairs `(u, x)`.
    pub joint: Ensemble,
    /// For each `u`, the eigen-ensemble `{alpha_{u,x}, |psi_{u,x}>}` of `rho_u`.
    pub conditional: Vec<Ensemble>,
    pub weights: Vec<f64>,
}

pub fn eigen_refinement(ens: &Ensemble) -> EigenRefinement {
    let conditional: Vec<Ensemble> = ens.states().iter().map(Ensemble::eigen).collect();
    let mut probs = Vec::new();
    let mut states = Vec::new();
    for (pu, cond) in ens.probs().iter().zip(&conditional) {
        for (a, s) in cond.iter() {
            probs.push(pu * a);
            states.push(s.clone());
        }
    }
    let total: f64 = probs.iter().sum();
    let probs = probs.into_iter().map(|p| p / total).collect();
    EigenRefinement {
        joint: Ensemble { probs, states },
        conditional,
        weights: ens.probs().to_vec(),
    }
}

/// The three terms of the chain-rule split
/// `I(U;B) - I(U;E) = [I(X~;B) - I(X~;E)] - sum_u P_U(u) [I(X~;B|U=u) - I(X~;E|U=u)]`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ChainRule {
    pub private_information: f64,
    pub refined: f64,
    pub conditional: f64,
}

impl ChainRule {
    pub fn residual(&self) -> f64 {
        self.private_information - (self.refined - self.conditional)
    }
}

pub fn chain_rule(ens: &Ensemble, ch: &KrausChannel) -> Result<ChainRule> {
    let wt = Wiretap::new(ch);
    let refinement = eigen_refinement(ens);
    let mut conditional = 0.0;
    for (w, cond) in refinement.weights.iter().zip(&refinement.conditional) {
        conditional += w * wt.private_information(cond)?;
    }
    Ok(ChainRule {
        private_information: wt.private_information(ens)?,
        refined: wt.private_information(&refinement.joint)?,
        conditional,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{gallery, random_channel};
    use crate::qmat::c;
    use crate::rng::{random_density, random_full_rank, random_probabilities, random_pure, seeded};

    fn h2(p: f64) -> f64 {
        if p <= 0.0 || p >= 1.0 {
            return 0.0;
        }
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(entropy(&DensityMatrix::basis(3, 1)).value(), 0.0);
        assert!((entropy(&DensityMatrix::maximally_mixed(2)).value() - 1.0).abs() < 1e-15);
        let rho = DensityMatrix::new(CMatrix::diag(&[0.75, 0.25])).unwrap();
        // -(3/4) log2(3/4) - (1/4) log2(1/4)
        let expected = -0.75 * 0.75f64.log2() - 0.25 * 0.25f64.log2();
        assert!((entropy(&rho).value() - expected).abs() < 1e-15);
        assert!((entropy(&rho).value() - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn relative_entropy_examples() {
        let mut rng = seeded(1);
        let rho = random_density(&mut rng, 3);
        assert!(relative_entropy(&rho, &rho).unwrap().value().abs() < 1e-12);
        let zero = DensityMatrix::basis(2, 0);
        let d = relative_entropy(&zero, &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((d.value() - 1.0).abs() < 1e-14);
        let one = DensityMatrix::basis(2, 1);
        assert_eq!(relative_entropy(&zero, &one).unwrap(), InfoValue::INFINITE);
        // the reverse direction with a full-rank second argument is finite
        assert!(relative_entropy(&zero, &random_density(&mut rng, 2)).unwrap().is_finite());
        assert!(relative_entropy(&zero, &rho).is_err());
    }

    #[test]
    fn relative_entropy_commuting_matches_classical_kl() {
        let p = [0.5, 0.3, 0.2];
        let q = [0.2, 0.2, 0.6];
        let rho = DensityMatrix::new(CMatrix::diag(&p)).unwrap();
        let sigma = DensityMatrix::new(CMatrix::diag(&q)).unwrap();
        let kl: f64 = p.iter().zip(&q).map(|(a, b)| a * (a / b).log2()).sum();
        assert!((relative_entropy(&rho, &sigma).unwrap().value() - kl).abs() < 1e-14);
    }

    #[test]
    fn coherent_information_examples() {
        let id = gallery("identity", &[2.0]).unwrap();
        let v = coherent_information(&id, &DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((v.value() - 1.0).abs() < 1e-14);

        // AD(1/2): B and E marginals coincide for every input (Bloch-ball grid)
        let ad = gallery("ad", &[0.5]).unwrap();
        let steps = 6;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let (x, y, z) = (
                        -1.0 + 2.0 * i as f64 / steps as f64,
                        -1.0 + 2.0 * j as f64 / steps as f64,
                        -1.0 + 2.0 * k as f64 / steps as f64,
                    );
                    if x * x + y * y + z * z > 1.0 {
                        continue;
                    }
                    let m = CMatrix::new(
                        2,
                        2,
                        vec![c((1.0 + z) / 2.0, 0.0), c(x / 2.0, -y / 2.0), c(x / 2.0, y / 2.0), c((1.0 - z) / 2.0, 0.0)],
                    )
                    .unwrap();
                    let rho = DensityMatrix::new(m).unwrap();
                    assert!(coherent_information(&ad, &rho).unwrap().value().abs() < 1e-12);
                }
            }
        }

        let mut rng = seeded(2);
        let ch = random_channel(3, 2, 3, 4).unwrap();
        let psi = random_pure(&mut rng, 3);
        assert!(coherent_information(&ch, &psi).unwrap().value().abs() < 1e-9);
        assert!(coherent_information(&ch, &DensityMatrix::maximally_mixed(2)).is_err());
    }

    #[test]
    fn coherent_information_range() {
        let mut rng = seeded(3);
        for seed in 0..10 {
            let ch = random_channel(2, 3, 2, seed).unwrap();
            let v = coherent_information(&ch, &random_density(&mut rng, 2)).unwrap().value();
            assert!(v >= -(2f64.log2()) - 1e-12 && v <= 3f64.log2() + 1e-12);
        }
    }

    #[test]
    fn cq_mutual_information_examples() {
        let id = gallery("identity", &[2.0]).unwrap();
        let single = Ensemble::new(vec![1.0], vec![DensityMatrix::basis(2, 0)]).unwrap();
        assert_eq!(cq_mutual_information(&single, &id).unwrap().value(), 0.0);

        let ens = Ensemble::new(vec![0.5, 0.5], vec![DensityMatrix::basis(2, 0), DensityMatrix::basis(2, 1)]).unwrap();
        assert!((cq_mutual_information(&ens, &id).unwrap().value() - 1.0).abs() < 1e-14);

        let plus = DensityMatrix::pure(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let ens = Ensemble::new(vec![0.5, 0.5], vec![DensityMatrix::basis(2, 0), plus]).unwrap();
        let cos2 = (std::f64::consts::PI / 8.0).cos().powi(2);
        let oracle = h2(cos2);
        let v = cq_mutual_information(&ens, &id).unwrap().value();
        assert!((v - oracle).abs() < 1e-12);
        assert!((v - 0.600876).abs() < 1e-6);
    }

    #[test]
    fn private_information_examples() {
        let mut rng = seeded(4);
        let ch = random_channel(2, 2, 3, 8).unwrap();
        let single = Ensemble::new(vec![1.0], vec![random_density(&mut rng, 2)]).unwrap();
        assert!(private_information(&single, &ch).unwrap().value().abs() < 1e-12);

        // pure-state ensemble reduces to the coherent information of the average
        let states: Vec<DensityMatrix> = (0..3).map(|_| random_pure(&mut rng, 2)).collect();
        let ens = Ensemble::new(random_probabilities(&mut rng, 3), states).unwrap();
        let lhs = private_information(&ens, &ch).unwrap().value();
        let rhs = coherent_information(&ch, &ens.average()).unwrap().value();
        assert!((lhs - rhs).abs() < 1e-10);

        let id = gallery("identity", &[2.0]).unwrap();
        let states: Vec<DensityMatrix> = (0..3).map(|_| random_density(&mut rng, 2)).collect();
        let ens = Ensemble::new(random_probabilities(&mut rng, 3), states).unwrap();
        let pi = private_information(&ens, &id).unwrap().value();
        let ib = cq_mutual_information(&ens, &id).unwrap().value();
        assert!((pi - ib).abs() < 1e-14 && ib >= 0.0);
    }

    #[test]
    fn divergence_gap_examples() {
        let mut rng = seeded(5);
        let ch = random_channel(2, 2, 2, 3).unwrap();
        let rho = random_density(&mut rng, 2);
        assert_eq!(divergence_gap(&ch, &rho, &rho).unwrap().finite().map(|x| x.abs() < 1e-12), Some(true));

        let id = gallery("identity", &[2.0]).unwrap();
        let a = random_full_rank(&mut rng, 2, 0.05);
        let b = random_full_rank(&mut rng, 2, 0.05);
        let gap = divergence_gap(&id, &a, &b).unwrap().finite().unwrap();
        let d = relative_entropy(&a, &b).unwrap().value();
        assert!((gap - d).abs() < 1e-14 && gap >= 0.0);

        let ad = gallery("ad", &[0.5]).unwrap();
        let gap = divergence_gap(&ad, &a, &b).unwrap().finite().unwrap();
        // independent route: both relative entropies computed directly
        let db = relative_entropy(&ad.apply(&a).unwrap(), &ad.apply(&b).unwrap()).unwrap().value();
        let comp = ad.complementary();
        let de = relative_entropy(&comp.apply(&a).unwrap(), &comp.apply(&b).unwrap()).unwrap().value();
        assert!((db - de).abs() < 1e-12);
        assert!(gap.abs() < 1e-12);
    }

    #[test]
    fn divergence_gap_infinities() {
        let id = gallery("identity", &[2.0]).unwrap();
        let g = divergence_gap(&id, &DensityMatrix::basis(2, 0), &DensityMatrix::basis(2, 1)).unwrap();
        // identity complement is constant, so only the B side diverges
        assert_eq!(g, Gap::Bits(f64::INFINITY));

        // completely dephasing: B and E both see the basis label
        let deph = gallery("dephasing", &[1.0]).unwrap();
        let g = divergence_gap(&deph, &DensityMatrix::basis(2, 0), &DensityMatrix::basis(2, 1)).unwrap();
        assert_eq!(g, Gap::Indeterminate);
    }

    #[test]
    fn f_lambda_endpoints_and_slope() {
        let mut rng = seeded(6);
        let ch = gallery("ad", &[0.3]).unwrap();
        let a = random_full_rank(&mut rng, 2, 0.05);
        let b = random_full_rank(&mut rng, 2, 0.05);
        assert!(f_lambda(&ch, &a, &b, 0.0).unwrap().value().abs() < 1e-10);
        assert!(f_lambda(&ch, &a, &b, 1.0).unwrap().value().abs() < 1e-10);
        assert!(f_lambda(&ch, &a, &b, 1.5).is_err());

        let slope = f_slope_at_zero(&ch, &a, &b).unwrap();
        let gap = divergence_gap(&ch, &a, &b).unwrap().finite().unwrap();
        assert!((slope - gap).abs() <= 1e-4 * gap.abs().max(1e-2));
    }

    #[test]
    fn f_slope_indeterminate_for_disjoint_supports() {
        let deph = gallery("dephasing", &[1.0]).unwrap();
        let r = f_slope_at_zero(&deph, &DensityMatrix::basis(2, 0), &DensityMatrix::basis(2, 1));
        assert!(matches!(r, Err(Error::Indeterminate(_))));
    }

    #[test]
    fn difference_schemes_on_smooth_function() {
        // f(l) = sin(3 l) + l^2 e^l, f'(0) = 3
        let f = |l: f64| Ok((3.0 * l).sin() + l * l * l.exp());
        assert!((slope_central(f).unwrap() - 3.0).abs() < 1e-10);
        assert!((slope_forward(f).unwrap() - 3.0).abs() < 1e-6);
    }

    #[test]
    fn forward_scheme_matches_gap() {
        let mut rng = seeded(9);
        let wt = Wiretap::new(&gallery("ad", &[0.3]).unwrap());
        let a = random_full_rank(&mut rng, 2, 0.1);
        let b = random_full_rank(&mut rng, 2, 0.1);
        let slope = slope_forward(|l| wt.f_extended(&a, &b, l)).unwrap();
        let gap = wt.divergence_gap(&a, &b).unwrap().finite().unwrap();
        assert!((slope - gap).abs() < 1e-4 * gap.abs().max(1e-2), "{slope} vs {gap}");
    }

    #[test]
    fn central_scheme_refuses_nonpositive_outputs() {
        let wt = Wiretap::new(&gallery("identity", &[2.0]).unwrap());
        let rho = DensityMatrix::basis(2, 1);
        let rho_hat = DensityMatrix::new(CMatrix::diag(&[0.9996, 0.0004])).unwrap();
        assert!(slope_central(|l| wt.f_extended(&rho, &rho_hat, l)).is_err());
        assert!(wt.f_slope_at_zero(&rho, &rho_hat).is_ok());
    }

    #[test]
    fn ensemble_validation() {
        let s = DensityMatrix::basis(2, 0);
        assert!(Ensemble::new(vec![0.5, 0.4], vec![s.clone(), s.clone()]).is_err());
        assert!(Ensemble::new(vec![1.5, -0.5], vec![s.clone(), s.clone()]).is_err());
        assert!(Ensemble::new(vec![0.5, 0.5], vec![s.clone(), DensityMatrix::basis(3, 0)]).is_err());
        assert!(Ensemble::new(vec![], vec![]).is_err());
    }

    #[test]
    fn chain_rule_terms_balance() {
        let mut rng = seeded(7);
        let ch = random_channel(2, 3, 2, 11).unwrap();
        let states: Vec<DensityMatrix> = (0..3).map(|_| random_density(&mut rng, 2)).collect();
        let ens = Ensemble::new(random_probabilities(&mut rng, 3), states).unwrap();
        let cr = chain_rule(&ens, &ch).unwrap();
        assert!(cr.residual().abs() < 1e-10);
        // the refined term is the coherent information of the average
        let ic = coherent_information(&ch, &ens.average()).unwrap().value();
        assert!((cr.refined - ic).abs() < 1e-10);
    }
}
