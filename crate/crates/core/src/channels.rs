//! Quantum channels in Kraus form, their Stinespring dilations and complements.
//!
//! A channel with Kraus operators `K_0 .. K_{k-1}` is dilated as
//! `V = sum_i K_i ⊗ |i>_E`, so the environment dimension is always the Kraus
//! count. Row index of `V` is `b * dim_e + e` (output first, environment second).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::qmat::{c, partial_trace, CMatrix, DensityMatrix, C64};
use crate::rng;
use crate::{Error, Result};

/// Completeness residual accepted for an in-memory channel.
pub const COMPLETENESS_TOL: f64 = 1e-9;
/// Completeness residual accepted when reading a channel-spec file.
pub const FILE_COMPLETENESS_TOL: f64 = 1e-6;
/// Kraus counts above this trigger a warning in [`KrausChannel::tensor_power`].
pub const KRAUS_COUNT_WARN: usize = 256;

#[derive(Clone, Debug)]
pub struct KrausChannel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<CMatrix>,
}

impl KrausChannel {
    /// Checks shapes and trace preservation to [`COMPLETENESS_TOL`].
    pub fn new(dim_in: usize, dim_out: usize, kraus: Vec<CMatrix>) -> Result<Self> {
        let ch = Self::new_unchecked(dim_in, dim_out, kraus)?;
        let res = ch.completeness_residual();
        if res > COMPLETENESS_TOL {
            return Err(Error::NotTracePreserving(res));
        }
        Ok(ch)
    }

    /// Shape checks only; the map need not be trace preserving.
    pub fn new_unchecked(dim_in: usize, dim_out: usize, kraus: Vec<CMatrix>) -> Result<Self> {
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::InvalidParameter("channel dimensions must be positive".into()));
        }
        if kraus.is_empty() {
            return Err(Error::InvalidParameter("channel needs at least one Kraus operator".into()));
        }
        for (i, k) in kraus.iter().enumerate() {
            if k.rows() != dim_out || k.cols() != dim_in {
                return Err(Error::DimensionMismatch(format!(
                    "Kraus operator {i} is {}x{}, expected {dim_out}x{dim_in}",
                    k.rows(),
                    k.cols()
                )));
            }
        }
        Ok(Self {
            dim_in,
            dim_out,
            kraus,
        })
    }

    /// Restores completeness by `K_i <- K_i M^{-1/2}` with `M = sum K_i^dagger K_i`.
    pub fn renormalized(dim_in: usize, dim_out: usize, kraus: Vec<CMatrix>) -> Result<Self> {
        let ch = Self::new_unchecked(dim_in, dim_out, kraus)?;
        let m = ch.gram();
        let eig = crate::qmat::hermitian_eig(&m)?;
        if eig.min_value() <= 1e-14 {
            return Err(Error::NotFullRank(eig.min_value()));
        }
        let inv_sqrt: Vec<f64> = eig.values.iter().map(|x| 1.0 / x.sqrt()).collect();
        let w = eig.reconstruct_with(&inv_sqrt);
        let kraus = ch.kraus.iter().map(|k| k * &w).collect();
        Self::new(dim_in, dim_out, kraus)
    }

    #[inline]
    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    #[inline]
    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    /// Environment dimension of the canonical dilation.
    #[inline]
    pub fn dim_env(&self) -> usize {
        self.kraus.len()
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// `sum_i K_i^dagger K_i`
    pub fn gram(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim_in, self.dim_in);
        for k in &self.kraus {
            m = &m + &k.adjoint_mul(k);
        }
        m
    }

    /// `||sum_i K_i^dagger K_i - I||_F`
    pub fn completeness_residual(&self) -> f64 {
        (&self.gram() - &CMatrix::identity(self.dim_in)).frobenius_norm()
    }

    /// `sum_i K_i X K_i^dagger` for an arbitrary `dim_in x dim_in` operator.
    pub fn apply_matrix(&self, x: &CMatrix) -> Result<CMatrix> {
        if x.rows() != self.dim_in || x.cols() != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "input is {}x{}, channel expects {}x{}",
                x.rows(),
                x.cols(),
                self.dim_in,
                self.dim_in
            )));
        }
        let mut out = CMatrix::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out = &out + &k.sandwich(x);
        }
        Ok(out)
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        DensityMatrix::from_psd(self.apply_matrix(rho.matrix())?)
    }

    pub fn stinespring(&self) -> StinespringIsometry {
        let dim_e = self.dim_env();
        let v = CMatrix::from_fn(self.dim_out * dim_e, self.dim_in, |row, a| {
            let (b, e) = (row / dim_e, row % dim_e);
            self.kraus[e][(b, a)]
        });
        StinespringIsometry {
            dim_in: self.dim_in,
            dim_b: self.dim_out,
            dim_e,
            v,
        }
    }

    /// Channel to the environment, `rho -> Tr_B[V rho V^dagger]`.
    ///
    /// Its Kraus operators are indexed by the output basis:
    /// `(K~_b)_{e,a} = <b,e|V|a> = (K_e)_{b,a}`.
    pub fn complementary(&self) -> KrausChannel {
        let dim_e = self.dim_env();
        let kraus = (0..self.dim_out)
            .map(|b| CMatrix::from_fn(dim_e, self.dim_in, |e, a| self.kraus[e][(b, a)]))
            .collect();
        KrausChannel {
            dim_in: self.dim_in,
            dim_out: dim_e,
            kraus,
        }
    }

    /// Choi matrix `(id ⊗ N)(|Ω><Ω|)`, `|Ω> = sum_i |ii>` unnormalized, ordered input ⊗ output.
    pub fn choi(&self) -> CMatrix {
        let (din, dout) = (self.dim_in, self.dim_out);
        let n = din * dout;
        let mut j = CMatrix::zeros(n, n);
        for k in &self.kraus {
            // (id ⊗ K)|Ω> has component (i, o) = K[o, i]
            let v: Vec<C64> = (0..n).map(|idx| k[(idx % dout, idx / dout)]).collect();
            for r in 0..n {
                if v[r].re == 0.0 && v[r].im == 0.0 {
                    continue;
                }
                for col in 0..n {
                    j[(r, col)] += v[r] * v[col].conj();
                }
            }
        }
        j
    }

    /// Kraus set of `self ⊗ other`.
    pub fn tensor(&self, other: &KrausChannel) -> KrausChannel {
        let kraus = self
            .kraus
            .iter()
            .flat_map(|a| other.kraus.iter().map(move |b| a.kron(b)))
            .collect();
        KrausChannel {
            dim_in: self.dim_in * other.dim_in,
            dim_out: self.dim_out * other.dim_out,
            kraus,
        }
    }

    pub fn tensor_power(&self, n: usize) -> Result<KrausChannel> {
        if n == 0 {
            return Err(Error::InvalidParameter("tensor power needs n >= 1".into()));
        }
        let count = (self.kraus.len() as u128).saturating_pow(n as u32);
        if count > KRAUS_COUNT_WARN as u128 {
            log::warn!("tensor power n={n} produces {count} Kraus operators");
        }
        let mut out = self.clone();
        for _ in 1..n {
            out = out.tensor(self);
        }
        Ok(out)
    }

    /// `rho -> conj(N(conj(rho)))`: every Kraus operator conjugated entry-wise.
    pub fn conjugate(&self) -> KrausChannel {
        KrausChannel {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            kraus: self.kraus.iter().map(CMatrix::conj).collect(),
        }
    }

    pub fn to_spec(&self) -> ChannelSpec {
        ChannelSpec {
            dim_in: self.dim_in,
            dim_out: self.dim_out,
            kraus: self
                .kraus
                .iter()
                .map(|k| {
                    KrausEntry::Rows(
                        (0..k.rows())
                            .map(|r| (0..k.cols()).map(|cc| [k[(r, cc)].re, k[(r, cc)].im]).collect())
                            .collect(),
                    )
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_spec()).expect("channel spec serializes")
    }

    /// Parses a channel-spec document. With `validate`, a completeness residual
    /// above [`FILE_COMPLETENESS_TOL`] is rejected and smaller residuals are
    /// removed by renormalizing the Kraus set.
    pub fn from_json(text: &str, validate: bool) -> Result<KrausChannel> {
        let spec: ChannelSpec =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.into_channel(validate)
    }
}

/// Sequential composition: `first`, then `second`. Kraus set `{L_j K_i}`.
pub fn compose(second: &KrausChannel, first: &KrausChannel) -> Result<KrausChannel> {
    if second.dim_in != first.dim_out {
        return Err(Error::DimensionMismatch(format!(
            "cannot feed a {}-dim output into a {}-dim input",
            first.dim_out, second.dim_in
        )));
    }
    let kraus = second
        .kraus
        .iter()
        .flat_map(|l| first.kraus.iter().map(move |k| l * k))
        .collect();
    Ok(KrausChannel {
        dim_in: first.dim_in,
        dim_out: second.dim_out,
        kraus,
    })
}

/// Channel action recovered from a Choi matrix: `N(X) = Tr_in[(X^T ⊗ I) J]`.
pub fn apply_choi(choi: &CMatrix, dim_in: usize, dim_out: usize, x: &CMatrix) -> Result<CMatrix> {
    if choi.rows() != dim_in * dim_out || x.rows() != dim_in {
        return Err(Error::DimensionMismatch("Choi matrix / input dims".into()));
    }
    let lifted = &x.transpose().kron(&CMatrix::identity(dim_out)) * choi;
    partial_trace(&lifted, &[dim_in, dim_out], &[1])
}

#[derive(Clone, Debug)]
pub struct StinespringIsometry {
    pub dim_in: usize,
    pub dim_b: usize,
    pub dim_e: usize,
    /// `(dim_b * dim_e) x dim_in`
    pub v: CMatrix,
}

impl StinespringIsometry {
    /// `||V^dagger V - I||_F`
    pub fn isometry_residual(&self) -> f64 {
        (&self.v.adjoint_mul(&self.v) - &CMatrix::identity(self.dim_in)).frobenius_norm()
    }

    /// Joint output `V rho V^dagger` on `B ⊗ E`.
    pub fn dilate(&self, rho: &CMatrix) -> CMatrix {
        self.v.sandwich(rho)
    }

    pub fn output_b(&self, rho: &CMatrix) -> CMatrix {
        partial_trace(&self.dilate(rho), &[self.dim_b, self.dim_e], &[0])
            .expect("dilation dims are consistent")
    }

    pub fn output_e(&self, rho: &CMatrix) -> CMatrix {
        partial_trace(&self.dilate(rho), &[self.dim_b, self.dim_e], &[1])
            .expect("dilation dims are consistent")
    }
}

/// Channel-spec file contents.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub dim_in: usize,
    pub dim_out: usize,
    pub kraus: Vec<KrausEntry>,
}

/// One Kraus operator as `[re, im]` pairs, either nested by rows or flat row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KrausEntry {
    Rows(Vec<Vec<[f64; 2]>>),
    Flat(Vec<[f64; 2]>),
}

impl ChannelSpec {
    pub fn into_channel(self, validate: bool) -> Result<KrausChannel> {
        let (din, dout) = (self.dim_in, self.dim_out);
        let mut ops = Vec::with_capacity(self.kraus.len());
        for (i, entry) in self.kraus.into_iter().enumerate() {
            let flat: Vec<[f64; 2]> = match entry {
                KrausEntry::Rows(rows) => {
                    if rows.len() != dout || rows.iter().any(|r| r.len() != din) {
                        return Err(Error::Parse(format!(
                            "Kraus operator {i} is not {dout}x{din}"
                        )));
                    }
                    rows.into_iter().flatten().collect()
                }
                KrausEntry::Flat(v) => v,
            };
            let data = flat.into_iter().map(|[re, im]| c(re, im)).collect();
            ops.push(CMatrix::new(dout, din, data).map_err(|e| Error::Parse(format!("Kraus operator {i}: {e}")))?);
        }
        let ch = KrausChannel::new_unchecked(din, dout, ops).map_err(|e| Error::Parse(e.to_string()))?;
        if !validate {
            return Ok(ch);
        }
        let res = ch.completeness_residual();
        if res > FILE_COMPLETENESS_TOL {
            return Err(Error::NotTracePreserving(res));
        }
        if res > COMPLETENESS_TOL {
            return KrausChannel::renormalized(din, dout, ch.kraus);
        }
        Ok(ch)
    }
}

/// Gallery identifier `name:param1[,param2...]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GalleryId {
    pub name: String,
    pub params: Vec<f64>,
}

impl FromStr for GalleryId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = match s.split_once(':') {
            Some((n, r)) => (n, Some(r)),
            None => (s, None),
        };
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::Parse(format!("empty channel name in {s:?}")));
        }
        let params = match rest {
            None => Vec::new(),
            Some(r) if r.trim().is_empty() => Vec::new(),
            Some(r) => r
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Parse(format!("bad parameter {p:?} in {s:?}")))
                })
                .collect::<Result<_>>()?,
        };
        Ok(GalleryId {
            name: name.to_string(),
            params,
        })
    }
}

impl fmt::Display for GalleryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|p| p.to_string()).collect();
            write!(f, ":{}", ps.join(","))?;
        }
        Ok(())
    }
}

impl GalleryId {
    pub fn build(&self) -> Result<KrausChannel> {
        gallery(&self.name, &self.params)
    }
}

fn probability(name: &str, params: &[f64], idx: usize) -> Result<f64> {
    let p = *params
        .get(idx)
        .ok_or_else(|| Error::InvalidParameter(format!("{name} needs a parameter in [0, 1]")))?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!("{name} parameter {p} outside [0, 1]")));
    }
    Ok(p)
}

fn count(name: &str, params: &[f64], idx: usize, default: Option<usize>) -> Result<usize> {
    match params.get(idx) {
        None => default.ok_or_else(|| Error::InvalidParameter(format!("{name}: missing parameter {idx}"))),
        Some(&x) if x >= 1.0 && x.fract() == 0.0 && x <= 64.0 => Ok(x as usize),
        Some(&x) => Err(Error::InvalidParameter(format!("{name}: {x} is not a dimension"))),
    }
}

/// Standard test channels.
///
/// | name | params | action |
/// |---|---|---|
/// | `identity` / `id` | `d` (default 2) | identity |
/// | `amplitude_damping` / `ad` | `γ` | qubit decay with probability `γ` |
/// | `dephasing` | `p` | `(1 - p/2) ρ + (p/2) ZρZ`; `p = 1` fully dephases |
/// | `phase_flip` | `p` | `(1 - p) ρ + p ZρZ` |
/// | `depolarizing` / `depol` | `p[, d]` | `(1 - p) ρ + p I/d` |
/// | `erasure` | `p[, d]` | erasure to a flag state `|d>` |
/// | `random` | `d_in, d_out, k, seed` | random isometry split into `k` Kraus operators |
pub fn gallery(name: &str, params: &[f64]) -> Result<KrausChannel> {
    match name {
        "identity" | "id" => {
            let d = count(name, params, 0, Some(2))?;
            KrausChannel::new(d, d, vec![CMatrix::identity(d)])
        }
        "amplitude_damping" | "ad" => {
            let g = probability(name, params, 0)?;
            let k0 = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, (1.0 - g).sqrt()])?;
            let k1 = CMatrix::from_real(2, 2, &[0.0, g.sqrt(), 0.0, 0.0])?;
            KrausChannel::new(2, 2, vec![k0, k1])
        }
        "dephasing" => {
            let p = probability(name, params, 0)?;
            z_flip(p / 2.0)
        }
        "phase_flip" => {
            let p = probability(name, params, 0)?;
            z_flip(p)
        }
        "depolarizing" | "depol" => {
            let p = probability(name, params, 0)?;
            let d = count(name, params, 1, Some(2))?;
            depolarizing(p, d)
        }
        "erasure" => {
            let p = probability(name, params, 0)?;
            let d = count(name, params, 1, Some(2))?;
            let mut kraus = vec![CMatrix::from_fn(d + 1, d, |r, cc| {
                if r == cc {
                    c((1.0 - p).sqrt(), 0.0)
                } else {
                    c(0.0, 0.0)
                }
            })];
            for i in 0..d {
                let mut k = CMatrix::zeros(d + 1, d);
                k[(d, i)] = c(p.sqrt(), 0.0);
                kraus.push(k);
            }
            KrausChannel::new(d, d + 1, kraus)
        }
        "random" => {
            if params.len() != 4 {
                return Err(Error::InvalidParameter(
                    "random needs d_in,d_out,k,seed".into(),
                ));
            }
            let din = count(name, params, 0, None)?;
            let dout = count(name, params, 1, None)?;
            let k = count(name, params, 2, None)?;
            let seed = params[3];
            if seed < 0.0 || seed.fract() != 0.0 {
                return Err(Error::InvalidParameter(format!("random: bad seed {seed}")));
            }
            random_channel(din, dout, k, seed as u64)
        }
        other => Err(Error::UnknownChannel(other.to_string())),
    }
}

fn z_flip(p: f64) -> Result<KrausChannel> {
    let k0 = CMatrix::identity(2).scale_real((1.0 - p).sqrt());
    let k1 = CMatrix::diag(&[1.0, -1.0]).scale_real(p.sqrt());
    KrausChannel::new(2, 2, vec![k0, k1])
}

fn depolarizing(p: f64, d: usize) -> Result<KrausChannel> {
    let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / d as f64);
    let shift = CMatrix::from_fn(d, d, |r, cc| if r == (cc + 1) % d { c(1.0, 0.0) } else { c(0.0, 0.0) });
    let clock = CMatrix::from_fn(d, d, |r, cc| if r == cc { omega.powu(r as u32) } else { c(0.0, 0.0) });
    let dd = (d * d) as f64;
    let mut kraus = Vec::with_capacity(d * d);
    let mut xa = CMatrix::identity(d);
    for a in 0..d {
        let mut zb = CMatrix::identity(d);
        for b in 0..d {
            let w = if a == 0 && b == 0 {
                (1.0 - p + p / dd).sqrt()
            } else {
                (p / dd).sqrt()
            };
            kraus.push((&xa * &zb).scale_real(w));
            zb = &zb * &clock;
        }
        xa = &xa * &shift;
    }
    KrausChannel::new(d, d, kraus)
}

/// Random channel from a random `(d_out·k) x d_in` isometry, cut into `k` blocks.
pub fn random_channel(dim_in: usize, dim_out: usize, k: usize, seed: u64) -> Result<KrausChannel> {
    if dim_out * k < dim_in {
        return Err(Error::InvalidParameter(format!(
            "random channel needs d_out*k >= d_in (got {dim_out}*{k} < {dim_in})"
        )));
    }
    let mut rng = rng::seeded(seed);
    let v = rng::random_isometry(&mut rng, dim_out * k, dim_in);
    let kraus = (0..k)
        .map(|i| CMatrix::from_fn(dim_out, dim_in, |b, a| v[(i * dim_out + b, a)]))
        .collect();
    KrausChannel::new(dim_in, dim_out, kraus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropic::entropy;
    use crate::qmat::{frobenius_distance, tensor};
    use crate::rng::{random_density, random_pure, seeded};

    fn ad(g: f64) -> KrausChannel {
        gallery("ad", &[g]).unwrap()
    }

    #[test]
    fn rejects_non_trace_preserving() {
        let k = CMatrix::identity(2).scale_real(0.9);
        assert!(matches!(
            KrausChannel::new(2, 2, vec![k]),
            Err(Error::NotTracePreserving(_))
        ));
        assert!(KrausChannel::new(2, 2, vec![]).is_err());
        assert!(KrausChannel::new(2, 2, vec![CMatrix::identity(3)]).is_err());
    }

    #[test]
    fn stinespring_identity() {
        let s = gallery("identity", &[2.0]).unwrap().stinespring();
        assert_eq!(s.dim_e, 1);
        assert_eq!(s.v, CMatrix::identity(2));
    }

    #[test]
    fn stinespring_is_isometry_and_reproduces_channel() {
        let s = ad(0.3).stinespring();
        assert_eq!((s.v.rows(), s.v.cols()), (4, 2));
        assert!(s.isometry_residual() < 1e-12);

        let mut rng = seeded(4);
        let ch = random_channel(3, 2, 3, 9).unwrap();
        let s = ch.stinespring();
        for _ in 0..10 {
            let rho = random_density(&mut rng, 3);
            // oracle: direct Kraus sum
            let mut direct = CMatrix::zeros(2, 2);
            for k in ch.kraus() {
                direct = &direct + &(&(k * rho.matrix()) * &k.adjoint());
            }
            assert!(frobenius_distance(&s.output_b(rho.matrix()), &direct).unwrap() < 1e-9);
            let env = ch.complementary().apply_matrix(rho.matrix()).unwrap();
            assert!(frobenius_distance(&s.output_e(rho.matrix()), &env).unwrap() < 1e-9);
        }
    }

    #[test]
    fn apply_examples() {
        let id = gallery("identity", &[2.0]).unwrap();
        let mut rng = seeded(2);
        let rho = random_density(&mut rng, 2);
        assert!(id.apply(&rho).unwrap().distance(&rho) < 1e-15);

        let plus = DensityMatrix::pure(&[c(1.0, 0.0), c(1.0, 0.0)]).unwrap();
        let out = gallery("dephasing", &[1.0]).unwrap().apply(&plus).unwrap();
        assert!(out.matrix().max_abs_diff(&CMatrix::diag(&[0.5, 0.5])) < 1e-15);

        for g in [0.0, 0.2, 0.7, 1.0] {
            let out = ad(g).apply(&DensityMatrix::basis(2, 1)).unwrap();
            assert!(out.matrix().max_abs_diff(&CMatrix::diag(&[g, 1.0 - g])) < 1e-15);
        }
        assert!(id.apply(&DensityMatrix::maximally_mixed(3)).is_err());
    }

    #[test]
    fn complementary_examples() {
        let comp = gallery("identity", &[2.0]).unwrap().complementary();
        assert_eq!(comp.dim_out(), 1);
        let mut rng = seeded(6);
        let out = comp.apply(&random_density(&mut rng, 2)).unwrap();
        assert!((out.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);

        let out = ad(0.3).complementary().apply(&DensityMatrix::basis(2, 0)).unwrap();
        assert!(entropy(&out).value().abs() < 1e-12);

        // AD complement is AD(1 - γ) in the canonical dilation
        let comp = ad(0.3).complementary();
        let other = ad(0.7);
        for _ in 0..5 {
            let rho = random_density(&mut rng, 2);
            assert!(comp.apply(&rho).unwrap().distance(&other.apply(&rho).unwrap()) < 1e-14);
        }
    }

    #[test]
    fn pure_input_marginals_have_equal_entropy() {
        let mut rng = seeded(10);
        for seed in 0..5 {
            let ch = random_channel(3, 2, 4, seed).unwrap();
            let psi = random_pure(&mut rng, 3);
            let hb = entropy(&ch.apply(&psi).unwrap()).value();
            let he = entropy(&ch.complementary().apply(&psi).unwrap()).value();
            assert!((hb - he).abs() < 1e-8);
        }
    }

    #[test]
    fn double_complement_has_same_output_spectra() {
        let mut rng = seeded(12);
        let ch = random_channel(2, 3, 2, 5).unwrap();
        let cc = ch.complementary().complementary();
        assert_eq!(cc.dim_in(), ch.dim_in());
        for _ in 0..5 {
            let rho = random_density(&mut rng, 2);
            let a = ch.apply(&rho).unwrap();
            let b = cc.apply(&rho).unwrap();
            let sa = a.spectrum();
            let sb = b.spectrum();
            for i in 0..sa.len().max(sb.len()) {
                let x = sa.get(i).copied().unwrap_or(0.0);
                let y = sb.get(i).copied().unwrap_or(0.0);
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn choi_examples() {
        let j = gallery("identity", &[2.0]).unwrap().choi();
        let omega = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)];
        assert!(j.max_abs_diff(&CMatrix::outer(&omega)) < 1e-15);
        assert!((j.trace().re - 2.0).abs() < 1e-15);

        let j = gallery("depolarizing", &[1.0]).unwrap().choi();
        assert!(j.max_abs_diff(&CMatrix::identity(4).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn choi_duality_and_marginal() {
        let mut rng = seeded(13);
        let ch = random_channel(2, 3, 3, 1).unwrap();
        let j = ch.choi();
        let tr_out = partial_trace(&j, &[2, 3], &[0]).unwrap();
        assert!(tr_out.max_abs_diff(&CMatrix::identity(2)) < 1e-9);
        for _ in 0..5 {
            let rho = random_density(&mut rng, 2);
            let via_choi = apply_choi(&j, 2, 3, rho.matrix()).unwrap();
            assert!(frobenius_distance(&via_choi, &ch.apply_matrix(rho.matrix()).unwrap()).unwrap() < 1e-9);
        }
    }

    #[test]
    fn compose_examples() {
        let mut rng = seeded(14);
        let id = gallery("identity", &[2.0]).unwrap();
        let ch = ad(0.4);
        let deph = gallery("dephasing", &[1.0]).unwrap();
        let twice = compose(&deph, &deph).unwrap();
        let first = random_channel(2, 3, 2, 3).unwrap();
        let second = random_channel(3, 2, 2, 4).unwrap();
        let seq = compose(&second, &first).unwrap();
        for _ in 0..5 {
            let rho = random_density(&mut rng, 2);
            let a = compose(&id, &ch).unwrap().apply(&rho).unwrap();
            assert!(a.distance(&ch.apply(&rho).unwrap()) < 1e-14);
            assert!(twice.apply(&rho).unwrap().distance(&deph.apply(&rho).unwrap()) < 1e-14);
            let direct = second.apply(&first.apply(&rho).unwrap()).unwrap();
            assert!(seq.apply(&rho).unwrap().distance(&direct) < 1e-12);
        }
        assert!(compose(&first, &first).is_err());
    }

    #[test]
    fn tensor_power_examples() {
        let mut rng = seeded(15);
        let ch = ad(0.35);
        assert!(ch.tensor_power(0).is_err());
        let one = ch.tensor_power(1).unwrap();
        let rho = random_density(&mut rng, 2);
        assert!(one.apply(&rho).unwrap().distance(&ch.apply(&rho).unwrap()) < 1e-15);

        let id2 = gallery("identity", &[2.0]).unwrap().tensor_power(2).unwrap();
        assert_eq!(id2.kraus(), &[CMatrix::identity(4)]);

        let two = ch.tensor_power(2).unwrap();
        assert_eq!((two.dim_in(), two.dim_out(), two.kraus().len()), (4, 4, 4));
        let sigma = random_density(&mut rng, 2);
        let out = two.apply(&rho.tensor(&sigma)).unwrap();
        let product = tensor(ch.apply(&rho).unwrap().matrix(), ch.apply(&sigma).unwrap().matrix());
        assert!(out.matrix().max_abs_diff(&product) < 1e-14);
    }

    #[test]
    fn conjugate_channel_examples() {
        let mut rng = seeded(16);
        let a = ad(0.2);
        let rho = random_density(&mut rng, 2);
        assert!(a.conjugate().apply(&rho).unwrap().distance(&a.apply(&rho).unwrap()) < 1e-15);

        let phase = KrausChannel::new(2, 2, vec![CMatrix::identity(2).scale(c(0.0, 1.0))]).unwrap();
        assert!(phase.conjugate().apply(&rho).unwrap().distance(&rho) < 1e-15);

        let ch = random_channel(2, 2, 2, 17).unwrap();
        let out = ch.conjugate().apply(&rho).unwrap();
        let oracle = ch.apply_matrix(&rho.matrix().conj()).unwrap().conj();
        assert!(out.matrix().max_abs_diff(&oracle) < 1e-14);
    }

    #[test]
    fn gallery_examples() {
        let mut rng = seeded(18);
        let rho = random_density(&mut rng, 2);
        assert!(ad(0.0).apply(&rho).unwrap().distance(&rho) < 1e-15);
        let er = gallery("erasure", &[0.3]).unwrap();
        assert_eq!(er.dim_out(), er.dim_in() + 1);
        let r = gallery("random", &[2.0, 2.0, 2.0, 7.0]).unwrap();
        assert!(r.completeness_residual() < 1e-9);
        assert!(matches!(gallery("nope", &[]), Err(Error::UnknownChannel(_))));
        assert!(matches!(gallery("ad", &[1.5]), Err(Error::InvalidParameter(_))));
        assert!(gallery("depolarizing", &[0.3, 3.0]).unwrap().completeness_residual() < 1e-12);
    }

    #[test]
    fn depolarizing_qutrit_action() {
        let mut rng = seeded(19);
        let p = 0.4;
        let ch = gallery("depolarizing", &[p, 3.0]).unwrap();
        let rho = random_density(&mut rng, 3);
        let expected = &rho.matrix().scale_real(1.0 - p) + &CMatrix::identity(3).scale_real(p / 3.0);
        assert!(ch.apply(&rho).unwrap().matrix().max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn gallery_id_grammar() {
        let g: GalleryId = "ad:0.3".parse().unwrap();
        assert_eq!(g, GalleryId { name: "ad".into(), params: vec![0.3] });
        let g: GalleryId = "random:2,2,2,7".parse().unwrap();
        assert_eq!(g.params.len(), 4);
        assert_eq!(g.to_string(), "random:2,2,2,7");
        assert!("ad:x".parse::<GalleryId>().is_err());
        assert!(":1".parse::<GalleryId>().is_err());
    }

    #[test]
    fn json_spec_roundtrip_and_validation() {
        let ch = random_channel(2, 2, 3, 2).unwrap();
        let back = KrausChannel::from_json(&ch.to_json(), true).unwrap();
        for (a, b) in ch.kraus().iter().zip(back.kraus()) {
            assert!(a.max_abs_diff(b) < 1e-15);
        }

        let flat = r#"{"dim_in": 1, "dim_out": 2, "kraus": [[[0.6, 0.0], [0.0, 0.8]]]}"#;
        let ch = KrausChannel::from_json(flat, true).unwrap();
        assert_eq!(ch.dim_out(), 2);

        let bad = r#"{"dim_in": 2, "dim_out": 2, "kraus": [[[[1,0],[0,0]],[[0,0],[0.5,0]]]]}"#;
        assert!(matches!(KrausChannel::from_json(bad, true), Err(Error::NotTracePreserving(_))));
        assert!(KrausChannel::from_json(bad, false).is_ok());

        let nearly = r#"{"dim_in": 2, "dim_out": 2, "kraus": [[[[1.0000002,0],[0,0]],[[0,0],[1,0]]]]}"#;
        let ch = KrausChannel::from_json(nearly, true).unwrap();
        assert!(ch.completeness_residual() < 1e-12);

        assert!(matches!(KrausChannel::from_json("{", true), Err(Error::Parse(_))));
        let missing = r#"{"dim_in": 2, "kraus": []}"#;
        assert!(matches!(KrausChannel::from_json(missing, true), Err(Error::Parse(_))));
    }
}
