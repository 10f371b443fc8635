//! Problem data for the chained hard instance: block layout, separator
//! groups, the smooth per-block functions and their gradients, and the two
//! nonsmooth coupling terms.
//!
//! Zeros are load-bearing here. The whole construction rests on iterates
//! keeping exact zero coordinates until information has propagated far
//! enough along the chain, so every branch below returns literal `0.0`
//! where the closed form vanishes, and gradient formulas are evaluated
//! term by term so a zero factor zeroes its product exactly.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{self, OperatorTag};

/// User-facing construction parameters. `beta = None` selects the default
/// rule `1.05 * (50π + 1 + ‖A‖) * √m * eps`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InstanceConfig {
    pub eps: f64,
    pub lf: f64,
    pub m1: usize,
    pub m2: usize,
    pub dbar: usize,
    #[serde(default)]
    pub beta: Option<f64>,
}

impl Default for InstanceConfig {
    fn default() -> Self {
        InstanceConfig {
            eps: 0.1,
            lf: 1.0,
            m1: 2,
            m2: 2,
            dbar: 5,
            beta: None,
        }
    }
}

/// Which of the three block groups a block index falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    First,
    Middle,
    Last,
}

/// Fully resolved instance: dimensions, separator bookkeeping, operator
/// norms (power iteration, fixed seed) and the coupling weight `beta`.
#[derive(Debug, Clone)]
pub struct InstanceParams {
    pub eps: f64,
    pub lf: f64,
    pub m1: usize,
    pub m2: usize,
    pub dbar: usize,
    pub beta: f64,

    /// Number of blocks, `3 * m1 * m2`.
    pub m: usize,
    /// Total primal dimension, `m * dbar`.
    pub d: usize,
    /// Rows of `A` (separators outside the coupling set), `(m - 3*m2) * dbar`.
    pub n: usize,
    /// Rows of `Abar` (coupling separators), `(3*m2 - 1) * dbar`.
    pub nbar: usize,

    /// Row scale of every difference row: `m * lf`.
    pub mlf: f64,
    /// Argument scaling between the outer smooth functions and their
    /// unit-scale core: `√m * lf / (150π * eps)`.
    pub scale: f64,

    /// Coupling separators `{i*m1 : i = 1..3*m2-1}`, 1-based, ascending.
    pub m_seps: Vec<usize>,
    /// The remaining separators `{1..m-1} \ m_seps`, ascending.
    pub mc_seps: Vec<usize>,

    // Separator -> row-block lookup (index `sep - 1`), one of the two is
    // always Some: each separator is a row of exactly one operator.
    row_abar_of_sep: Vec<Option<usize>>,
    row_a_of_sep: Vec<Option<usize>>,

    /// Operator norms from power iteration at construction (tol 1e-10).
    pub a_norm: f64,
    pub abar_norm: f64,
    pub h_norm: f64,
}

impl InstanceParams {
    pub fn new(cfg: &InstanceConfig) -> Result<Self> {
        let InstanceConfig {
            eps,
            lf,
            m1,
            m2,
            dbar,
            beta,
        } = *cfg;
        if !(eps.is_finite() && eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParams(format!(
                "eps must lie in (0,1), got {eps}"
            )));
        }
        if !(lf.is_finite() && lf > 0.0) {
            return Err(Error::InvalidParams(format!(
                "lf must be positive, got {lf}"
            )));
        }
        if m1 < 2 {
            return Err(Error::InvalidParams(format!("m1 must be >= 2, got {m1}")));
        }
        if m2 < 1 {
            return Err(Error::InvalidParams(format!("m2 must be >= 1, got {m2}")));
        }
        if (m1 * m2) % 2 != 0 {
            return Err(Error::InvalidParams(format!(
                "m1*m2 must be even, got {m1}*{m2} = {}",
                m1 * m2
            )));
        }
        if dbar < 5 || dbar % 2 == 0 {
            return Err(Error::InvalidParams(format!(
                "dbar must be odd and >= 5, got {dbar}"
            )));
        }

        let m = 3 * m1 * m2;
        let d = m * dbar;
        let m_seps: Vec<usize> = (1..=(3 * m2 - 1)).map(|i| i * m1).collect();
        let mut in_m = vec![false; m]; // index sep-1, seps 1..=m-1
        for &s in &m_seps {
            in_m[s - 1] = true;
        }
        let mc_seps: Vec<usize> = (1..m).filter(|&s| !in_m[s - 1]).collect();
        let n = mc_seps.len() * dbar;
        let nbar = m_seps.len() * dbar;
        debug_assert_eq!(n, (m - 3 * m2) * dbar);
        debug_assert_eq!(nbar, (3 * m2 - 1) * dbar);

        let mut row_abar_of_sep = vec![None; m - 1];
        for (r, &s) in m_seps.iter().enumerate() {
            row_abar_of_sep[s - 1] = Some(r);
        }
        let mut row_a_of_sep = vec![None; m - 1];
        for (r, &s) in mc_seps.iter().enumerate() {
            row_a_of_sep[s - 1] = Some(r);
        }

        let mut params = InstanceParams {
            eps,
            lf,
            m1,
            m2,
            dbar,
            beta: f64::NAN, // resolved below, after ‖A‖ is known
            m,
            d,
            n,
            nbar,
            mlf: m as f64 * lf,
            scale: (m as f64).sqrt() * lf / (150.0 * PI * eps),
            m_seps,
            mc_seps,
            row_abar_of_sep,
            row_a_of_sep,
            a_norm: f64::NAN,
            abar_norm: f64::NAN,
            h_norm: f64::NAN,
        };
        params.a_norm = linops::opnorm(&params, OperatorTag::A)?;
        params.abar_norm = linops::opnorm(&params, OperatorTag::Abar)?;
        params.h_norm = linops::opnorm(&params, OperatorTag::H)?;

        let bound = params.beta_lower_bound();
        params.beta = match beta {
            None => 1.05 * bound,
            Some(b) => {
                if !(b.is_finite() && b > bound) {
                    return Err(Error::InvalidParams(format!(
                        "beta must exceed (50*pi + 1 + ||A||)*sqrt(m)*eps = {bound:.12e}, got {b}"
                    )));
                }
                b
            }
        };
        Ok(params)
    }

    /// Strict lower bound that any admissible `beta` must exceed.
    pub fn beta_lower_bound(&self) -> f64 {
        (50.0 * PI + 1.0 + self.a_norm) * (self.m as f64).sqrt() * self.eps
    }

    pub fn config(&self) -> InstanceConfig {
        InstanceConfig {
            eps: self.eps,
            lf: self.lf,
            m1: self.m1,
            m2: self.m2,
            dbar: self.dbar,
            beta: Some(self.beta),
        }
    }

    /// Block group of 1-based block index `i`; the thirds are exact since
    /// `m` is a multiple of 3.
    pub fn regime(&self, i: usize) -> Regime {
        debug_assert!(i >= 1 && i <= self.m);
        let third = self.m / 3;
        if i <= third {
            Regime::First
        } else if i <= 2 * third {
            Regime::Middle
        } else {
            Regime::Last
        }
    }

    /// Row-block index of separator `s` (1-based) within `Abar`, if `s` is
    /// a coupling separator.
    pub fn row_in_abar(&self, s: usize) -> Option<usize> {
        self.row_abar_of_sep[s - 1]
    }

    /// Row-block index of separator `s` within `A`, if `s` is not a
    /// coupling separator.
    pub fn row_in_a(&self, s: usize) -> Option<usize> {
        self.row_a_of_sep[s - 1]
    }
}

/// Primal vector split into `m` blocks of length `dbar`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockVector {
    pub dbar: usize,
    pub data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(m: usize, dbar: usize) -> Self {
        BlockVector {
            dbar,
            data: vec![0.0; m * dbar],
        }
    }

    pub fn from_vec(dbar: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len() % dbar, 0, "length must be a multiple of dbar");
        BlockVector { dbar, data }
    }

    /// Number of blocks.
    pub fn m(&self) -> usize {
        self.data.len() / self.dbar
    }

    /// Block `i`, 0-based.
    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[i * self.dbar..(i + 1) * self.dbar]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dbar..(i + 1) * self.dbar]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Vector in the row space of `Abar`, split into one block per coupling
/// separator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YVector {
    pub dbar: usize,
    pub data: Vec<f64>,
}

impl YVector {
    pub fn zeros(nblocks: usize, dbar: usize) -> Self {
        YVector {
            dbar,
            data: vec![0.0; nblocks * dbar],
        }
    }

    pub fn from_vec(dbar: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len() % dbar, 0, "length must be a multiple of dbar");
        YVector { dbar, data }
    }

    pub fn block(&self, r: usize) -> &[f64] {
        &self.data[r * self.dbar..(r + 1) * self.dbar]
    }

    pub fn block_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.dbar..(r + 1) * self.dbar]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Smooth switch: `0` for `u <= 0` (bit-exact), `1 - exp(-u^2)` otherwise.
pub fn psi(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        // exp_m1 keeps small-u accuracy: 1 - e^{-u^2} = -(e^{-u^2} - 1)
        -(-u * u).exp_m1()
    }
}

pub fn psi_prime(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else {
        2.0 * u * (-u * u).exp()
    }
}

/// Bounded increasing factor `4*atan(v) + 2π`, range `(0, 4π)`.
pub fn phi(v: f64) -> f64 {
    4.0 * v.atan() + 2.0 * PI
}

pub fn phi_prime(v: f64) -> f64 {
    4.0 / (1.0 + v * v)
}

/// Coupling of coordinates `j-1` and `j` (1-based `j`) inside one block.
fn varphi(z: &[f64], j: usize) -> f64 {
    if j == 1 {
        -psi(1.0) * phi(z[0])
    } else {
        psi(-z[j - 2]) * phi(-z[j - 1]) - psi(z[j - 2]) * phi(z[j - 1])
    }
}

fn h_for_regime(regime: Regime, dbar: usize, z: &[f64]) -> f64 {
    let base = varphi(z, 1);
    match regime {
        Regime::Middle => base,
        Regime::First => {
            let mut sum = 0.0;
            for j in 1..=(dbar - 1) / 2 {
                sum += varphi(z, 2 * j);
            }
            base + 3.0 * sum
        }
        Regime::Last => {
            let mut sum = 0.0;
            for j in 1..=(dbar - 1) / 2 {
                sum += varphi(z, 2 * j + 1);
            }
            base + 3.0 * sum
        }
    }
}

// The per-coordinate partials of `h`. Case structure (1-based coordinate k):
//   k = 1      : -psi(1)*phi'(z1) everywhere; the first group adds the
//                coupling into coordinate 2.
//   k even     : active coupling in the first group, feeder term in the
//                last group (toward k+1).
//   k odd >= 3 : feeder term in the first group (only while k+1 <= dbar-1),
//                active coupling in the last group.
// Every term carries a psi or psi' factor, so sparse inputs give exact
// zeros without special-casing.
fn grad_h_for_regime(regime: Regime, dbar: usize, z: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; dbar];
    g[0] = -psi(1.0) * phi_prime(z[0]);
    if regime == Regime::First {
        g[0] += 3.0 * (-psi_prime(-z[0]) * phi(-z[1]) - psi_prime(z[0]) * phi(z[1]));
    }
    if regime == Regime::Middle {
        return g;
    }
    for k in 2..=dbar {
        let i = k - 1; // 0-based
        let active = k % 2 == 0 && regime == Regime::First
            || k % 2 == 1 && regime == Regime::Last;
        if active {
            g[i] = 3.0 * (-psi(-z[i - 1]) * phi_prime(-z[i]) - psi(z[i - 1]) * phi_prime(z[i]));
        } else {
            // feeder toward coordinate k+1, present only if that coupling
            // exists in this group's sum
            let feeds = match regime {
                Regime::First => k % 2 == 1 && k + 1 <= dbar - 1,
                Regime::Last => k % 2 == 0 && k + 1 <= dbar,
                Regime::Middle => unreachable!(),
            };
            if feeds {
                g[i] = 3.0 * (-psi_prime(-z[i]) * phi(-z[i + 1]) - psi_prime(z[i]) * phi(z[i + 1]));
            }
        }
    }
    g
}

fn check_block_index(p: &InstanceParams, i: usize) -> Result<()> {
    if i < 1 || i > p.m {
        return Err(Error::IndexOutOfRange {
            what: "block index",
            got: i,
            max: p.m,
        });
    }
    Ok(())
}

fn check_block_len(p: &InstanceParams, z: &[f64]) -> Result<()> {
    if z.len() != p.dbar {
        return Err(Error::DimensionMismatch {
            expected: p.dbar,
            got: z.len(),
        });
    }
    Ok(())
}

/// Unit-scale block function for 1-based block `i`.
pub fn h(p: &InstanceParams, i: usize, z: &[f64]) -> Result<f64> {
    check_block_index(p, i)?;
    check_block_len(p, z)?;
    Ok(h_for_regime(p.regime(i), p.dbar, z))
}

pub fn grad_h(p: &InstanceParams, i: usize, z: &[f64]) -> Result<Vec<f64>> {
    check_block_index(p, i)?;
    check_block_len(p, z)?;
    Ok(grad_h_for_regime(p.regime(i), p.dbar, z))
}

/// Scaled block function: `300π·eps²/(m·lf) * h_i(scale·z)`.
pub fn f(p: &InstanceParams, i: usize, z: &[f64]) -> Result<f64> {
    check_block_index(p, i)?;
    check_block_len(p, z)?;
    let zs: Vec<f64> = z.iter().map(|&v| p.scale * v).collect();
    let coeff = 300.0 * PI * p.eps * p.eps / (p.m as f64 * p.lf);
    Ok(coeff * h_for_regime(p.regime(i), p.dbar, &zs))
}

/// Gradient of `f(i, ·)`: `(2·eps/√m) * grad_h` at the scaled point.
pub fn grad_f(p: &InstanceParams, i: usize, z: &[f64]) -> Result<Vec<f64>> {
    check_block_index(p, i)?;
    check_block_len(p, z)?;
    let zs: Vec<f64> = z.iter().map(|&v| p.scale * v).collect();
    let coeff = 2.0 * p.eps / (p.m as f64).sqrt();
    let mut g = grad_h_for_regime(p.regime(i), p.dbar, &zs);
    for v in &mut g {
        *v *= coeff;
    }
    Ok(g)
}

/// Separable smooth objective, summed in ascending block order.
pub fn f0(p: &InstanceParams, x: &BlockVector) -> f64 {
    assert_eq!(x.data.len(), p.d, "block vector has wrong dimension");
    let coeff = 300.0 * PI * p.eps * p.eps / (p.m as f64 * p.lf);
    let mut total = 0.0;
    let mut zs = vec![0.0; p.dbar];
    for i in 1..=p.m {
        let b = x.block(i - 1);
        for (dst, &v) in zs.iter_mut().zip(b) {
            *dst = p.scale * v;
        }
        total += coeff * h_for_regime(p.regime(i), p.dbar, &zs);
    }
    total
}

pub fn grad_f0(p: &InstanceParams, x: &BlockVector) -> BlockVector {
    assert_eq!(x.data.len(), p.d, "block vector has wrong dimension");
    let coeff = 2.0 * p.eps / (p.m as f64).sqrt();
    let mut out = BlockVector::zeros(p.m, p.dbar);
    let mut zs = vec![0.0; p.dbar];
    for i in 1..=p.m {
        let b = x.block(i - 1);
        for (dst, &v) in zs.iter_mut().zip(b) {
            *dst = p.scale * v;
        }
        let g = grad_h_for_regime(p.regime(i), p.dbar, &zs);
        for (dst, &v) in out.block_mut(i - 1).iter_mut().zip(&g) {
            *dst = coeff * v;
        }
    }
    out
}

/// Pairwise l1 coupling across the coupling separators.
pub fn g_val(p: &InstanceParams, x: &BlockVector) -> f64 {
    assert_eq!(x.data.len(), p.d, "block vector has wrong dimension");
    let mut total = 0.0;
    for &s in &p.m_seps {
        let a = x.block(s - 1);
        let b = x.block(s);
        for k in 0..p.dbar {
            total += (a[k] - b[k]).abs();
        }
    }
    p.beta * total
}

/// Scaled l1 norm on the `Abar` row space.
pub fn gbar_val(p: &InstanceParams, y: &YVector) -> f64 {
    assert_eq!(y.data.len(), p.nbar, "row vector has wrong dimension");
    let sum: f64 = y.data.iter().map(|v| v.abs()).sum();
    p.beta / p.mlf * sum
}

/// Composite objective `f0 + g`.
pub fn objective(p: &InstanceParams, x: &BlockVector) -> f64 {
    f0(p, x) + g_val(p, x)
}

/// Upper estimate for the objective gap from the zero start:
/// `3000π²·dbar·eps²/lf`.
pub fn delta_f0_upper(p: &InstanceParams) -> f64 {
    3000.0 * PI * PI * p.dbar as f64 * p.eps * p.eps / p.lf
}
