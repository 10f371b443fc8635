//! Matrix-free difference operators along the block chain, their adjoints
//! and Gram compositions, plus spectra and condition numbers.
//!
//! Every row is `mlf * (x_{s+1} - x_s)` for a separator `s`; the coupling
//! separators form `Abar`, the rest form `A`, and `H` stacks all of them.
//! Adjoints scatter with literal-zero terms for missing rows so that the
//! partition identity `HᵀH x = AᵀA x + ĀᵀĀ x` holds bit-exactly and
//! support sets stay exact.

use crate::error::{Error, Result};
use crate::instance::{BlockVector, InstanceParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorTag {
    A,
    Abar,
    H,
    AAdj,
    AbarAdj,
    HAdj,
    AtA,
    AbarTAbar,
    HtH,
    AAt,
    AbarAbarT,
}

impl OperatorTag {
    pub fn in_dim(self, p: &InstanceParams) -> usize {
        use OperatorTag::*;
        match self {
            A | Abar | H | AtA | AbarTAbar | HtH => p.d,
            AAdj | AAt => p.n,
            AbarAdj | AbarAbarT => p.nbar,
            HAdj => (p.m - 1) * p.dbar,
        }
    }

    pub fn out_dim(self, p: &InstanceParams) -> usize {
        use OperatorTag::*;
        match self {
            AAdj | AbarAdj | HAdj | AtA | AbarTAbar | HtH => p.d,
            A | AAt => p.n,
            Abar | AbarAbarT => p.nbar,
            H => (p.m - 1) * p.dbar,
        }
    }
}

/// Rows `mlf*(x_{s+1} - x_s)` for the given 1-based separators, in order.
fn forward_rows(p: &InstanceParams, seps: &[usize], x: &[f64]) -> Vec<f64> {
    let db = p.dbar;
    let mut out = vec![0.0; seps.len() * db];
    for (r, &s) in seps.iter().enumerate() {
        let left = &x[(s - 1) * db..s * db];
        let right = &x[s * db..(s + 1) * db];
        let dst = &mut out[r * db..(r + 1) * db];
        for k in 0..db {
            dst[k] = p.mlf * (right[k] - left[k]);
        }
    }
    out
}

#[derive(Clone, Copy)]
enum RowGroup {
    All,
    Coupling,
    Rest,
}

impl RowGroup {
    /// Row-block index of separator `s` within this group, if present.
    fn row(self, p: &InstanceParams, s: usize) -> Option<usize> {
        match self {
            RowGroup::All => Some(s - 1),
            RowGroup::Coupling => p.row_in_abar(s),
            RowGroup::Rest => p.row_in_a(s),
        }
    }

}

/// Adjoint scatter: block `i` receives `mlf*z_{sep i-1} - mlf*z_{sep i}`,
/// with a literal `0.0` term wherever the separator is absent from the
/// group. Writing it this way (instead of skipping absent terms) keeps the
/// arithmetic of `AᵀA + ĀᵀĀ` identical, term by term, to `HᵀH`.
fn adjoint_scatter(p: &InstanceParams, group: RowGroup, z: &[f64]) -> Vec<f64> {
    let db = p.dbar;
    let mut out = vec![0.0; p.d];
    for i in 1..=p.m {
        let dst = &mut out[(i - 1) * db..i * db];
        let prev = if i >= 2 { group.row(p, i - 1) } else { None };
        let cur = if i <= p.m - 1 { group.row(p, i) } else { None };
        for k in 0..db {
            let term_prev = match prev {
                Some(r) => p.mlf * z[r * db + k],
                None => 0.0,
            };
            let term_cur = match cur {
                Some(r) => p.mlf * z[r * db + k],
                None => 0.0,
            };
            dst[k] = term_prev - term_cur;
        }
    }
    out
}

fn all_seps(p: &InstanceParams) -> Vec<usize> {
    (1..p.m).collect()
}

pub fn apply(p: &InstanceParams, tag: OperatorTag, v: &[f64]) -> Result<Vec<f64>> {
    if v.len() != tag.in_dim(p) {
        return Err(Error::DimensionMismatch {
            expected: tag.in_dim(p),
            got: v.len(),
        });
    }
    use OperatorTag::*;
    let out = match tag {
        A => forward_rows(p, &p.mc_seps, v),
        Abar => forward_rows(p, &p.m_seps, v),
        H => forward_rows(p, &all_seps(p), v),
        AAdj => adjoint_scatter(p, RowGroup::Rest, v),
        AbarAdj => adjoint_scatter(p, RowGroup::Coupling, v),
        HAdj => adjoint_scatter(p, RowGroup::All, v),
        AtA => adjoint_scatter(p, RowGroup::Rest, &forward_rows(p, &p.mc_seps, v)),
        AbarTAbar => adjoint_scatter(p, RowGroup::Coupling, &forward_rows(p, &p.m_seps, v)),
        HtH => {
            let seps = all_seps(p);
            adjoint_scatter(p, RowGroup::All, &forward_rows(p, &seps, v))
        }
        AAt => forward_rows(p, &p.mc_seps, &adjoint_scatter(p, RowGroup::Rest, v)),
        AbarAbarT => forward_rows(p, &p.m_seps, &adjoint_scatter(p, RowGroup::Coupling, v)),
    };
    Ok(out)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Deterministic start vector: all ones with a small LCG perturbation so
/// power iteration never lands exactly on a nodal vector.
fn seeded_start(dim: usize) -> Vec<f64> {
    let mut state: u64 = 0x243f_6a88_85a3_08d3;
    let mut v = Vec::with_capacity(dim);
    for _ in 0..dim {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        let u = (state >> 11) as f64 / (1u64 << 53) as f64;
        v.push(1.0 + 1e-3 * u);
    }
    v
}

const POWER_ITER_CAP: usize = 100_000;

/// Largest eigenvalue of a symmetric PSD operator by power iteration with
/// Rayleigh-quotient stopping.
fn power_lambda_max<F>(dim: usize, mut op: F, tol: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let mut v = seeded_start(dim);
    let nv = norm2(&v);
    for x in &mut v {
        *x /= nv;
    }
    let mut lambda = 0.0f64;
    for it in 0..POWER_ITER_CAP {
        let w = op(&v);
        let rayleigh = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return Ok(0.0);
        }
        for (dst, &src) in v.iter_mut().zip(&w) {
            *dst = src / nw;
        }
        let change = (rayleigh - lambda).abs();
        lambda = rayleigh;
        if it > 0 && change <= tol * lambda.max(f64::MIN_POSITIVE) {
            return Ok(lambda);
        }
    }
    Err(Error::NoConvergence {
        what: "power iteration",
        max_iters: POWER_ITER_CAP,
        last_change: f64::NAN,
    })
}

fn gram_of(tag: OperatorTag) -> OperatorTag {
    use OperatorTag::*;
    match tag {
        A | AAdj => AAt,
        Abar | AbarAdj => AbarAbarT,
        H | HAdj => HtH,
        gram => gram,
    }
}

/// Operator norm (largest singular value) via power iteration on the Gram,
/// relative tolerance 1e-10. For Gram tags the result is the largest
/// eigenvalue itself.
pub fn opnorm(p: &InstanceParams, tag: OperatorTag) -> Result<f64> {
    use OperatorTag::*;
    let gram = gram_of(tag);
    let dim = gram.in_dim(p);
    let lam = power_lambda_max(dim, |v| apply(p, gram, v).expect("dims fixed"), 1e-10)?;
    Ok(match tag {
        A | Abar | H | AAdj | AbarAdj | HAdj => lam.sqrt(),
        _ => lam,
    })
}

/// Closed-form eigenvalue `i` (1-based, ascending) of `HHᵀ`:
/// `4 m² lf² sin²(iπ / 2m)`, each appearing `dbar` times in the spectrum.
pub fn eig_hht(p: &InstanceParams, i: usize) -> Result<f64> {
    if i < 1 || i > p.m - 1 {
        return Err(Error::IndexOutOfRange {
            what: "eigenvalue index",
            got: i,
            max: p.m - 1,
        });
    }
    let s = (i as f64 * std::f64::consts::PI / (2.0 * p.m as f64)).sin();
    Ok(4.0 * p.mlf * p.mlf * s * s)
}

/// Condition number of the full separator stack (ratio of extreme singular
/// values), in closed form.
pub fn kappa_joint(p: &InstanceParams) -> f64 {
    let m = p.m as f64;
    let pi = std::f64::consts::PI;
    (((m - 1.0) * pi) / (2.0 * m)).sin() / (pi / (2.0 * m)).sin()
}

/// Condition number of `A` alone: largest singular value by power
/// iteration; smallest by the diagonal structure at m1 = 2 (disjoint rows)
/// or by spectrum-shifted power iteration otherwise (tol 1e-9).
pub fn kappa_a(p: &InstanceParams) -> Result<f64> {
    let lam_max = power_lambda_max(p.n, |v| apply(p, OperatorTag::AAt, v).expect("dims"), 1e-9)?;
    let lam_min = if p.m1 == 2 {
        // every row of A touches blocks no other row touches: AAᵀ = 2 mlf² I
        2.0 * p.mlf * p.mlf
    } else {
        // smallest eigenvalue of AAᵀ as s - λ_max(sI - AAᵀ); AAᵀ is
        // positive definite (full row rank), so this is the smallest
        // singular value squared
        let s = lam_max * 1.001;
        let top = power_lambda_max(
            p.n,
            |v| {
                let gv = apply(p, OperatorTag::AAt, v).expect("dims");
                v.iter().zip(&gv).map(|(&vi, &gi)| s * vi - gi).collect()
            },
            1e-9,
        )?;
        s - top
    };
    Ok((lam_max / lam_min).sqrt())
}

/// Mean block of `x`, anchored at block 1 so that a vector with identical
/// blocks averages to that block bit-exactly.
pub fn block_average(p: &InstanceParams, x: &BlockVector) -> Vec<f64> {
    let db = p.dbar;
    let first = x.block(0);
    let mut acc = vec![0.0; db];
    for i in 1..p.m {
        let b = x.block(i);
        for k in 0..db {
            acc[k] += b[k] - first[k];
        }
    }
    let inv = 1.0 / p.m as f64;
    for (k, a) in acc.iter_mut().enumerate() {
        *a = first[k] + *a * inv;
    }
    acc
}

/// Projection onto the null space of `H` (all-blocks-equal vectors):
/// replaces every block by the block average.
pub fn null_project_h(p: &InstanceParams, x: &BlockVector) -> BlockVector {
    let avg = block_average(p, x);
    let mut out = BlockVector::zeros(p.m, p.dbar);
    for i in 0..p.m {
        out.block_mut(i).copy_from_slice(&avg);
    }
    out
}
