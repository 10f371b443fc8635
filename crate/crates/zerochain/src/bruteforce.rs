//! Slow, independent re-computations used as test oracles: dense operator
//! materialization, a self-contained Jacobi eigensolver, finite
//! differences, derivative-free proximal solves, and Lipschitz probing.
//!
//! Nothing here shares code paths with the closed forms it checks; that is
//! the point.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::InstanceParams;
use crate::linops::{self, OperatorTag};

/// Tiny deterministic LCG for test data; keeps unit tests free of any
/// seed-order coupling with the library's own RNG use.
pub struct TestRng {
    state: u64,
}

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng {
            state: seed ^ 0x9e37_79b9_7f4a_7c15,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self
            .state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.state
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }
}

const DENSE_MAX_BLOCKS: usize = 24;
const DENSE_MAX_DIM: usize = 2048;

fn dense_guard(p: &InstanceParams) -> Result<()> {
    if p.m > DENSE_MAX_BLOCKS || p.d > DENSE_MAX_DIM {
        return Err(Error::InvalidParams(format!(
            "dense materialization limited to m <= {DENSE_MAX_BLOCKS} and m*dbar <= {DENSE_MAX_DIM}, got m = {}, m*dbar = {}",
            p.m, p.d
        )));
    }
    Ok(())
}

/// Materialize an operator row-by-row by applying it to basis vectors.
pub fn dense(p: &InstanceParams, tag: OperatorTag) -> Result<Vec<Vec<f64>>> {
    dense_guard(p)?;
    let (rows, cols) = (tag.out_dim(p), tag.in_dim(p));
    let mut mat = vec![vec![0.0; cols]; rows];
    let mut e = vec![0.0; cols];
    for j in 0..cols {
        e[j] = 1.0;
        let col = linops::apply(p, tag, &e)?;
        e[j] = 0.0;
        for (r, &v) in col.iter().enumerate() {
            mat[r][j] = v;
        }
    }
    Ok(mat)
}

/// Write a dense matrix as CSV (plain numeric rows), for eyeballing
/// outside the test suite.
pub fn write_dense_csv(path: &std::path::Path, mat: &[Vec<f64>]) -> Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    for row in mat {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}

/// Central finite differences of a scalar function.
pub fn fd_grad<F>(f: F, point: &[f64], step: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    assert!(step > 0.0);
    let mut w = point.to_vec();
    let mut g = vec![0.0; point.len()];
    for k in 0..point.len() {
        let orig = w[k];
        w[k] = orig + step;
        let up = f(&w);
        w[k] = orig - step;
        let down = f(&w);
        w[k] = orig;
        g[k] = (up - down) / (2.0 * step);
    }
    g
}

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations.
/// Off-diagonal mass is driven below `tol * ||A||_F`; returns ascending
/// eigenvalues.
pub fn jacobi_eigenvalues(mat: &[Vec<f64>], tol: f64) -> Result<Vec<f64>> {
    let nd = mat.len();
    let mut a: Vec<Vec<f64>> = mat.to_vec();
    for r in 0..nd {
        assert_eq!(a[r].len(), nd, "matrix must be square");
    }
    let frob: f64 = a
        .iter()
        .flat_map(|row| row.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if frob == 0.0 {
        return Ok(vec![0.0; nd]);
    }
    let target = tol * frob;
    const MAX_SWEEPS: usize = 100;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for r in 0..nd {
            for c in (r + 1)..nd {
                off += a[r][c] * a[r][c];
            }
        }
        let off = (2.0 * off).sqrt();
        if off <= target {
            let mut eigs: Vec<f64> = (0..nd).map(|i| a[i][i]).collect();
            eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
            return Ok(eigs);
        }
        for pq in 0..nd {
            for q in (pq + 1)..nd {
                let pp = a[pq][pq];
                let qq = a[q][q];
                let pqv = a[pq][q];
                if pqv == 0.0 {
                    continue;
                }
                let theta = (qq - pp) / (2.0 * pqv);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..nd {
                    let akp = a[k][pq];
                    let akq = a[k][q];
                    a[k][pq] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..nd {
                    let apk = a[pq][k];
                    let aqk = a[q][k];
                    a[pq][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    Err(Error::NoConvergence {
        what: "Jacobi eigensolver",
        max_iters: MAX_SWEEPS,
        last_change: f64::NAN,
    })
}

/// Dense spectrum of a Gram operator (the symmetric tags only).
pub fn eig_dense(p: &InstanceParams, tag: OperatorTag) -> Result<Vec<f64>> {
    use OperatorTag::*;
    match tag {
        AtA | AbarTAbar | HtH | AAt | AbarAbarT => {}
        _ => {
            return Err(Error::InvalidParams(format!(
                "eig_dense needs a symmetric Gram tag, got {tag:?}"
            )))
        }
    }
    let mat = dense(p, tag)?;
    jacobi_eigenvalues(&mat, 1e-11)
}

/// Golden-section search on a unimodal function over [lo, hi], shrinking
/// the bracket below `tol`; returns the midpoint. Positional accuracy is
/// limited to ~sqrt(eps * |f|) by the comparison of nearly equal values;
/// use `golden_min_by` with a cancellation-free difference to go finer.
pub fn golden_min<F>(f: F, lo: f64, hi: f64, tol: f64) -> f64
where
    F: Fn(f64) -> f64,
{
    golden_min_by(|x1, x2| f(x1) - f(x2), lo, hi, tol)
}

/// Golden-section argmin driven by `delta(x1, x2) = f(x1) - f(x2)`. A
/// caller-supplied difference that scales with `x1 - x2` (instead of two
/// O(|f|) values that mostly cancel) keeps the ordering of probe points
/// trustworthy all the way down to bracket widths near `tol`.
pub fn golden_min_by<D>(delta: D, mut lo: f64, mut hi: f64, tol: f64) -> f64
where
    D: Fn(f64, f64) -> f64,
{
    debug_assert!(lo < hi);
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    while hi - lo > tol {
        if delta(x1, x2) <= 0.0 {
            hi = x2;
            x2 = x1;
            x1 = hi - inv_phi * (hi - lo);
        } else {
            lo = x1;
            x1 = x2;
            x2 = lo + inv_phi * (hi - lo);
        }
    }
    0.5 * (lo + hi)
}

/// Which proximal map a derivative-free solve should target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxKind {
    PairCoupling,
    SoftThreshold,
}

/// Derivative-free proximal solve.
///
/// The soft-threshold case minimizes `(w-y)²/2 + c|w|` per coordinate by
/// golden section. The pair case reduces the 2-d problem per coupled
/// coordinate to one dimension: for a fixed gap `s = w1 - w2`, the
/// quadratic part is minimized at `w1 = a - t, w2 = b + t` with
/// `t = (a - b - s)/2`, leaving `q(s) = (a-b-s)²/4 + c|s|` — a convex 1-d
/// problem solved by golden section. No thresholding formula is consulted.
/// Probe points are compared through algebraically expanded value
/// differences (every term carries a factor of `x1 - x2`), so the search
/// localizes minima to ~1e-12 instead of the ~sqrt(eps*|f|) floor that
/// subtracting two whole objective values would impose.
pub fn prox_numeric(p: &InstanceParams, kind: ProxKind, point: &[f64], eta: f64) -> Vec<f64> {
    assert!(eta > 0.0);
    match kind {
        ProxKind::SoftThreshold => {
            assert_eq!(point.len(), p.nbar);
            let c = eta * p.beta / p.mlf;
            point
                .iter()
                .map(|&y| {
                    let span = y.abs() + 2.0 * c + 1.0;
                    golden_min_by(
                        |x1, x2| 0.5 * (x1 - x2) * (x1 + x2 - 2.0 * y) + c * (x1.abs() - x2.abs()),
                        -span,
                        span,
                        1e-12,
                    )
                })
                .collect()
        }
        ProxKind::PairCoupling => {
            assert_eq!(point.len(), p.d);
            let c = eta * p.beta;
            let db = p.dbar;
            let mut out = point.to_vec();
            for &s in &p.m_seps {
                for k in 0..db {
                    let a = point[(s - 1) * db + k];
                    let b = point[s * db + k];
                    let span = (a - b).abs() + 4.0 * c + 1.0;
                    let gap = golden_min_by(
                        |g1, g2| {
                            (g2 - g1) * (2.0 * (a - b) - g1 - g2) / 4.0
                                + c * (g1.abs() - g2.abs())
                        },
                        -span,
                        span,
                        1e-12,
                    );
                    let t = (a - b - gap) / 2.0;
                    out[(s - 1) * db + k] = a - t;
                    out[s * db + k] = b + t;
                }
            }
            out
        }
    }
}

/// Empirical Lipschitz constant of a gradient map: the largest difference
/// quotient found over `trials` probes. The first half are independent
/// random pairs (alternating global and short-range); the second half
/// hill-climb around the best direction found so far, so that for linear
/// maps the probe closes in on the operator norm. Every reported value is
/// a genuine difference quotient, so the result never overshoots the true
/// modulus.
pub fn lipschitz_probe<F>(dim: usize, grad: F, trials: usize, seed: u64) -> f64
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    assert!(trials >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut best_x = vec![0.0; dim];
    let mut best_dir = vec![0.0; dim];
    let mut have_best = false;

    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();

    for t in 0..trials {
        let explore = t < trials / 2 || !have_best;
        let (x, xp): (Vec<f64>, Vec<f64>) = if explore {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if t % 2 == 0 {
                let xp = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                (x, xp)
            } else {
                let delta = 1e-3;
                let xp = x
                    .iter()
                    .map(|&v| v + delta * rng.gen_range(-1.0..1.0))
                    .collect();
                (x, xp)
            }
        } else {
            // jitter the best direction; anneal the jitter as trials run out
            let frac = (t - trials / 2) as f64 / (trials - trials / 2) as f64;
            let sigma = 0.5 * (1.0 - frac) + 0.02;
            let mut d: Vec<f64> = best_dir
                .iter()
                .map(|&v| v + sigma * rng.gen_range(-1.0..1.0))
                .collect();
            let nd = norm(&d);
            if nd == 0.0 {
                d = best_dir.clone();
            } else {
                for v in &mut d {
                    *v /= nd;
                }
            }
            let delta = 1e-3;
            let xp = best_x.iter().zip(&d).map(|(&v, &dv)| v + delta * dv).collect();
            (best_x.clone(), xp)
        };
        let diff: Vec<f64> = x.iter().zip(&xp).map(|(&a, &b)| a - b).collect();
        let dn = norm(&diff);
        if dn == 0.0 {
            continue;
        }
        let gx = grad(&x);
        let gxp = grad(&xp);
        let gd: Vec<f64> = gx.iter().zip(&gxp).map(|(&a, &b)| a - b).collect();
        let ratio = norm(&gd) / dn;
        if ratio > best {
            best = ratio;
            best_x = x;
            best_dir = diff.iter().map(|&v| v / dn).collect();
            have_best = true;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{InstanceConfig, InstanceParams};

    fn params() -> InstanceParams {
        InstanceParams::new(&InstanceConfig::default()).unwrap()
    }

    #[test]
    fn dense_matches_matrix_free_application() {
        let p = params();
        let mut rng = TestRng::new(0xb00f);
        for tag in [OperatorTag::H, OperatorTag::AtA, OperatorTag::AbarAbarT] {
            let mat = dense(&p, tag).unwrap();
            let x: Vec<f64> = (0..tag.in_dim(&p)).map(|_| rng.next_f64() - 0.5).collect();
            let fast = linops::apply(&p, tag, &x).unwrap();
            for (r, row) in mat.iter().enumerate() {
                let slow: f64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
                assert!((slow - fast[r]).abs() <= 1e-12 * (1.0 + slow.abs()));
            }
        }
    }

    #[test]
    fn dense_guard_rejects_large_instances() {
        let p = InstanceParams::new(&InstanceConfig {
            m1: 2,
            m2: 8, // m = 48
            ..InstanceConfig::default()
        })
        .unwrap();
        assert!(dense(&p, OperatorTag::H).is_err());
    }

    #[test]
    fn coupling_gram_is_identity_scaled() {
        let p = params();
        let mat = dense(&p, OperatorTag::AbarAbarT).unwrap();
        let c = 2.0 * p.mlf * p.mlf;
        for r in 0..p.nbar {
            for q in 0..p.nbar {
                let want = if r == q { c } else { 0.0 };
                assert!((mat[r][q] - want).abs() <= 1e-9, "({r},{q})");
            }
        }
    }

    #[test]
    fn finite_differences_are_exact_on_linear_functions() {
        let coefs = [1.5, -2.0, 0.25, 3.0];
        let f = |w: &[f64]| w.iter().zip(&coefs).map(|(a, b)| a * b).sum::<f64>();
        let g = fd_grad(f, &[0.3, -0.7, 0.0, 2.0], 1e-5);
        for (got, want) in g.iter().zip(&coefs) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn jacobi_agrees_with_known_spectra() {
        // identity
        let eye: Vec<Vec<f64>> = (0..6)
            .map(|r| (0..6).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
            .collect();
        let eigs = jacobi_eigenvalues(&eye, 1e-11).unwrap();
        for v in eigs {
            assert!((v - 1.0).abs() < 1e-12);
        }
        // 2x2 with known eigenvalues 1 and 3
        let m = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let eigs = jacobi_eigenvalues(&m, 1e-11).unwrap();
        assert!((eigs[0] - 1.0).abs() < 1e-11);
        assert!((eigs[1] - 3.0).abs() < 1e-11);
    }

    #[test]
    fn dense_spectrum_matches_closed_form() {
        let p = params();
        let eigs = eig_dense(&p, OperatorTag::HtH).unwrap();
        // HᵀH carries the HHᵀ spectrum plus dbar zeros (consensus null space)
        let mut expected: Vec<f64> = vec![0.0; p.dbar];
        for i in 1..=(p.m - 1) {
            let lam = linops::eig_hht(&p, i).unwrap();
            expected.extend(std::iter::repeat(lam).take(p.dbar));
        }
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(eigs.len(), expected.len());
        let scale = expected.last().unwrap();
        for (got, want) in eigs.iter().zip(&expected) {
            assert!((got - want).abs() <= 1e-9 * scale, "{got} vs {want}");
        }
    }

    #[test]
    fn golden_section_finds_kinked_minima() {
        // |w - 2| + (w)^2/8 has its minimum at w = 2
        let x = golden_min(|w| (w - 2.0).abs() + w * w / 8.0, -10.0, 10.0, 1e-12);
        assert!((x - 2.0).abs() < 1e-9);
    }

    #[test]
    fn probe_of_linear_map_approaches_opnorm() {
        let p = params();
        let lin = |v: &[f64]| linops::apply(&p, OperatorTag::A, v).unwrap();
        let probe = lipschitz_probe(p.d, lin, 10_000, 42);
        let truth = p.a_norm;
        assert!(probe <= truth * (1.0 + 1e-9), "{probe} vs {truth}");
        assert!(probe >= 0.95 * truth, "{probe} vs {truth}");
    }

    #[test]
    fn probe_with_one_trial_is_a_single_ratio() {
        let g = |v: &[f64]| v.to_vec(); // identity gradient, modulus 1
        let r = lipschitz_probe(4, g, 1, 7);
        assert!((r - 1.0).abs() < 1e-12);
    }
}
