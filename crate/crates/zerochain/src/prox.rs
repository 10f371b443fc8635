//! Closed-form proximal maps for the two nonsmooth terms: the pairwise
//! coupling across adjacent blocks and the scaled l1 norm on the coupling
//! row space, plus subgradient-based optimality residuals for both.

use crate::error::{Error, Result};
use crate::instance::{BlockVector, InstanceParams, YVector};

fn check_eta(eta: f64) -> Result<()> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParams(format!(
            "prox step must be positive and finite, got {eta}"
        )));
    }
    Ok(())
}

/// Proximal map of the pairwise coupling term. Each coupled pair of blocks
/// is updated coordinatewise: with `c = eta * beta`, values closer than
/// `2c` collapse to their average (ties included — both branches agree at
/// the boundary), otherwise each moves `c` toward the other. Blocks not in
/// any coupled pair pass through unchanged; pairs are disjoint because
/// `m1 >= 2`.
pub fn prox_g(p: &InstanceParams, x: &BlockVector, eta: f64) -> Result<BlockVector> {
    check_eta(eta)?;
    if x.data.len() != p.d {
        return Err(Error::DimensionMismatch {
            expected: p.d,
            got: x.data.len(),
        });
    }
    let c = eta * p.beta;
    let db = p.dbar;
    let mut out = x.clone();
    for &s in &p.m_seps {
        for k in 0..db {
            let ia = (s - 1) * db + k;
            let ib = s * db + k;
            let a = x.data[ia];
            let b = x.data[ib];
            if (a - b).abs() <= 2.0 * c {
                let avg = 0.5 * (a + b);
                out.data[ia] = avg;
                out.data[ib] = avg;
            } else {
                let step = if a > b { c } else { -c };
                out.data[ia] = a - step;
                out.data[ib] = b + step;
            }
        }
    }
    Ok(out)
}

/// Proximal map of the scaled l1 term: coordinatewise soft threshold with
/// `c = eta * beta / (m * lf)`; magnitudes at or below `c` map to exact 0.
pub fn prox_gbar(p: &InstanceParams, y: &YVector, eta: f64) -> Result<YVector> {
    check_eta(eta)?;
    if y.data.len() != p.nbar {
        return Err(Error::DimensionMismatch {
            expected: p.nbar,
            got: y.data.len(),
        });
    }
    let c = eta * p.beta / p.mlf;
    let mut out = y.clone();
    for v in &mut out.data {
        *v = if v.abs() <= c {
            0.0
        } else {
            *v - c * v.signum()
        };
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProxOp {
    PairCoupling,
    SoftThreshold,
}

/// Subgradient-optimality residual of `candidate` as a would-be proximal
/// point of `point`: distance from 0 to `∂(nonsmooth)(candidate) +
/// (candidate - point)/eta`, using the interval characterization of the
/// l1 subdifferential. A correct prox output scores ~1e-10 or below.
pub fn prox_residual_at(
    p: &InstanceParams,
    op: ProxOp,
    point: &[f64],
    candidate: &[f64],
    eta: f64,
) -> Result<f64> {
    check_eta(eta)?;
    let expected = match op {
        ProxOp::PairCoupling => p.d,
        ProxOp::SoftThreshold => p.nbar,
    };
    if point.len() != expected || candidate.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: point.len().max(candidate.len()),
        });
    }
    let mut total = 0.0;
    match op {
        ProxOp::SoftThreshold => {
            let w = p.beta / p.mlf;
            for k in 0..p.nbar {
                let r = (candidate[k] - point[k]) / eta;
                let res = if candidate[k] != 0.0 {
                    (r + w * candidate[k].signum()).abs()
                } else {
                    (r.abs() - w).max(0.0)
                };
                total += res * res;
            }
        }
        ProxOp::PairCoupling => {
            let db = p.dbar;
            let mut in_pair = vec![false; p.m];
            for &s in &p.m_seps {
                in_pair[s - 1] = true;
                in_pair[s] = true;
            }
            // uncoupled blocks: plain quadratic optimality
            for (i, &paired) in in_pair.iter().enumerate() {
                if !paired {
                    for k in 0..db {
                        let idx = i * db + k;
                        let r = (candidate[idx] - point[idx]) / eta;
                        total += r * r;
                    }
                }
            }
            for &s in &p.m_seps {
                for k in 0..db {
                    let ia = (s - 1) * db + k;
                    let ib = s * db + k;
                    let ra = (candidate[ia] - point[ia]) / eta;
                    let rb = (candidate[ib] - point[ib]) / eta;
                    let diff = candidate[ia] - candidate[ib];
                    let res2 = if diff != 0.0 {
                        let lam = p.beta * diff.signum();
                        (ra + lam) * (ra + lam) + (rb - lam) * (rb - lam)
                    } else {
                        // subgradient weight free in [-beta, beta]
                        let lam = ((rb - ra) / 2.0).clamp(-p.beta, p.beta);
                        (ra + lam) * (ra + lam) + (rb - lam) * (rb - lam)
                    };
                    total += res2;
                }
            }
        }
    }
    Ok(total.sqrt())
}

/// Optimality residual of the shipped prox at `point` (computes the prox
/// and scores it).
pub fn prox_check(p: &InstanceParams, op: ProxOp, point: &[f64], eta: f64) -> Result<f64> {
    match op {
        ProxOp::PairCoupling => {
            let x = BlockVector::from_vec(p.dbar, point.to_vec());
            let z = prox_g(p, &x, eta)?;
            prox_residual_at(p, op, point, &z.data, eta)
        }
        ProxOp::SoftThreshold => {
            let y = YVector::from_vec(p.dbar, point.to_vec());
            let z = prox_gbar(p, &y, eta)?;
            prox_residual_at(p, op, point, &z.data, eta)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bruteforce::{self, ProxKind, TestRng};
    use crate::instance::{g_val, InstanceConfig, InstanceParams};
    use proptest::prelude::*;

    fn params() -> InstanceParams {
        InstanceParams::new(&InstanceConfig::default()).unwrap()
    }

    fn random_block(p: &InstanceParams, rng: &mut TestRng, scale: f64) -> BlockVector {
        BlockVector::from_vec(
            p.dbar,
            (0..p.d).map(|_| scale * (2.0 * rng.next_f64() - 1.0)).collect(),
        )
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let p = params();
        let x = BlockVector::zeros(p.m, p.dbar);
        let out = prox_g(&p, &x, 0.7).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
        let y = YVector::zeros(p.m_seps.len(), p.dbar);
        let out = prox_gbar(&p, &y, 0.7).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_point_formula_cases() {
        let p = params();
        // pair (3, 1) with c = 0.5 pulls both by c; pair (2, 1) with c = 1 averages
        for (a, b, c, want_a, want_b) in [
            (3.0, 1.0, 0.5, 2.5, 1.5),
            (2.0, 1.0, 1.0, 1.5, 1.5),
            (1.0, 3.0, 0.5, 1.5, 2.5), // symmetric orientation
            (-1.0, 1.0, 0.25, -0.75, 0.75),
        ] {
            let eta = c / p.beta;
            let mut x = BlockVector::zeros(p.m, p.dbar);
            let s = p.m_seps[0];
            x.block_mut(s - 1)[0] = a;
            x.block_mut(s)[0] = b;
            let out = prox_g(&p, &x, eta).unwrap();
            assert!((out.block(s - 1)[0] - want_a).abs() < 1e-12);
            assert!((out.block(s)[0] - want_b).abs() < 1e-12);
        }
    }

    #[test]
    fn tie_at_exact_threshold_averages() {
        let p = params();
        let c = 0.25;
        let eta = c / p.beta;
        let mut x = BlockVector::zeros(p.m, p.dbar);
        let s = p.m_seps[0];
        x.block_mut(s - 1)[0] = 1.0;
        x.block_mut(s)[0] = 0.5; // |a-b| = 0.5 = 2c exactly
        let out = prox_g(&p, &x, eta).unwrap();
        assert_eq!(out.block(s - 1)[0], 0.75);
        assert_eq!(out.block(s)[0], 0.75);
    }

    #[test]
    fn soft_threshold_cases() {
        let p = params();
        let c = 1.0;
        let eta = c * p.mlf / p.beta;
        let mut y = YVector::zeros(p.m_seps.len(), p.dbar);
        y.data[0] = 2.0;
        y.data[1] = -0.5;
        y.data[2] = 1.0; // exactly at the threshold
        y.data[3] = -1.0;
        let out = prox_gbar(&p, &y, eta).unwrap();
        assert!((out.data[0] - 1.0).abs() < 1e-12);
        assert_eq!(out.data[1], 0.0);
        assert_eq!(out.data[2], 0.0);
        assert_eq!(out.data[3], 0.0);
    }

    #[test]
    fn matches_derivative_free_solves() {
        let p = params();
        let mut rng = TestRng::new(0x9120);
        for trial in 0..40 {
            let eta = 0.01 + rng.next_f64();
            let x = random_block(&p, &mut rng, if trial % 3 == 0 { 0.05 } else { 2.0 });
            let fast = prox_g(&p, &x, eta).unwrap();
            let slow = bruteforce::prox_numeric(&p, ProxKind::PairCoupling, &x.data, eta);
            for k in 0..p.d {
                assert!(
                    (fast.data[k] - slow[k]).abs() <= 1e-8 * (1.0 + slow[k].abs()),
                    "trial {trial} coord {k}: {} vs {}",
                    fast.data[k],
                    slow[k]
                );
            }

            let y = YVector::from_vec(
                p.dbar,
                (0..p.nbar).map(|_| 20.0 * (rng.next_f64() - 0.5)).collect(),
            );
            let fast = prox_gbar(&p, &y, eta).unwrap();
            let slow = bruteforce::prox_numeric(&p, ProxKind::SoftThreshold, &y.data, eta);
            for k in 0..p.nbar {
                assert!((fast.data[k] - slow[k]).abs() <= 1e-8 * (1.0 + slow[k].abs()));
            }
        }
    }

    #[test]
    fn support_containment_is_exact() {
        let p = params();
        let mut rng = TestRng::new(0x9121);
        for _ in 0..200 {
            let mut x = BlockVector::zeros(p.m, p.dbar);
            for _ in 0..8 {
                let i = (rng.next_u64() as usize) % p.d;
                x.data[i] = 2.0 * rng.next_f64() - 1.0;
            }
            let out = prox_g(&p, &x, 0.01 + rng.next_f64()).unwrap();
            for i in 0..p.m {
                for k in 0..p.dbar {
                    if out.block(i)[k] != 0.0 {
                        let mut allowed = x.block(i)[k] != 0.0;
                        if i > 0 {
                            allowed |= x.block(i - 1)[k] != 0.0;
                        }
                        if i + 1 < p.m {
                            allowed |= x.block(i + 1)[k] != 0.0;
                        }
                        assert!(allowed, "support leak at block {i} coord {k}");
                    }
                }
            }

            let mut y = YVector::zeros(p.m_seps.len(), p.dbar);
            for _ in 0..5 {
                let i = (rng.next_u64() as usize) % p.nbar;
                y.data[i] = 4.0 * rng.next_f64() - 2.0;
            }
            let out = prox_gbar(&p, &y, 0.001).unwrap();
            for k in 0..p.nbar {
                if out.data[k] != 0.0 {
                    assert!(y.data[k] != 0.0);
                }
            }
        }
    }

    #[test]
    fn optimality_residuals() {
        let p = params();
        let mut rng = TestRng::new(0x9122);
        for _ in 0..100 {
            let eta = 0.01 + rng.next_f64();
            let x = random_block(&p, &mut rng, 2.0);
            let r = prox_check(&p, ProxOp::PairCoupling, &x.data, eta).unwrap();
            assert!(r <= 1e-10, "residual {r}");

            let y: Vec<f64> = (0..p.nbar).map(|_| 20.0 * (rng.next_f64() - 0.5)).collect();
            let r = prox_check(&p, ProxOp::SoftThreshold, &y, eta).unwrap();
            assert!(r <= 1e-10, "residual {r}");
        }
        // a perturbed output is visibly non-optimal
        let x = random_block(&p, &mut rng, 2.0);
        let eta = 0.3;
        let mut z = prox_g(&p, &x, eta).unwrap();
        z.data[0] += 0.1;
        let r = prox_residual_at(&p, ProxOp::PairCoupling, &x.data, &z.data, eta).unwrap();
        assert!(r > 1e-3, "residual {r}");
        // residual of 0 against 0
        let zeros = vec![0.0; p.d];
        let r = prox_residual_at(&p, ProxOp::PairCoupling, &zeros, &zeros, eta).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn prox_decreases_its_objective_against_candidates() {
        let p = params();
        let mut rng = TestRng::new(0x9123);
        let eta = 0.4;
        let x = random_block(&p, &mut rng, 1.5);
        let z = prox_g(&p, &x, eta).unwrap();
        let val = |w: &BlockVector| {
            let diff2: f64 = w
                .data
                .iter()
                .zip(&x.data)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            g_val(&p, w) + diff2 / (2.0 * eta)
        };
        let best = val(&z);
        for _ in 0..100 {
            let w = random_block(&p, &mut rng, 1.5);
            assert!(best <= val(&w) + 1e-10);
        }
    }

    proptest! {
        #[test]
        fn nonexpansive(seed in 0u64..1000) {
            let p = params();
            let mut rng = TestRng::new(seed);
            let eta = 0.01 + rng.next_f64();
            let x1 = random_block(&p, &mut rng, 2.0);
            let x2 = random_block(&p, &mut rng, 2.0);
            let z1 = prox_g(&p, &x1, eta).unwrap();
            let z2 = prox_g(&p, &x2, eta).unwrap();
            let dz: f64 = z1.data.iter().zip(&z2.data).map(|(a, b)| (a - b) * (a - b)).sum();
            let dx: f64 = x1.data.iter().zip(&x2.data).map(|(a, b)| (a - b) * (a - b)).sum();
            prop_assert!(dz.sqrt() <= dx.sqrt() * (1.0 + 1e-12));
        }

        #[test]
        fn threshold_zeroing_is_exact(mag in 0.0f64..1.0, eta in 0.01f64..2.0) {
            let p = params();
            let c = eta * p.beta / p.mlf;
            let mut y = YVector::zeros(p.m_seps.len(), p.dbar);
            y.data[0] = mag * c; // always within the dead zone
            let out = prox_gbar(&p, &y, eta).unwrap();
            prop_assert_eq!(out.data[0], 0.0);
        }
    }
}
