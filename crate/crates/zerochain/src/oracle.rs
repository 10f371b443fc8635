//! Metered first-order oracles and span verification.
//!
//! Every algorithm interaction with the instance goes through [`Oracle`],
//! which counts calls, digests inputs, and tracks the support front of the
//! declared iterates. [`verify_class1`] / [`verify_class2`] replay a
//! declared run and check, by incremental orthogonalization, that each
//! iterate lies in the span the corresponding method class is allowed to
//! reach at that step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::instance::{grad_f0, BlockVector, InstanceParams, YVector};
use crate::linops::{apply, OperatorTag};
use crate::prox::{prox_g, prox_gbar};

/// FNV-1a over a little-endian byte stream; used for input digests and
/// config-addressed file names.
pub fn fnv1a(bytes: impl Iterator<Item = u8>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn digest_slices(kind: u8, eta: f64, parts: &[&[f64]]) -> String {
    let head = [kind].into_iter().chain(eta.to_bits().to_le_bytes());
    let body = parts
        .iter()
        .flat_map(|s| s.iter())
        .flat_map(|v| v.to_bits().to_le_bytes());
    format!("{:016x}", fnv1a(head.chain(body)))
}

/// Largest 1-based in-block coordinate index carrying a nonzero entry in
/// any block; 0 for the zero vector. Supports are exact: only bit-level
/// zeros count as absent.
pub fn support_front(x: &BlockVector) -> usize {
    let db = x.dbar;
    let mut front = 0;
    for (i, &v) in x.data.iter().enumerate() {
        if v != 0.0 {
            front = front.max(i % db + 1);
        }
    }
    front
}

#[derive(Debug, Clone, Serialize)]
pub struct CallRecord {
    /// index of the last completed step when the call was made
    pub t: usize,
    /// 1 or 2
    pub kind: u8,
    pub eta: f64,
    /// FNV-1a hex digest of the call inputs
    pub digest: String,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct OracleTranscript {
    pub calls: Vec<CallRecord>,
    /// support front of the declared iterate at each step; index = t
    pub fronts: Vec<usize>,
    /// per-step max span residual, filled in by a verifier pass
    pub span_residuals: Vec<f64>,
}

impl OracleTranscript {
    /// One JSON object per oracle call: step index, call kind, step size,
    /// front of the declared iterate at that step, span residual if a
    /// verifier ran.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for c in &self.calls {
            let j = self.fronts.get(c.t).copied();
            let sr = self.span_residuals.get(c.t).copied();
            let line = serde_json::json!({
                "t": c.t,
                "kind": c.kind,
                "eta": c.eta,
                "J": j,
                "span_residual": sr,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }
}

pub struct OracleBundle1 {
    pub grad_f0: BlockVector,
    pub ax: Vec<f64>,
    pub at_z: BlockVector,
    pub prox: BlockVector,
}

pub struct OracleBundle2 {
    pub grad_f0: BlockVector,
    pub abar_x: YVector,
    pub ax: Vec<f64>,
    pub abar_t_y: BlockVector,
    pub at_z: BlockVector,
    pub prox: YVector,
}

/// Call-counting oracle over one instance. Owns a copy of the parameters
/// so handles can outlive the caller's instance binding.
pub struct Oracle {
    params: InstanceParams,
    transcript: OracleTranscript,
}

impl Oracle {
    pub fn new(params: InstanceParams) -> Self {
        Oracle {
            params,
            transcript: OracleTranscript::default(),
        }
    }

    pub fn params(&self) -> &InstanceParams {
        &self.params
    }

    pub fn count(&self) -> usize {
        self.transcript.calls.len()
    }

    pub fn transcript(&self) -> &OracleTranscript {
        &self.transcript
    }

    pub fn transcript_mut(&mut self) -> &mut OracleTranscript {
        &mut self.transcript
    }

    /// Declare the next iterate (drivers call this once per step, starting
    /// with the initial point), recording its support front.
    pub fn declare_iterate(&mut self, x: &BlockVector) {
        self.transcript.fronts.push(support_front(x));
    }

    fn current_step(&self) -> usize {
        self.transcript.fronts.len().saturating_sub(1)
    }

    /// First-kind call: gradient, forward map, adjoint of the supplied
    /// row-space vector, and the coupling prox of `x` at step `eta`.
    pub fn oracle1(&mut self, x: &BlockVector, z: &[f64], eta: f64) -> Result<OracleBundle1> {
        let p = &self.params;
        if z.len() != p.n {
            return Err(Error::DimensionMismatch {
                expected: p.n,
                got: z.len(),
            });
        }
        let bundle = OracleBundle1 {
            grad_f0: grad_f0(p, x),
            ax: apply(p, OperatorTag::A, &x.data)?,
            at_z: BlockVector::from_vec(p.dbar, apply(p, OperatorTag::AAdj, z)?),
            prox: prox_g(p, x, eta)?,
        };
        self.transcript.calls.push(CallRecord {
            t: self.current_step(),
            kind: 1,
            eta,
            digest: digest_slices(1, eta, &[&x.data, z]),
        });
        Ok(bundle)
    }

    /// Second-kind call: adds the coupling-row forward/adjoint pair and the
    /// soft-threshold prox of the row-space argument `y`.
    pub fn oracle2(
        &mut self,
        x: &BlockVector,
        y: &YVector,
        z: &[f64],
        eta: f64,
    ) -> Result<OracleBundle2> {
        let p = &self.params;
        if z.len() != p.n {
            return Err(Error::DimensionMismatch {
                expected: p.n,
                got: z.len(),
            });
        }
        if y.data.len() != p.nbar {
            return Err(Error::DimensionMismatch {
                expected: p.nbar,
                got: y.data.len(),
            });
        }
        let bundle = OracleBundle2 {
            grad_f0: grad_f0(p, x),
            abar_x: YVector::from_vec(p.dbar, apply(p, OperatorTag::Abar, &x.data)?),
            ax: apply(p, OperatorTag::A, &x.data)?,
            abar_t_y: BlockVector::from_vec(p.dbar, apply(p, OperatorTag::AbarAdj, &y.data)?),
            at_z: BlockVector::from_vec(p.dbar, apply(p, OperatorTag::AAdj, z)?),
            prox: prox_gbar(p, y, eta)?,
        };
        self.transcript.calls.push(CallRecord {
            t: self.current_step(),
            kind: 2,
            eta,
            digest: digest_slices(2, eta, &[&x.data, &y.data, z]),
        });
        Ok(bundle)
    }
}

/// One declared step of a first-kind run: the pre-prox point, the step size
/// used for the prox, and the declared iterate.
#[derive(Debug, Clone)]
pub struct Step1 {
    pub eta: f64,
    pub xi: BlockVector,
    pub x: BlockVector,
}

#[derive(Debug, Clone)]
pub struct RunHistory1 {
    pub x0: BlockVector,
    pub steps: Vec<Step1>,
}

/// One declared step of a second-kind run: the iterate, the pre-prox
/// row-space point, the prox step size, and the declared row-space iterate.
#[derive(Debug, Clone)]
pub struct Step2 {
    pub eta: f64,
    pub x: BlockVector,
    pub xi_y: YVector,
    pub y: YVector,
}

#[derive(Debug, Clone)]
pub struct RunHistory2 {
    pub x0: BlockVector,
    pub y0: YVector,
    pub steps: Vec<Step2>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpanStepReport {
    pub t: usize,
    /// residuals of the membership checks at this step, in declaration order
    pub residuals: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpanReport {
    pub pass: bool,
    pub max_residual: f64,
    pub first_fail: Option<usize>,
    pub steps: Vec<SpanStepReport>,
}

const SPAN_TOL: f64 = 1e-8;

/// Growing orthonormal basis (modified Gram-Schmidt with one
/// reorthogonalization pass). Vectors numerically inside the current span
/// are dropped.
struct SpanBasis {
    cols: Vec<Vec<f64>>,
}

impl SpanBasis {
    fn new() -> Self {
        SpanBasis { cols: Vec::new() }
    }

    fn project_out(&self, v: &mut [f64]) {
        for q in &self.cols {
            let dot: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            for (vi, qi) in v.iter_mut().zip(q.iter()) {
                *vi -= dot * qi;
            }
        }
    }

    fn add(&mut self, v: &[f64]) {
        let orig: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if orig == 0.0 {
            return;
        }
        let mut w = v.to_vec();
        self.project_out(&mut w);
        self.project_out(&mut w);
        let norm: f64 = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm <= 1e-13 * orig {
            return; // already represented
        }
        for a in &mut w {
            *a /= norm;
        }
        self.cols.push(w);
    }

    /// Distance from `v` to the current span.
    fn residual(&self, v: &[f64]) -> f64 {
        let mut w = v.to_vec();
        self.project_out(&mut w);
        self.project_out(&mut w);
        w.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

fn within(residual: f64, target: &[f64]) -> bool {
    let norm: f64 = target.iter().map(|a| a * a).sum::<f64>().sqrt();
    residual <= SPAN_TOL * (1.0 + norm)
}

fn finish_report(steps: Vec<SpanStepReport>) -> SpanReport {
    let max_residual = steps
        .iter()
        .flat_map(|s| s.residuals.iter().copied())
        .fold(0.0f64, f64::max);
    let first_fail = steps.iter().find(|s| !s.pass).map(|s| s.t);
    SpanReport {
        pass: first_fail.is_none(),
        max_residual,
        first_fail,
        steps,
    }
}

/// Check a declared first-kind run: each pre-prox point must lie in the
/// span of past iterates, their gradients, and their Gram images; each
/// iterate must lie in the span of its pre-prox point and that point's
/// coupling prox at the declared step size.
pub fn verify_class1(p: &InstanceParams, hist: &RunHistory1) -> Result<SpanReport> {
    let mut basis = SpanBasis::new();
    let feed = |basis: &mut SpanBasis, x: &BlockVector| -> Result<()> {
        basis.add(&x.data);
        basis.add(&grad_f0(p, x).data);
        basis.add(&apply(p, OperatorTag::AtA, &x.data)?);
        Ok(())
    };
    feed(&mut basis, &hist.x0)?;
    let mut steps = Vec::with_capacity(hist.steps.len());
    for (idx, st) in hist.steps.iter().enumerate() {
        let t = idx + 1;
        let r_xi = basis.residual(&st.xi.data);
        let mut local = SpanBasis::new();
        local.add(&st.xi.data);
        local.add(&prox_g(p, &st.xi, st.eta)?.data);
        let r_x = local.residual(&st.x.data);
        let pass = within(r_xi, &st.xi.data) && within(r_x, &st.x.data);
        steps.push(SpanStepReport {
            t,
            residuals: vec![r_xi, r_x],
            pass,
        });
        feed(&mut basis, &st.x)?;
    }
    Ok(finish_report(steps))
}

/// Check a declared second-kind run. Iterates may draw on both Gram maps,
/// adjoints of past row-space iterates, and — on the row-space side — the
/// forward image of the current iterate.
pub fn verify_class2(p: &InstanceParams, hist: &RunHistory2) -> Result<SpanReport> {
    let mut bx = SpanBasis::new();
    let mut by = SpanBasis::new();
    let feed_x = |bx: &mut SpanBasis, x: &BlockVector| -> Result<()> {
        bx.add(&x.data);
        bx.add(&grad_f0(p, x).data);
        bx.add(&apply(p, OperatorTag::AtA, &x.data)?);
        bx.add(&apply(p, OperatorTag::AbarTAbar, &x.data)?);
        Ok(())
    };
    let feed_y = |bx: &mut SpanBasis, by: &mut SpanBasis, y: &YVector| -> Result<()> {
        bx.add(&apply(p, OperatorTag::AbarAdj, &y.data)?);
        by.add(&y.data);
        by.add(&apply(p, OperatorTag::AbarAbarT, &y.data)?);
        Ok(())
    };
    feed_x(&mut bx, &hist.x0)?;
    by.add(&apply(p, OperatorTag::Abar, &hist.x0.data)?);
    feed_y(&mut bx, &mut by, &hist.y0)?;
    let mut steps = Vec::with_capacity(hist.steps.len());
    for (idx, st) in hist.steps.iter().enumerate() {
        let t = idx + 1;
        let r_x = bx.residual(&st.x.data);
        // the row-space update may see the current iterate's forward image
        by.add(&apply(p, OperatorTag::Abar, &st.x.data)?);
        let r_xi = by.residual(&st.xi_y.data);
        let mut local = SpanBasis::new();
        local.add(&st.xi_y.data);
        local.add(&prox_gbar(p, &st.xi_y, st.eta)?.data);
        let r_y = local.residual(&st.y.data);
        let pass =
            within(r_x, &st.x.data) && within(r_xi, &st.xi_y.data) && within(r_y, &st.y.data);
        steps.push(SpanStepReport {
            t,
            residuals: vec![r_x, r_xi, r_y],
            pass,
        });
        feed_x(&mut bx, &st.x)?;
        feed_y(&mut bx, &mut by, &st.y)?;
    }
    Ok(finish_report(steps))
}

/// Copy per-step max residuals from a verifier report into a transcript so
/// the JSONL export carries them.
pub fn attach_span_residuals(transcript: &mut OracleTranscript, report: &SpanReport) {
    let mut per_step = vec![0.0f64; transcript.fronts.len()];
    for s in &report.steps {
        if s.t < per_step.len() {
            per_step[s.t] = s.residuals.iter().copied().fold(0.0, f64::max);
        }
    }
    transcript.span_residuals = per_step;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{InstanceConfig, InstanceParams};

    fn params() -> InstanceParams {
        InstanceParams::new(&InstanceConfig::default()).unwrap()
    }

    #[test]
    fn support_front_ignores_magnitude() {
        let p = params();
        let mut x = BlockVector::zeros(p.m, p.dbar);
        assert_eq!(support_front(&x), 0);
        x.block_mut(2)[3] = 1e-300;
        assert_eq!(support_front(&x), 4);
        x.block_mut(7)[1] = -5.0;
        assert_eq!(support_front(&x), 4);
        x.block_mut(0)[4] = f64::MIN_POSITIVE;
        assert_eq!(support_front(&x), 5);
    }

    #[test]
    fn call_counter_is_exact() {
        let p = params();
        let mut o = Oracle::new(p.clone());
        let x = BlockVector::zeros(p.m, p.dbar);
        let y = YVector::zeros(p.m_seps.len(), p.dbar);
        let z = vec![0.0; p.n];
        o.declare_iterate(&x);
        assert_eq!(o.count(), 0);
        o.oracle1(&x, &z, 0.1).unwrap();
        o.oracle2(&x, &y, &z, 0.1).unwrap();
        assert_eq!(o.count(), 2);
        assert_eq!(o.transcript().calls[0].kind, 1);
        assert_eq!(o.transcript().calls[1].kind, 2);
        assert_ne!(
            o.transcript().calls[0].digest,
            o.transcript().calls[1].digest
        );
    }

    #[test]
    fn bundles_at_zero() {
        let p = params();
        let mut o = Oracle::new(p.clone());
        let x = BlockVector::zeros(p.m, p.dbar);
        let z = vec![0.0; p.n];
        let b = o.oracle1(&x, &z, 0.1).unwrap();
        assert!(b.ax.iter().all(|&v| v == 0.0));
        assert!(b.at_z.data.iter().all(|&v| v == 0.0));
        assert!(b.prox.data.iter().all(|&v| v == 0.0));
        // gradient at the origin loads coordinate 1 of every block
        for i in 0..p.m {
            assert!(b.grad_f0.block(i)[0] != 0.0);
            assert!(b.grad_f0.block(i)[1..].iter().all(|&v| v == 0.0));
        }
    }

    enum Inject {
        None,
        // coupling Gram image of the step-2 pre-prox point; reachable,
        // because the averaging branch of the pair prox returns
        // xi - AbarTAbar(xi)/(2 m^2 lf^2) and both xi and prox(xi) are in
        // the verifier's basis
        CouplingGram,
        // unit vector on the last coordinate of block 0 — beyond any front
        // a three-step run can reach, so never in the span
        FarCoordinate,
    }

    fn one_call_history(p: &InstanceParams, inject: Inject) -> RunHistory1 {
        // legal three-step first-kind run built by hand, optionally with an
        // injection at the third step
        let x0 = BlockVector::zeros(p.m, p.dbar);
        let eta = 1.0 / (p.lf + p.a_norm * p.a_norm);
        let g0 = grad_f0(p, &x0);
        let mut xi1 = g0.clone();
        for v in &mut xi1.data {
            *v *= -eta;
        }
        let x1 = xi1.clone(); // mix (1, 0): no prox consumed
        let g1 = grad_f0(p, &x1);
        let ata1 = apply(p, OperatorTag::AtA, &x1.data).unwrap();
        let mut xi2 = x1.clone();
        for k in 0..p.d {
            xi2.data[k] -= eta * (g1.data[k] + 0.5 * ata1[k]);
        }
        let x2 = prox_g(p, &xi2, eta).unwrap();
        let g2 = grad_f0(p, &x2);
        let ata2 = apply(p, OperatorTag::AtA, &x2.data).unwrap();
        let mut xi3 = x2.clone();
        for k in 0..p.d {
            xi3.data[k] -= eta * (g2.data[k] + 0.5 * ata2[k]);
        }
        match inject {
            Inject::None => {}
            Inject::CouplingGram => {
                let v = apply(p, OperatorTag::AbarTAbar, &xi2.data).unwrap();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert!(norm > 0.0, "injection must be a nonzero vector");
                for k in 0..p.d {
                    xi3.data[k] += v[k] / norm;
                }
            }
            Inject::FarCoordinate => {
                xi3.data[p.dbar - 1] += 1.0;
            }
        }
        let x3 = prox_g(p, &xi3, eta).unwrap();
        RunHistory1 {
            x0,
            steps: vec![
                Step1 { eta, xi: xi1, x: x1 },
                Step1 { eta, xi: xi2, x: x2 },
                Step1 { eta, xi: xi3, x: x3 },
            ],
        }
    }

    #[test]
    fn legal_run_verifies() {
        let p = params();
        let hist = one_call_history(&p, Inject::None);
        let rep = verify_class1(&p, &hist).unwrap();
        assert!(rep.pass, "report: {rep:?}");
        assert!(rep.max_residual <= 1e-10);
    }

    #[test]
    fn out_of_span_injection_is_caught() {
        let p = params();
        let hist = one_call_history(&p, Inject::FarCoordinate);
        let rep = verify_class1(&p, &hist).unwrap();
        assert!(!rep.pass);
        assert_eq!(rep.first_fail, Some(3));
        assert!(rep.steps[2].residuals[0] > 1e-6);
    }

    #[test]
    fn pair_averaging_exposes_coupling_gram_image() {
        // near the origin every coupled pair lands in the averaging branch,
        // so the prox output itself carries AbarTAbar(xi) — a first-kind run
        // that adds this direction is legitimate and must verify
        let p = params();
        let hist = one_call_history(&p, Inject::CouplingGram);
        let rep = verify_class1(&p, &hist).unwrap();
        assert!(rep.pass, "report: {rep:?}");
    }

    #[test]
    fn trivial_runs_verify() {
        let p = params();
        let x0 = BlockVector::zeros(p.m, p.dbar);
        let hist = RunHistory1 {
            x0: x0.clone(),
            steps: vec![Step1 {
                eta: 0.1,
                xi: x0.clone(),
                x: x0.clone(),
            }],
        };
        assert!(verify_class1(&p, &hist).unwrap().pass);
        let hist2 = RunHistory2 {
            x0: x0.clone(),
            y0: YVector::zeros(p.m_seps.len(), p.dbar),
            steps: vec![Step2 {
                eta: 0.1,
                x: x0.clone(),
                xi_y: YVector::zeros(p.m_seps.len(), p.dbar),
                y: YVector::zeros(p.m_seps.len(), p.dbar),
            }],
        };
        assert!(verify_class2(&p, &hist2).unwrap().pass);
    }

    #[test]
    fn jsonl_export_shape() {
        let p = params();
        let mut o = Oracle::new(p.clone());
        let x = BlockVector::zeros(p.m, p.dbar);
        let z = vec![0.0; p.n];
        o.declare_iterate(&x);
        o.oracle1(&x, &z, 0.25).unwrap();
        o.declare_iterate(&x);
        o.oracle1(&x, &z, 0.25).unwrap();
        o.transcript_mut().span_residuals = vec![0.0, 1e-12];
        let text = o.transcript().to_jsonl();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        for (i, line) in lines.iter().enumerate() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert_eq!(v["t"], i as u64);
            assert_eq!(v["kind"], 1);
            assert_eq!(v["J"], 0);
            assert!(v["eta"].as_f64().unwrap() > 0.0);
            assert!(v["span_residual"].is_number());
        }
    }
}
