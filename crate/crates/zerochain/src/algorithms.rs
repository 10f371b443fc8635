//! Reference first-order methods driven strictly through the metered
//! oracle: a quadratic-penalty method and an augmented-Lagrangian method
//! in the first class, a linearized ADMM in the second, plus generic
//! runners that execute arbitrary user rules inside each class so the
//! span verifier and front-rate checks can be exercised on randomized
//! member algorithms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{objective, BlockVector, InstanceParams, YVector};
use crate::oracle::{Oracle, OracleTranscript, RunHistory1, RunHistory2, Step1, Step2};
use crate::stationarity::{certificate_lb, residual_ap};

pub const DEFAULT_MAX_ORACLES: usize = 500;
const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    Constant(f64),
    Geometric { initial: f64, factor: f64 },
}

impl Schedule {
    /// Value at step t (1-based).
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            Schedule::Constant(c) => c,
            Schedule::Geometric { initial, factor } => initial * factor.powi(t as i32 - 1),
        }
    }

    fn validate(&self, what: &str, allow_zero: bool) -> Result<()> {
        let ok = match *self {
            Schedule::Constant(c) => c.is_finite() && (c > 0.0 || (allow_zero && c == 0.0)),
            Schedule::Geometric { initial, factor } => {
                initial.is_finite()
                    && factor.is_finite()
                    && factor > 0.0
                    && (initial > 0.0 || (allow_zero && initial == 0.0))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!("bad {what} schedule: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    /// completed-iteration index when the oracle call was made
    pub t: usize,
    pub oracle_count: usize,
    /// support front of the iterate declared at step t
    pub j: usize,
    pub residual_ap: f64,
    pub certificate_lb: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub algo: String,
    pub rows: Vec<TraceRow>,
    pub transcript: OracleTranscript,
    pub history1: Option<RunHistory1>,
    pub history2: Option<RunHistory2>,
    pub final_x: BlockVector,
    pub final_y: Option<YVector>,
}

impl RunTrace {
    pub fn oracles_used(&self) -> usize {
        self.transcript.calls.len()
    }

    /// J at each completed step; index = step.
    pub fn fronts(&self) -> &[usize] {
        &self.transcript.fronts
    }

    /// One row per oracle call, full float precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,oracle_count,J,residual_ap,certificate_lb,objective\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.17e},{:.17e},{:.17e}\n",
                r.t, r.oracle_count, r.j, r.residual_ap, r.certificate_lb, r.objective
            ));
        }
        out
    }
}

/// Per-step cache so each oracle-call row reuses the residuals of the
/// iterate declared at that step instead of recomputing them per call.
struct Recorder<'p> {
    p: &'p InstanceParams,
    rows: Vec<TraceRow>,
    cached_ap: f64,
    cached_cert: f64,
    cached_obj: f64,
}

impl<'p> Recorder<'p> {
    fn new(p: &'p InstanceParams) -> Self {
        Recorder {
            p,
            rows: Vec::new(),
            cached_ap: 0.0,
            cached_cert: 0.0,
            cached_obj: 0.0,
        }
    }

    fn on_iterate(&mut self, x: &BlockVector) {
        self.cached_ap = residual_ap(self.p, x).residual;
        self.cached_cert = certificate_lb(self.p, x);
        self.cached_obj = objective(self.p, x);
    }

    fn row(&mut self, oracle: &Oracle) {
        let tr = oracle.transcript();
        let t = tr.fronts.len() - 1;
        self.rows.push(TraceRow {
            t,
            oracle_count: oracle.count(),
            j: tr.fronts[t],
            residual_ap: self.cached_ap,
            certificate_lb: self.cached_cert,
            objective: self.cached_obj,
        });
    }
}

fn guard(x: &BlockVector, what: &'static str) -> Result<()> {
    if crate::linops::norm2(&x.data) > DIVERGENCE_LIMIT {
        return Err(Error::Diverged(what));
    }
    Ok(())
}

/// Quadratic-penalty method, first class. Step t uses the penalty weight
/// `rho.at(t)`; the step size defaults to 1/(L_f + ρ_t‖A‖²). The first
/// step needs a single oracle call (its pre-prox point is a pure gradient
/// step from zero, declared without consuming the prox output); steady
/// steps use three: gradient+forward, Gram via the adjoint slot, prox.
pub fn run_penalty_class1(
    p: &InstanceParams,
    rho: &Schedule,
    eta: Option<&Schedule>,
    max_oracles: usize,
) -> Result<RunTrace> {
    rho.validate("penalty", true)?;
    if let Some(e) = eta {
        e.validate("step-size", false)?;
    }
    let step_at = |t: usize| -> f64 {
        match eta {
            Some(e) => e.at(t),
            None => 1.0 / (p.lf + rho.at(t) * p.a_norm * p.a_norm),
        }
    };
    let mut oracle = Oracle::new(p.clone());
    let mut rec = Recorder::new(p);
    let zeros_n = vec![0.0; p.n];
    let x0 = BlockVector::zeros(p.m, p.dbar);
    oracle.declare_iterate(&x0);
    rec.on_iterate(&x0);
    let mut steps = Vec::new();
    let mut x = x0.clone();
    if max_oracles >= 1 {
        let eta1 = step_at(1);
        let b = oracle.oracle1(&x0, &zeros_n, eta1)?;
        let mut xi = b.grad_f0;
        for v in &mut xi.data {
            *v *= -eta1;
        }
        x = xi.clone();
        oracle.declare_iterate(&x);
        rec.on_iterate(&x);
        rec.row(&oracle);
        steps.push(Step1 {
            eta: eta1,
            xi,
            x: x.clone(),
        });
        let mut t = 2;
        while oracle.count() + 3 <= max_oracles {
            let eta_t = step_at(t);
            let rho_t = rho.at(t);
            let b1 = oracle.oracle1(&x, &zeros_n, eta_t)?;
            rec.row(&oracle);
            let b2 = oracle.oracle1(&x, &b1.ax, eta_t)?;
            rec.row(&oracle);
            let mut xi = x.clone();
            for k in 0..p.d {
                xi.data[k] -= eta_t * (b1.grad_f0.data[k] + rho_t * b2.at_z.data[k]);
            }
            let b3 = oracle.oracle1(&xi, &zeros_n, eta_t)?;
            let xn = b3.prox;
            guard(&xn, "penalty iterate")?;
            oracle.declare_iterate(&xn);
            rec.on_iterate(&xn);
            rec.row(&oracle);
            steps.push(Step1 {
                eta: eta_t,
                xi,
                x: xn.clone(),
            });
            x = xn;
            t += 1;
        }
    }
    Ok(RunTrace {
        algo: "penalty".into(),
        rows: rec.rows,
        transcript: oracle.transcript().clone(),
        history1: Some(RunHistory1 { x0, steps }),
        history2: None,
        final_x: x,
        final_y: None,
    })
}

/// Augmented-Lagrangian method, first class. The dual vector is kept in
/// its pulled-back form x̂ = Aᵀz (z itself never materializes), updated
/// x̂ += dual_step·ρ·AᵀAx before each primal step. With ρ = 0 the method
/// reduces bit-for-bit to the penalty driver at zero penalty.
pub fn run_alm_class1(
    p: &InstanceParams,
    rho: f64,
    dual_step: f64,
    max_oracles: usize,
) -> Result<RunTrace> {
    if !(rho.is_finite() && rho >= 0.0) || !(dual_step.is_finite() && dual_step >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "alm needs finite rho >= 0 and dual_step >= 0, got rho={rho} dual_step={dual_step}"
        )));
    }
    let step = 1.0 / (p.lf + rho * p.a_norm * p.a_norm);
    let mut oracle = Oracle::new(p.clone());
    let mut rec = Recorder::new(p);
    let zeros_n = vec![0.0; p.n];
    let x0 = BlockVector::zeros(p.m, p.dbar);
    oracle.declare_iterate(&x0);
    rec.on_iterate(&x0);
    let mut steps = Vec::new();
    let mut x = x0.clone();
    let mut xhat = BlockVector::zeros(p.m, p.dbar); // Aᵀz, z⁰ = 0
    if max_oracles >= 1 {
        let b = oracle.oracle1(&x0, &zeros_n, step)?;
        let mut xi = b.grad_f0;
        for v in &mut xi.data {
            *v *= -step;
        }
        x = xi.clone();
        oracle.declare_iterate(&x);
        rec.on_iterate(&x);
        rec.row(&oracle);
        steps.push(Step1 {
            eta: step,
            xi,
            x: x.clone(),
        });
        while oracle.count() + 3 <= max_oracles {
            let b1 = oracle.oracle1(&x, &zeros_n, step)?;
            rec.row(&oracle);
            let b2 = oracle.oracle1(&x, &b1.ax, step)?;
            rec.row(&oracle);
            for k in 0..p.d {
                xhat.data[k] += dual_step * rho * b2.at_z.data[k];
            }
            let mut xi = x.clone();
            for k in 0..p.d {
                xi.data[k] -= step * (b1.grad_f0.data[k] + xhat.data[k] + rho * b2.at_z.data[k]);
            }
            let b3 = oracle.oracle1(&xi, &zeros_n, step)?;
            let xn = b3.prox;
            guard(&xn, "alm iterate")?;
            oracle.declare_iterate(&xn);
            rec.on_iterate(&xn);
            rec.row(&oracle);
            steps.push(Step1 {
                eta: step,
                xi,
                x: xn.clone(),
            });
            x = xn;
        }
    }
    Ok(RunTrace {
        algo: "alm".into(),
        rows: rec.rows,
        transcript: oracle.transcript().clone(),
        history1: Some(RunHistory1 { x0, steps }),
        history2: None,
        final_x: x,
        final_y: None,
    })
}

/// Linearized ADMM, second class. Three calls per iteration: one adjoint
/// call carrying both dual combinations for the linearized primal step,
/// one forward fetch at the new iterate, one prox call for the row-space
/// update at step size 1/ρ. The primal step size defaults to
/// 1/(L_f + ρ‖Ā‖² + ρ‖A‖²).
pub fn run_ladmm_class2(
    p: &InstanceParams,
    rho: f64,
    eta: Option<&Schedule>,
    max_oracles: usize,
) -> Result<RunTrace> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::InvalidParams(format!("ladmm needs rho > 0, got {rho}")));
    }
    if let Some(e) = eta {
        e.validate("step-size", false)?;
    }
    let default_tau = 1.0 / (p.lf + rho * p.abar_norm * p.abar_norm + rho * p.a_norm * p.a_norm);
    let tau_at = |t: usize| -> f64 {
        match eta {
            Some(e) => e.at(t),
            None => default_tau,
        }
    };
    let eta_prox = 1.0 / rho;
    let nbar_blocks = p.m_seps.len();
    let mut oracle = Oracle::new(p.clone());
    let mut rec = Recorder::new(p);
    let zeros_n = vec![0.0; p.n];
    let x0 = BlockVector::zeros(p.m, p.dbar);
    let y0 = YVector::zeros(nbar_blocks, p.dbar);
    oracle.declare_iterate(&x0);
    rec.on_iterate(&x0);
    let mut steps = Vec::new();
    let mut x = x0.clone();
    let mut y = y0.clone();
    let mut z1 = vec![0.0; p.nbar];
    let mut z2 = vec![0.0; p.n];
    let mut grad = None;
    let mut abar_x = vec![0.0; p.nbar];
    let mut ax = vec![0.0; p.n];
    let mut t = 1;
    if max_oracles >= 4 {
        // bootstrap fetch at the origin
        let b = oracle.oracle2(&x0, &y0, &zeros_n, tau_at(1))?;
        rec.row(&oracle);
        grad = Some(b.grad_f0);
        abar_x = b.abar_x.data;
        ax = b.ax;
    }
    while grad.is_some() && oracle.count() + 3 <= max_oracles {
        let tau = tau_at(t);
        // dual combinations seen by the linearized step
        let mut yarg = YVector::from_vec(p.dbar, vec![0.0; p.nbar]);
        for k in 0..p.nbar {
            yarg.data[k] = z1[k] + rho * (abar_x[k] - y.data[k]);
        }
        let mut zarg = vec![0.0; p.n];
        for k in 0..p.n {
            zarg[k] = z2[k] + rho * ax[k];
        }
        let b1 = oracle.oracle2(&x, &yarg, &zarg, tau)?;
        rec.row(&oracle);
        let g = grad.as_ref().expect("bootstrap ran");
        let mut xn = x.clone();
        for k in 0..p.d {
            xn.data[k] -= tau * (g.data[k] + b1.abar_t_y.data[k] + b1.at_z.data[k]);
        }
        guard(&xn, "ladmm iterate")?;
        let b2 = oracle.oracle2(&xn, &y, &zeros_n, tau)?;
        rec.row(&oracle);
        let mut xi_y = YVector::from_vec(p.dbar, vec![0.0; p.nbar]);
        for k in 0..p.nbar {
            xi_y.data[k] = b2.abar_x.data[k] + z1[k] / rho;
        }
        let b3 = oracle.oracle2(&xn, &xi_y, &zeros_n, eta_prox)?;
        let yn = b3.prox;
        for k in 0..p.nbar {
            z1[k] += rho * (b2.abar_x.data[k] - yn.data[k]);
        }
        for k in 0..p.n {
            z2[k] += rho * b2.ax[k];
        }
        oracle.declare_iterate(&xn);
        rec.on_iterate(&xn);
        rec.row(&oracle);
        steps.push(Step2 {
            eta: eta_prox,
            x: xn.clone(),
            xi_y,
            y: yn.clone(),
        });
        grad = Some(b2.grad_f0);
        abar_x = b2.abar_x.data;
        ax = b2.ax;
        x = xn;
        y = yn;
        t += 1;
    }
    Ok(RunTrace {
        algo: "ladmm".into(),
        rows: rec.rows,
        transcript: oracle.transcript().clone(),
        history1: None,
        history2: Some(RunHistory2 { x0, y0, steps }),
        final_x: x,
        final_y: Some(y),
    })
}

/// Generators a first-class rule may combine for its pre-prox point:
/// past iterates, their gradients, and their Gram images, all 0-based by
/// step index.
#[derive(Debug, Clone, Copy)]
pub enum Gen1 {
    X(usize),
    Grad(usize),
    Gram(usize),
}

pub struct Class1Plan {
    pub terms: Vec<(Gen1, f64)>,
    /// raw vector added verbatim — takes the run outside the class; used
    /// to demonstrate that the verifier catches cheating rules
    pub extra: Option<BlockVector>,
    pub eta: f64,
    /// x = mix.0 · ξ + mix.1 · prox(ξ)
    pub mix: (f64, f64),
}

pub trait Class1Rule {
    fn plan(&mut self, t: usize) -> Class1Plan;
}

/// Execute an arbitrary first-class rule through the metered oracle:
/// two fetch calls per historical iterate (one at the origin) plus one
/// prox call per step.
pub fn run_generic_class1(
    p: &InstanceParams,
    rule: &mut dyn Class1Rule,
    max_oracles: usize,
) -> Result<RunTrace> {
    let mut oracle = Oracle::new(p.clone());
    let mut rec = Recorder::new(p);
    let zeros_n = vec![0.0; p.n];
    let x0 = BlockVector::zeros(p.m, p.dbar);
    oracle.declare_iterate(&x0);
    rec.on_iterate(&x0);
    let mut xs = vec![x0.clone()];
    let mut grads: Vec<BlockVector> = Vec::new();
    let mut grams: Vec<BlockVector> = Vec::new();
    let mut steps = Vec::new();
    let mut t = 1;
    loop {
        let fetch_cost = if t == 1 { 1 } else { 2 };
        if oracle.count() + fetch_cost + 1 > max_oracles {
            break;
        }
        let plan = rule.plan(t);
        if !(plan.eta.is_finite() && plan.eta > 0.0) {
            return Err(Error::InvalidParams(format!(
                "rule produced bad step size {}",
                plan.eta
            )));
        }
        // fetch generators of the latest iterate
        let prev = &xs[t - 1];
        if t == 1 {
            // at the origin the forward image is 0, so the adjoint slot
            // already carries the Gram image
            let b = oracle.oracle1(prev, &zeros_n, plan.eta)?;
            rec.row(&oracle);
            grads.push(b.grad_f0);
            grams.push(b.at_z);
        } else {
            let b1 = oracle.oracle1(prev, &zeros_n, plan.eta)?;
            rec.row(&oracle);
            let b2 = oracle.oracle1(prev, &b1.ax, plan.eta)?;
            rec.row(&oracle);
            grads.push(b1.grad_f0);
            grams.push(b2.at_z);
        }
        let mut xi = BlockVector::zeros(p.m, p.dbar);
        for &(gen, coeff) in &plan.terms {
            let (src, s) = match gen {
                Gen1::X(s) => (&xs, s),
                Gen1::Grad(s) => (&grads, s),
                Gen1::Gram(s) => (&grams, s),
            };
            if s >= t {
                return Err(Error::IndexOutOfRange {
                    what: "rule generator step",
                    got: s,
                    max: t - 1,
                });
            }
            for k in 0..p.d {
                xi.data[k] += coeff * src[s].data[k];
            }
        }
        if let Some(extra) = &plan.extra {
            for k in 0..p.d {
                xi.data[k] += extra.data[k];
            }
        }
        let b = oracle.oracle1(&xi, &zeros_n, plan.eta)?;
        let mut xn = BlockVector::zeros(p.m, p.dbar);
        for k in 0..p.d {
            xn.data[k] = plan.mix.0 * xi.data[k] + plan.mix.1 * b.prox.data[k];
        }
        guard(&xn, "generic class-1 iterate")?;
        oracle.declare_iterate(&xn);
        rec.on_iterate(&xn);
        rec.row(&oracle);
        steps.push(Step1 {
            eta: plan.eta,
            xi,
            x: xn.clone(),
        });
        xs.push(xn);
        t += 1;
    }
    let final_x = xs.last().unwrap().clone();
    Ok(RunTrace {
        algo: "generic1".into(),
        rows: rec.rows,
        transcript: oracle.transcript().clone(),
        history1: Some(RunHistory1 { x0, steps }),
        history2: None,
        final_x,
        final_y: None,
    })
}

/// Generators available to a second-class rule on the iterate side…
#[derive(Debug, Clone, Copy)]
pub enum GenX2 {
    X(usize),
    Grad(usize),
    GramA(usize),
    GramAbar(usize),
    AbarTY(usize),
}

/// …and on the row-space side. `AbarX(t)` at the current step is allowed:
/// the row-space update may see the forward image of the iterate just
/// formed.
#[derive(Debug, Clone, Copy)]
pub enum GenY2 {
    Y(usize),
    GramY(usize),
    AbarX(usize),
}

pub struct Class2Plan {
    pub x_terms: Vec<(GenX2, f64)>,
    pub x_extra: Option<BlockVector>,
    pub y_terms: Vec<(GenY2, f64)>,
    pub eta: f64,
    /// y = mix_y.0 · ξ_y + mix_y.1 · prox(ξ_y)
    pub mix_y: (f64, f64),
}

pub trait Class2Rule {
    fn plan(&mut self, t: usize) -> Class2Plan;
}

/// Execute an arbitrary second-class rule. Fetch calls are scheduled so
/// every generator value consumed was produced by a metered call (images
/// of the zero vector are used directly — zero is in every span).
pub fn run_generic_class2(
    p: &InstanceParams,
    rule: &mut dyn Class2Rule,
    max_oracles: usize,
) -> Result<RunTrace> {
    let nbar_blocks = p.m_seps.len();
    let mut oracle = Oracle::new(p.clone());
    let mut rec = Recorder::new(p);
    let zeros_n = vec![0.0; p.n];
    let zero_y = YVector::zeros(nbar_blocks, p.dbar);
    let x0 = BlockVector::zeros(p.m, p.dbar);
    let y0 = zero_y.clone();
    oracle.declare_iterate(&x0);
    rec.on_iterate(&x0);
    let mut xs = vec![x0.clone()];
    let mut ys = vec![y0.clone()];
    // index-aligned caches; entries for step 0 are structurally zero
    let zero_d = BlockVector::zeros(p.m, p.dbar);
    let mut grads: Vec<BlockVector> = Vec::new();
    let mut axs: Vec<Vec<f64>> = vec![vec![0.0; p.n]];
    let mut abar_xs: Vec<Vec<f64>> = vec![vec![0.0; p.nbar]];
    let mut gram_a: Vec<BlockVector> = vec![zero_d.clone()];
    let mut gram_abar: Vec<BlockVector> = vec![zero_d.clone()];
    let mut abar_t_y: Vec<BlockVector> = vec![zero_d.clone()];
    let mut gram_y: Vec<Option<Vec<f64>>> = vec![Some(vec![0.0; p.nbar])];
    let mut steps = Vec::new();
    let mut t = 1;
    'outer: loop {
        let plan = rule.plan(t);
        if !(plan.eta.is_finite() && plan.eta > 0.0) {
            return Err(Error::InvalidParams(format!(
                "rule produced bad step size {}",
                plan.eta
            )));
        }
        // gradient fetch for the origin (all later iterates are fetched by
        // the forward call made right after they are formed)
        if grads.is_empty() {
            if oracle.count() >= max_oracles {
                break;
            }
            let b = oracle.oracle2(&xs[0], &ys[0], &zeros_n, plan.eta)?;
            rec.row(&oracle);
            grads.push(b.grad_f0);
        }
        // adjoint of the newest row-space iterate (formed last step with no
        // fetch of its own; the origin entry is preseeded)
        if abar_t_y.len() < t {
            if oracle.count() >= max_oracles {
                break;
            }
            let b = oracle.oracle2(&xs[t - 1], &ys[t - 1], &zeros_n, plan.eta)?;
            rec.row(&oracle);
            abar_t_y.push(b.abar_t_y);
        }
        // Gram fetch for the newest iterate (origin entries preseeded zero)
        if gram_a.len() < t {
            if oracle.count() >= max_oracles {
                break;
            }
            let yslot = YVector::from_vec(p.dbar, abar_xs[t - 1].clone());
            let b = oracle.oracle2(&xs[t - 1], &yslot, &axs[t - 1], plan.eta)?;
            rec.row(&oracle);
            gram_abar.push(b.abar_t_y);
            gram_a.push(b.at_z);
        }
        // lazy fetch of the row-space Gram generators the plan references
        for &(gen, _) in &plan.y_terms {
            if let GenY2::GramY(s) = gen {
                if s >= t {
                    return Err(Error::IndexOutOfRange {
                        what: "rule generator step",
                        got: s,
                        max: t - 1,
                    });
                }
                if gram_y[s].is_none() {
                    if oracle.count() >= max_oracles {
                        break 'outer;
                    }
                    let b = oracle.oracle2(&abar_t_y[s], &zero_y, &zeros_n, plan.eta)?;
                    rec.row(&oracle);
                    gram_y[s] = Some(b.abar_x.data);
                }
            }
        }
        // two calls remain: the forward fetch at the new iterate and the
        // row-space prox
        if oracle.count() + 2 > max_oracles {
            break;
        }
        let mut xn = BlockVector::zeros(p.m, p.dbar);
        for &(gen, coeff) in &plan.x_terms {
            let (vecref, s): (&[f64], usize) = match gen {
                GenX2::X(s) => (&xs[s].data, s),
                GenX2::Grad(s) => (&grads[s].data, s),
                GenX2::GramA(s) => (&gram_a[s].data, s),
                GenX2::GramAbar(s) => (&gram_abar[s].data, s),
                GenX2::AbarTY(s) => (&abar_t_y[s].data, s),
            };
            if s >= t {
                return Err(Error::IndexOutOfRange {
                    what: "rule generator step",
                    got: s,
                    max: t - 1,
                });
            }
            for k in 0..p.d {
                xn.data[k] += coeff * vecref[k];
            }
        }
        if let Some(extra) = &plan.x_extra {
            for k in 0..p.d {
                xn.data[k] += extra.data[k];
            }
        }
        guard(&xn, "generic class-2 iterate")?;
        // forward fetch at the new iterate; also provides its gradient for
        // later steps
        let b = oracle.oracle2(&xn, &ys[t - 1], &zeros_n, plan.eta)?;
        rec.row(&oracle);
        axs.push(b.ax);
        abar_xs.push(b.abar_x.data);
        grads.push(b.grad_f0);
        xs.push(xn.clone());
        let mut xi_y = YVector::from_vec(p.dbar, vec![0.0; p.nbar]);
        for &(gen, coeff) in &plan.y_terms {
            let (vecref, s, max_s): (&[f64], usize, usize) = match gen {
                GenY2::Y(s) => (&ys[s].data, s, t - 1),
                GenY2::GramY(s) => (gram_y[s].as_ref().unwrap(), s, t - 1),
                GenY2::AbarX(s) => (&abar_xs[s], s, t),
            };
            if s > max_s {
                return Err(Error::IndexOutOfRange {
                    what: "rule generator step",
                    got: s,
                    max: max_s,
                });
            }
            for k in 0..p.nbar {
                xi_y.data[k] += coeff * vecref[k];
            }
        }
        let bp = oracle.oracle2(&xn, &xi_y, &zeros_n, plan.eta)?;
        let mut yn = YVector::from_vec(p.dbar, vec![0.0; p.nbar]);
        for k in 0..p.nbar {
            yn.data[k] = plan.mix_y.0 * xi_y.data[k] + plan.mix_y.1 * bp.prox.data[k];
        }
        oracle.declare_iterate(&xn);
        rec.on_iterate(&xn);
        rec.row(&oracle);
        steps.push(Step2 {
            eta: plan.eta,
            x: xn,
            xi_y,
            y: yn.clone(),
        });
        ys.push(yn);
        gram_y.push(None);
        t += 1;
    }
    let final_x = xs.last().unwrap().clone();
    let final_y = ys.last().unwrap().clone();
    Ok(RunTrace {
        algo: "generic2".into(),
        rows: rec.rows,
        transcript: oracle.transcript().clone(),
        history1: None,
        history2: Some(RunHistory2 { x0, y0, steps }),
        final_x,
        final_y: Some(final_y),
    })
}

/// A user-supplied update rule tagged with the class it claims to run in.
pub enum GenericRule<'a> {
    Class1(&'a mut dyn Class1Rule),
    Class2(&'a mut dyn Class2Rule),
}

/// Single entry point for arbitrary class members under metering.
pub fn run_generic(
    p: &InstanceParams,
    rule: GenericRule<'_>,
    max_oracles: usize,
) -> Result<RunTrace> {
    match rule {
        GenericRule::Class1(r) => run_generic_class1(p, r, max_oracles),
        GenericRule::Class2(r) => run_generic_class2(p, r, max_oracles),
    }
}

/// Randomized first-class rule: a stable descent-flavored combination of
/// recent generators with randomized penalty weight, step size, history
/// reach, and prox mixing.
pub struct RandomClass1Rule {
    rng: ChaCha8Rng,
    lf: f64,
    a_norm2: f64,
}

impl RandomClass1Rule {
    pub fn new(p: &InstanceParams, seed: u64) -> Self {
        RandomClass1Rule {
            rng: ChaCha8Rng::seed_from_u64(seed),
            lf: p.lf,
            a_norm2: p.a_norm * p.a_norm,
        }
    }
}

impl Class1Rule for RandomClass1Rule {
    fn plan(&mut self, t: usize) -> Class1Plan {
        let rng = &mut self.rng;
        let rho: f64 = 10f64.powf(rng.gen_range(-2.0..1.0));
        let eta = rng.gen_range(0.2..1.0) / (self.lf + rho * self.a_norm2);
        let mut terms = vec![
            (Gen1::X(t - 1), 1.0),
            (Gen1::Grad(t - 1), -eta),
            (Gen1::Gram(t - 1), -eta * rho),
        ];
        if t >= 2 && rng.gen_bool(0.5) {
            let s = rng.gen_range(0..t - 1);
            terms.push((Gen1::Grad(s), -eta * rng.gen_range(0.0..0.3)));
        }
        if t >= 2 && rng.gen_bool(0.3) {
            let s = rng.gen_range(0..t);
            terms.push((Gen1::X(s), rng.gen_range(-0.05..0.05)));
        }
        let alpha: f64 = if rng.gen_bool(0.5) {
            1.0
        } else {
            rng.gen_range(0.5..1.0)
        };
        Class1Plan {
            terms,
            extra: None,
            eta,
            mix: (1.0 - alpha, alpha),
        }
    }
}

/// Randomized second-class rule, same spirit.
pub struct RandomClass2Rule {
    rng: ChaCha8Rng,
    lf: f64,
    a_norm2: f64,
    abar_norm2: f64,
}

impl RandomClass2Rule {
    pub fn new(p: &InstanceParams, seed: u64) -> Self {
        RandomClass2Rule {
            rng: ChaCha8Rng::seed_from_u64(seed),
            lf: p.lf,
            a_norm2: p.a_norm * p.a_norm,
            abar_norm2: p.abar_norm * p.abar_norm,
        }
    }
}

impl Class2Rule for RandomClass2Rule {
    fn plan(&mut self, t: usize) -> Class2Plan {
        let rng = &mut self.rng;
        let rho: f64 = 10f64.powf(rng.gen_range(-1.0..0.7));
        let tau = rng.gen_range(0.3..1.0) / (self.lf + rho * (self.a_norm2 + self.abar_norm2));
        let mut x_terms = vec![
            (GenX2::X(t - 1), 1.0),
            (GenX2::Grad(t - 1), -tau),
            (GenX2::GramA(t - 1), -tau * rho),
            (GenX2::GramAbar(t - 1), -tau * rho),
            (GenX2::AbarTY(t - 1), tau * rho * rng.gen_range(0.0..1.0)),
        ];
        if t >= 2 && rng.gen_bool(0.4) {
            let s = rng.gen_range(0..t - 1);
            x_terms.push((GenX2::Grad(s), -tau * rng.gen_range(0.0..0.2)));
        }
        let mut y_terms = vec![(GenY2::AbarX(t), 1.0)];
        if rng.gen_bool(0.6) {
            y_terms.push((GenY2::Y(t - 1), rng.gen_range(-0.2..0.2)));
        }
        if rng.gen_bool(0.3) {
            let s = rng.gen_range(0..t);
            y_terms.push((GenY2::GramY(s), rng.gen_range(-0.01..0.01) / self.abar_norm2.max(1.0)));
        }
        let alpha: f64 = if rng.gen_bool(0.5) {
            1.0
        } else {
            rng.gen_range(0.5..1.0)
        };
        Class2Plan {
            x_terms,
            x_extra: None,
            y_terms,
            eta: 1.0 / rho,
            mix_y: (1.0 - alpha, alpha),
        }
    }
}

/// Upper staircase for the support front: clamp(⌊2 + rate·(t−2)/m⌋, 0, d̄),
/// exact in integer arithmetic. `rate` is 6 for the first class and 3 for
/// the second.
pub fn staircase(m: usize, dbar: usize, rate: u64, t: usize) -> usize {
    let num = 2 * m as i64 + rate as i64 * (t as i64 - 2);
    if num < 0 {
        return 0;
    }
    ((num / m as i64) as usize).min(dbar)
}

/// First step index whose front violates the class growth bound
/// J ≥ 2 ⇒ rate·(t−2) ≥ m·(J−2), if any.
pub fn front_rate_violation(fronts: &[usize], m: usize, rate: u64) -> Option<usize> {
    for (t, &j) in fronts.iter().enumerate() {
        if j >= 2 && (rate as i64) * (t as i64 - 2) < (m as i64) * (j as i64 - 2) {
            return Some(t);
        }
    }
    None
}
