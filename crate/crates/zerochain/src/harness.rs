//! Command layer shared by the `harness` binary and the acceptance suite:
//! layered run configuration, the ten acceptance checks with measured
//! slack, run artifacts (trace CSV, summary JSON, call-log JSONL),
//! front-trace export, and the recomputed threshold table.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::algorithms::{
    front_rate_violation, run_alm_class1, run_generic_class1, run_generic_class2,
    run_ladmm_class2, run_penalty_class1, staircase, RandomClass1Rule, RandomClass2Rule,
    RunTrace, Schedule, DEFAULT_MAX_ORACLES,
};
use crate::bruteforce::{self, ProxKind, TestRng};
use crate::error::{Error, Result};
use crate::instance::{
    delta_f0_upper, f0, grad_f0, grad_h, h, BlockVector, InstanceConfig, InstanceParams, Regime,
    YVector,
};
use crate::linops::{apply, eig_hht, kappa_a, kappa_joint, OperatorTag};
use crate::oracle::fnv1a;
use crate::prox::{prox_g, prox_gbar, prox_residual_at, ProxOp};
use crate::stationarity::{
    certificate_lb, residual_ap, residual_p, residual_sp, small_coordinate_witness,
    DEFAULT_INNER_TOL,
};

// ---------------------------------------------------------------------------
// configuration

/// Fully resolved invocation settings: defaults, overlaid by an optional
/// JSON config file, overlaid by CLI flags.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunConfig {
    pub instance: InstanceConfig,
    pub algo: String,
    pub max_oracles: usize,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            instance: InstanceConfig::default(),
            algo: "penalty".into(),
            max_oracles: DEFAULT_MAX_ORACLES,
            seed: 17,
            out: PathBuf::from("."),
        }
    }
}

/// One layer of overrides; unset fields keep the value below them.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigPatch {
    pub eps: Option<f64>,
    pub lf: Option<f64>,
    pub m1: Option<usize>,
    pub m2: Option<usize>,
    pub dbar: Option<usize>,
    pub beta: Option<f64>,
    pub algo: Option<String>,
    pub max_oracles: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn apply(&mut self, q: &ConfigPatch) {
        if let Some(v) = q.eps {
            self.instance.eps = v;
        }
        if let Some(v) = q.lf {
            self.instance.lf = v;
        }
        if let Some(v) = q.m1 {
            self.instance.m1 = v;
        }
        if let Some(v) = q.m2 {
            self.instance.m2 = v;
        }
        if let Some(v) = q.dbar {
            self.instance.dbar = v;
        }
        if let Some(v) = q.beta {
            self.instance.beta = Some(v);
        }
        if let Some(v) = &q.algo {
            self.algo = v.clone();
        }
        if let Some(v) = q.max_oracles {
            self.max_oracles = v;
        }
        if let Some(v) = q.seed {
            self.seed = v;
        }
        if let Some(v) = &q.out {
            self.out = v.clone();
        }
    }

    /// defaults < JSON config file < CLI flags
    pub fn layered(file: Option<&Path>, cli: &ConfigPatch) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path)?;
            let patch: ConfigPatch = serde_json::from_str(&text)?;
            cfg.apply(&patch);
        }
        cfg.apply(cli);
        Ok(cfg)
    }

    pub fn params(&self) -> Result<InstanceParams> {
        InstanceParams::new(&self.instance)
    }

    /// 16-hex digest of everything that shapes the computation (the output
    /// directory is deliberately excluded), used to template filenames.
    pub fn hash(&self) -> String {
        let ic = &self.instance;
        let beta = match ic.beta {
            Some(b) => format!("{b:e}"),
            None => "default".into(),
        };
        let key = format!(
            "eps={:e}|lf={:e}|m1={}|m2={}|dbar={}|beta={}|algo={}|max_oracles={}|seed={}",
            ic.eps, ic.lf, ic.m1, ic.m2, ic.dbar, beta, self.algo, self.max_oracles, self.seed
        );
        format!("{:016x}", fnv1a(key.bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Penalty,
    Alm,
    Ladmm,
}

impl Algo {
    pub fn parse(name: &str) -> Result<Algo> {
        match name.to_ascii_lowercase().as_str() {
            "penalty" => Ok(Algo::Penalty),
            "alm" => Ok(Algo::Alm),
            "ladmm" | "admm" => Ok(Algo::Ladmm),
            other => Err(Error::InvalidParams(format!(
                "unknown algorithm '{other}' (shipped: penalty, alm, ladmm)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algo::Penalty => "penalty",
            Algo::Alm => "alm",
            Algo::Ladmm => "ladmm",
        }
    }

    /// Support-front growth budget per m oracle calls for the class.
    pub fn rate(self) -> u64 {
        match self {
            Algo::Penalty | Algo::Alm => 6,
            Algo::Ladmm => 3,
        }
    }

    pub fn run(self, p: &InstanceParams, max_oracles: usize) -> Result<RunTrace> {
        match self {
            Algo::Penalty => run_penalty_class1(p, &Schedule::Constant(1.0), None, max_oracles),
            Algo::Alm => run_alm_class1(p, 1.0, 1.0, max_oracles),
            Algo::Ladmm => run_ladmm_class2(p, 1.0, None, max_oracles),
        }
    }
}

// ---------------------------------------------------------------------------
// acceptance checks

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub id: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

fn run_check<F>(id: &'static str, body: F) -> CheckResult
where
    F: FnOnce() -> Result<(bool, String)>,
{
    let t0 = Instant::now();
    let (pass, detail) = match body() {
        Ok(x) => x,
        Err(e) => (false, format!("errored: {e}")),
    };
    CheckResult {
        id,
        pass,
        detail,
        seconds: t0.elapsed().as_secs_f64(),
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn l2_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn linf_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn rand_block(p: &InstanceParams, rng: &mut TestRng, radius: f64) -> BlockVector {
    let data = (0..p.d)
        .map(|_| radius * (2.0 * rng.next_f64() - 1.0))
        .collect();
    BlockVector::from_vec(p.dbar, data)
}

/// Largest step index at which the front is still provably below `dbar`
/// for the given class rate: the last t with rate*(t-2) < m*(dbar-2).
pub fn nonstat_step_limit(p: &InstanceParams, rate: u64) -> usize {
    let x = p.m as u64 * (p.dbar as u64 - 2) + 2 * rate;
    ((x + rate - 1) / rate - 1) as usize
}

fn theorem_threshold(p: &InstanceParams, denom_coeff: f64) -> u64 {
    let v = kappa_joint(p) * p.lf * delta_f0_upper(p) / (denom_coeff * PI * PI * p.eps * p.eps);
    v.ceil() as u64
}

/// Closed-form spectrum of HHᵀ against a dense eigensolve, and the joint
/// condition number against the dense ratio of extreme singular values.
pub fn check_spectrum(p: &InstanceParams) -> CheckResult {
    run_check("spectrum-conditioning", || {
        let hm = bruteforce::dense(p, OperatorTag::H)?;
        let rows = hm.len();
        let mut gram = vec![vec![0.0; rows]; rows];
        for r in 0..rows {
            for c in 0..=r {
                let s: f64 = hm[r].iter().zip(&hm[c]).map(|(a, b)| a * b).sum();
                gram[r][c] = s;
                gram[c][r] = s;
            }
        }
        let mut dense = bruteforce::jacobi_eigenvalues(&gram, 1e-14)?;
        dense.sort_by(f64::total_cmp);
        let mut closed = Vec::with_capacity(rows);
        for i in 1..p.m {
            let lam = eig_hht(p, i)?;
            closed.extend(std::iter::repeat(lam).take(p.dbar));
        }
        closed.sort_by(f64::total_cmp);
        let max_dev = dense
            .iter()
            .zip(&closed)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let kj = kappa_joint(p);
        let kd = (dense[rows - 1] / dense[0]).sqrt();
        let kdev = (kj - kd).abs();
        let m = p.m as f64;
        let in_window = m / 4.0 <= kj && kj < m;
        let pass = max_dev <= 1e-9 && kdev <= 1e-9 && in_window;
        Ok((
            pass,
            format!(
                "eigenvalue dev {max_dev:.3e} (tol 1e-9); kappa dev {kdev:.3e} (tol 1e-9); \
                 kappa {kj:.6} in [m/4, m) = [{:.1}, {:.1}): {in_window}",
                m / 4.0,
                m
            ),
        ))
    })
}

/// Gradients against central finite differences, and an empirical
/// Lipschitz probe of the full smooth gradient.
pub fn check_gradients(p: &InstanceParams, seed: u64) -> CheckResult {
    run_check("gradient-fd-lipschitz", || {
        let mut rng = TestRng::new(seed ^ 0xc2);
        let mut max_rel_h = 0.0f64;
        for _ in 0..100 {
            let i = 1 + (rng.next_u64() as usize) % p.m;
            let z: Vec<f64> = (0..p.dbar).map(|_| 6.0 * rng.next_f64() - 3.0).collect();
            let g = grad_h(p, i, &z)?;
            let fd = bruteforce::fd_grad(|w| h(p, i, w).expect("in-range block"), &z, 1e-5);
            max_rel_h = max_rel_h.max(l2_diff(&g, &fd) / l2(&g).max(1.0));
        }
        let radius = 2.0 / p.scale;
        let mut max_rel_f0 = 0.0f64;
        for _ in 0..10 {
            let x = rand_block(p, &mut rng, radius);
            let g = grad_f0(p, &x);
            let fd = bruteforce::fd_grad(
                |w| f0(p, &BlockVector::from_vec(p.dbar, w.to_vec())),
                &x.data,
                1e-5,
            );
            max_rel_f0 = max_rel_f0.max(l2_diff(&g.data, &fd) / l2(&g.data).max(1.0));
        }
        let ratio = bruteforce::lipschitz_probe(
            p.d,
            |v| grad_f0(p, &BlockVector::from_vec(p.dbar, v.to_vec())).data,
            10_000,
            seed ^ 0x11f,
        );
        let cap = p.lf * (1.0 + 1e-8);
        let pass = max_rel_h <= 1e-6 && max_rel_f0 <= 1e-6 && ratio <= cap;
        Ok((
            pass,
            format!(
                "FD rel err: core {max_rel_h:.3e}, summed {max_rel_f0:.3e} (tol 1e-6); \
                 Lipschitz ratio {ratio:.12} <= {cap:.12}"
            ),
        ))
    })
}

/// Closed-form proximal maps against derivative-free minimization plus the
/// subgradient-optimality score of every closed-form output.
pub fn check_prox(p: &InstanceParams, seed: u64) -> CheckResult {
    run_check("prox-closed-forms", || {
        let mut rng = TestRng::new(seed ^ 0x60);
        let mut max_gap = 0.0f64;
        let mut max_res = 0.0f64;
        let mut coords = 0usize;

        // soft threshold on the row-space side
        let vectors = 1000usize.div_ceil(p.nbar);
        for _ in 0..vectors {
            let eta = 0.1 + 2.0 * rng.next_f64();
            let c = eta * p.beta / p.mlf;
            let y: Vec<f64> = (0..p.nbar)
                .map(|_| 3.0 * (1.0 + c) * (2.0 * rng.next_f64() - 1.0))
                .collect();
            let closed = prox_gbar(p, &YVector::from_vec(p.dbar, y.clone()), eta)?;
            let numeric = bruteforce::prox_numeric(p, ProxKind::SoftThreshold, &y, eta);
            max_gap = max_gap.max(linf_diff(&closed.data, &numeric));
            max_res = max_res.max(prox_residual_at(
                p,
                ProxOp::SoftThreshold,
                &y,
                &closed.data,
                eta,
            )?);
            coords += p.nbar;
        }

        // pairwise coupling on the primal side
        let pair_coords = p.m_seps.len() * p.dbar;
        let vectors = 1000usize.div_ceil(pair_coords);
        for _ in 0..vectors {
            let eta = 1e-3 + 0.1 * rng.next_f64();
            let x = rand_block(p, &mut rng, 10.0);
            let closed = prox_g(p, &x, eta)?;
            let numeric = bruteforce::prox_numeric(p, ProxKind::PairCoupling, &x.data, eta);
            max_gap = max_gap.max(linf_diff(&closed.data, &numeric));
            max_res = max_res.max(prox_residual_at(
                p,
                ProxOp::PairCoupling,
                &x.data,
                &closed.data,
                eta,
            )?);
            coords += pair_coords;
        }
        let pass = max_gap <= 1e-8 && max_res <= 1e-10;
        Ok((
            pass,
            format!(
                "{coords} coordinates: max closed-vs-numeric gap {max_gap:.3e} (tol 1e-8); \
                 max subgradient residual {max_res:.3e} (tol 1e-10)"
            ),
        ))
    })
}

fn sparse_block(p: &InstanceParams, rng: &mut TestRng, density: f64) -> BlockVector {
    let mut x = BlockVector::zeros(p.m, p.dbar);
    for v in &mut x.data {
        if rng.next_f64() < density {
            *v = 4.0 * rng.next_f64() - 2.0;
        }
    }
    x
}

fn sparse_y(p: &InstanceParams, rng: &mut TestRng, density: f64) -> YVector {
    let mut y = YVector::zeros(p.m_seps.len(), p.dbar);
    for v in &mut y.data {
        if rng.next_f64() < density {
            *v = 4.0 * rng.next_f64() - 2.0;
        }
    }
    y
}

/// Exact support relations: gradient front growth with its parity rule,
/// one-hop locality of the separator operators, prox spreading confined
/// to coupled pairs, and support invariance of the coupling Gram.
pub fn check_support(p: &InstanceParams, seed: u64) -> CheckResult {
    run_check("support-locality", || {
        let mut rng = TestRng::new(seed ^ 0x54);
        let db = p.dbar;
        let mut cases = 0usize;

        // gradient front cases
        for _ in 0..400 {
            let i = 1 + (rng.next_u64() as usize) % p.m;
            let j = (rng.next_u64() as usize) % (db + 1);
            let mut z = vec![0.0; db];
            for zk in z.iter_mut().take(j) {
                if rng.next_f64() < 0.6 {
                    *zk = 6.0 * rng.next_f64() - 3.0;
                }
            }
            if j >= 1 {
                while z[j - 1] == 0.0 {
                    z[j - 1] = 6.0 * rng.next_f64() - 3.0;
                }
            }
            let g = grad_h(p, i, &z)?;
            for (k, &gk) in g.iter().enumerate().skip(j + 1) {
                if gk != 0.0 {
                    return Ok((
                        false,
                        format!(
                            "gradient support leak: block {i}, front {j}, coordinate {}",
                            k + 1
                        ),
                    ));
                }
            }
            if g[0] == 0.0 && j == 0 {
                return Ok((false, format!("first coordinate dead at zero, block {i}")));
            }
            if j >= 1 && j < db {
                let expect = match p.regime(i) {
                    Regime::First => (j + 1) % 2 == 0,
                    Regime::Middle => false,
                    Regime::Last => (j + 1) % 2 == 1 && j + 1 >= 3,
                };
                let got = g[j] != 0.0;
                if got != expect {
                    return Ok((
                        false,
                        format!(
                            "front-advance parity mismatch: block {i} ({:?}), front {j}: \
                             advance={got}, expected {expect}",
                            p.regime(i)
                        ),
                    ));
                }
            }
            cases += 1;
        }

        // one-hop locality of the separator operators
        let hop_ok = |s: usize, lvl: &[bool]| lvl[s - 1] || lvl[s];
        for _ in 0..200 {
            let x = sparse_block(p, &mut rng, 0.15);
            let mut level = vec![vec![false; p.m]; db];
            for i in 0..p.m {
                for k in 0..db {
                    level[k][i] = x.data[i * db + k] != 0.0;
                }
            }
            for (tag, seps) in [
                (OperatorTag::AtA, &p.mc_seps),
                (OperatorTag::AbarTAbar, &p.m_seps),
            ] {
                let out = apply(p, tag, &x.data)?;
                for i in 1..=p.m {
                    for k in 0..db {
                        if out[(i - 1) * db + k] == 0.0 {
                            continue;
                        }
                        let near = seps
                            .iter()
                            .any(|&s| (s == i || s + 1 == i) && hop_ok(s, &level[k]));
                        if !near {
                            return Ok((
                                false,
                                format!("{tag:?} output outside one-hop closure at block {i}"),
                            ));
                        }
                    }
                }
            }
            let fwd = apply(p, OperatorTag::Abar, &x.data)?;
            for (r, &s) in p.m_seps.iter().enumerate() {
                for k in 0..db {
                    if fwd[r * db + k] != 0.0 && !hop_ok(s, &level[k]) {
                        return Ok((false, format!("forward row {r} active without input")));
                    }
                }
            }
            cases += 1;
        }

        // adjoint locality and Gram support invariance on the row side
        for _ in 0..200 {
            let y = sparse_y(p, &mut rng, 0.3);
            let back = apply(p, OperatorTag::AbarAdj, &y.data)?;
            for i in 1..=p.m {
                for k in 0..db {
                    if back[(i - 1) * db + k] == 0.0 {
                        continue;
                    }
                    let fed = p
                        .m_seps
                        .iter()
                        .enumerate()
                        .any(|(r, &s)| (s == i || s + 1 == i) && y.data[r * db + k] != 0.0);
                    if !fed {
                        return Ok((false, format!("adjoint output unfed at block {i}")));
                    }
                }
            }
            let gram = apply(p, OperatorTag::AbarAbarT, &y.data)?;
            for k in 0..y.data.len() {
                if (gram[k] != 0.0) != (y.data[k] != 0.0) {
                    return Ok((
                        false,
                        format!("coupling Gram changed support at entry {k}"),
                    ));
                }
            }
            cases += 1;
        }

        // prox spreading confined to coupled pairs
        let mut paired = vec![None; p.m];
        for &s in &p.m_seps {
            paired[s - 1] = Some(s);
            paired[s] = Some(s);
        }
        for _ in 0..200 {
            let eta = 1e-3 + 0.5 * rng.next_f64();
            let x = sparse_block(p, &mut rng, 0.2);
            let px = prox_g(p, &x, eta)?;
            for i in 1..=p.m {
                for k in 0..db {
                    if px.data[(i - 1) * db + k] == 0.0 {
                        continue;
                    }
                    let fed = match paired[i - 1] {
                        None => x.data[(i - 1) * db + k] != 0.0,
                        Some(s) => {
                            x.data[(s - 1) * db + k] != 0.0 || x.data[s * db + k] != 0.0
                        }
                    };
                    if !fed {
                        return Ok((false, format!("prox created support at block {i}")));
                    }
                }
            }
            let y = sparse_y(p, &mut rng, 0.3);
            let py = prox_gbar(p, &y, eta)?;
            for k in 0..y.data.len() {
                if py.data[k] != 0.0 && y.data[k] == 0.0 {
                    return Ok((false, format!("shrinkage created support at entry {k}")));
                }
            }
            cases += 1;
        }
        Ok((true, format!("{cases} randomized support cases, all exact")))
    })
}

/// residual_AP dominates the certificate everywhere, and the certificate
/// strictly exceeds eps whenever a small averaged coordinate exists.
pub fn check_certificate(p: &InstanceParams, seed: u64) -> CheckResult {
    run_check("certificate-order", || {
        let mut rng = TestRng::new(seed ^ 0xce);
        let wthr = 150.0 * PI * p.eps / ((p.m as f64).sqrt() * p.lf);
        let mut witnesses = 0usize;
        let mut min_slack = f64::INFINITY;
        let mut min_cert = f64::INFINITY;
        for trial in 0..10_000 {
            let radius = if trial % 2 == 0 { 0.5 * wthr } else { 3.0 * wthr };
            let x = rand_block(p, &mut rng, radius);
            let cert = certificate_lb(p, &x);
            let rap = residual_ap(p, &x).residual;
            min_slack = min_slack.min(rap - cert);
            if rap + 1e-12 < cert {
                return Ok((
                    false,
                    format!("ordering violated: residual_ap {rap:.6e} < certificate {cert:.6e}"),
                ));
            }
            if small_coordinate_witness(p, &x).is_some() {
                witnesses += 1;
                min_cert = min_cert.min(cert);
                if cert <= p.eps {
                    return Ok((
                        false,
                        format!("witness present but certificate {cert:.6e} <= eps {}", p.eps),
                    ));
                }
            }
        }
        let pass = witnesses > 0;
        Ok((
            pass,
            format!(
                "10000 points, {witnesses} with witness; min(residual_ap - certificate) \
                 {min_slack:.3e} >= -1e-12; min witnessed certificate {min_cert:.6} > eps {}",
                p.eps
            ),
        ))
    })
}

/// First-class front-rate bound with zero violations across named drivers
/// and randomized span-respecting rules, plus the forced non-stationarity
/// window it implies.
pub fn check_class1_rate(p: &InstanceParams, seed: u64) -> CheckResult {
    run_check("class1-front-rate", || {
        let mut traces = vec![
            run_penalty_class1(p, &Schedule::Constant(1.0), None, DEFAULT_MAX_ORACLES)?,
            run_alm_class1(p, 1.0, 1.0, DEFAULT_MAX_ORACLES)?,
        ];
        for k in 0..100 {
            let mut rule = RandomClass1Rule::new(p, seed.wrapping_add(k));
            traces.push(run_generic_class1(p, &mut rule, 60)?);
        }
        let t_lim = nonstat_step_limit(p, 6);
        let r0 = residual_ap(p, &BlockVector::zeros(p.m, p.dbar)).residual;
        if r0 <= p.eps {
            return Ok((false, format!("origin already eps-flat: {r0:.6e}")));
        }
        let mut guarded_rows = 0usize;
        let mut min_guarded = f64::INFINITY;
        for tr in &traces {
            if let Some(t) = front_rate_violation(tr.fronts(), p.m, 6) {
                return Ok((
                    false,
                    format!(
                        "{}: front-rate violation at step {t} (J = {})",
                        tr.algo,
                        tr.fronts()[t]
                    ),
                ));
            }
            for row in &tr.rows {
                if row.t <= t_lim {
                    guarded_rows += 1;
                    min_guarded = min_guarded.min(row.residual_ap);
                    if row.residual_ap <= p.eps {
                        return Ok((
                            false,
                            format!(
                                "{}: residual_ap {:.6e} <= eps at step {}",
                                tr.algo, row.residual_ap, row.t
                            ),
                        ));
                    }
                }
            }
        }
        Ok((
            true,
            format!(
                "{} runs, zero rate violations; residual_ap(0) = {r0:.6}; min residual_ap \
                 {min_guarded:.6} > eps {} over {guarded_rows} rows with t <= {t_lim}",
                traces.len(),
                p.eps
            ),
        ))
    })
}

/// Second-class front-rate bound (half the budget of the first class) and
/// the split-residual non-stationarity window.
pub fn check_class2_rate(p: &InstanceParams, seed: u64) -> CheckResult {
    run_check("class2-front-rate", || {
        let mut traces = vec![run_ladmm_class2(p, 1.0, None, DEFAULT_MAX_ORACLES)?];
        for k in 0..100 {
            let mut rule = RandomClass2Rule::new(p, seed.wrapping_add(1000 + k));
            traces.push(run_generic_class2(p, &mut rule, 64)?);
        }
        let t_lim = nonstat_step_limit(p, 3);
        let origin_sp = residual_sp(
            p,
            &BlockVector::zeros(p.m, p.dbar),
            &YVector::zeros(p.m_seps.len(), p.dbar),
            DEFAULT_INNER_TOL,
        )?
        .residual;
        if origin_sp <= p.eps / 2.0 {
            return Ok((false, format!("origin split residual {origin_sp:.6e} <= eps/2")));
        }
        let mut guarded = 0usize;
        let mut min_guarded = origin_sp;
        for tr in &traces {
            if let Some(t) = front_rate_violation(tr.fronts(), p.m, 3) {
                return Ok((
                    false,
                    format!(
                        "{}: front-rate violation at step {t} (J = {})",
                        tr.algo,
                        tr.fronts()[t]
                    ),
                ));
            }
            let h2 = tr.history2.as_ref().expect("second-class trace");
            for (idx, st) in h2.steps.iter().enumerate().take(t_lim) {
                let r = residual_sp(p, &st.x, &st.y, DEFAULT_INNER_TOL)?.residual;
                guarded += 1;
                min_guarded = min_guarded.min(r);
                if r <= p.eps / 2.0 {
                    return Ok((
                        false,
                        format!(
                            "{}: split residual {r:.6e} <= eps/2 at step {}",
                            tr.algo,
                            idx + 1
                        ),
                    ));
                }
            }
        }
        Ok((
            true,
            format!(
                "{} runs, zero rate violations; min split residual {min_guarded:.6} > eps/2 = \
                 {} over {guarded} step points with t <= {t_lim}",
                traces.len(),
                p.eps / 2.0
            ),
        ))
    })
}

/// The first step index where the front saturates grows linearly in the
/// number of blocks, with the slope the class-1 rate predicts.
pub fn check_scaling(cfg: &RunConfig) -> CheckResult {
    run_check("front-scaling-slope", || {
        let mut pts: Vec<(f64, f64)> = Vec::new();
        let mut shown = String::new();
        for &m2 in &[2usize, 4, 8] {
            let mut ic = cfg.instance.clone();
            ic.m1 = 2;
            ic.m2 = m2;
            ic.beta = None;
            let p = InstanceParams::new(&ic)?;
            let budget = 3 * (2 + p.m * (p.dbar - 2) / 6 + 30);
            let tr = run_penalty_class1(&p, &Schedule::Constant(1.0), None, budget)?;
            match tr.fronts().iter().position(|&j| j >= p.dbar) {
                Some(t) => {
                    let _ = write!(shown, "m={}: t_min={t}; ", p.m);
                    pts.push((p.m as f64, t as f64));
                }
                None => {
                    return Ok((
                        false,
                        format!(
                            "m={}: front never reached {} within {budget} oracles (max J {})",
                            p.m,
                            p.dbar,
                            tr.fronts().iter().max().unwrap()
                        ),
                    ));
                }
            }
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|q| q.0).sum::<f64>() / n;
        let mt = pts.iter().map(|q| q.1).sum::<f64>() / n;
        let slope = pts.iter().map(|q| (q.0 - mx) * (q.1 - mt)).sum::<f64>()
            / pts.iter().map(|q| (q.0 - mx) * (q.0 - mx)).sum::<f64>();
        let target = (cfg.instance.dbar as f64 - 2.0) / 6.0;
        let pass = (slope - target).abs() <= 0.2 * target;
        Ok((
            pass,
            format!("{shown}least-squares slope {slope:.4} vs target {target:.4} +/- 20%"),
        ))
    })
}

/// Whenever a trace point is eps-stationary for the penalized or split
/// formulation, it is (2x-)eps-stationary for the fully constrained one.
pub fn check_transfer(p: &InstanceParams) -> CheckResult {
    run_check("residual-transfer", || {
        let mut p_qualifying = 0usize;
        let mut sp_qualifying = 0usize;
        let mut worst_p = 0.0f64;
        let mut worst_sp = 0.0f64;
        for tr in [
            run_penalty_class1(p, &Schedule::Constant(1.0), None, DEFAULT_MAX_ORACLES)?,
            run_alm_class1(p, 1.0, 1.0, DEFAULT_MAX_ORACLES)?,
        ] {
            let h1 = tr.history1.as_ref().expect("first-class trace");
            let mut points: Vec<&BlockVector> = vec![&h1.x0];
            points.extend(h1.steps.iter().map(|s| &s.x));
            for x in points {
                let rp = residual_p(p, x, DEFAULT_INNER_TOL)?;
                if rp.residual <= p.eps {
                    p_qualifying += 1;
                    let rap = residual_ap(p, x).residual;
                    worst_p = worst_p.max(rap / rp.residual);
                    if rap > rp.residual * (1.0 + 1e-6) {
                        return Ok((
                            false,
                            format!(
                                "{}: residual_ap {rap:.9e} > residual_p {:.9e} * (1+1e-6)",
                                tr.algo, rp.residual
                            ),
                        ));
                    }
                }
            }
        }
        let tr = run_ladmm_class2(p, 1.0, None, DEFAULT_MAX_ORACLES)?;
        let h2 = tr.history2.as_ref().expect("second-class trace");
        let mut pairs: Vec<(&BlockVector, &YVector)> = vec![(&h2.x0, &h2.y0)];
        pairs.extend(h2.steps.iter().map(|s| (&s.x, &s.y)));
        for (x, y) in pairs {
            let rsp = residual_sp(p, x, y, DEFAULT_INNER_TOL)?;
            if rsp.residual <= p.eps {
                sp_qualifying += 1;
                let rap = residual_ap(p, x).residual;
                worst_sp = worst_sp.max(rap / rsp.residual);
                if rap > 2.0 * rsp.residual * (1.0 + 1e-6) {
                    return Ok((
                        false,
                        format!(
                            "ladmm: residual_ap {rap:.9e} > 2 * residual_sp {:.9e} * (1+1e-6)",
                            rsp.residual
                        ),
                    ));
                }
            }
        }
        Ok((
            true,
            format!(
                "{p_qualifying} penalized points qualified (max AP/P ratio {worst_p:.6}); \
                 {sp_qualifying} split points qualified (max AP/SP ratio {worst_sp:.6})"
            ),
        ))
    })
}

/// Joint-to-partial condition number ratio at the scaling configurations.
pub fn check_ratio(cfg: &RunConfig) -> CheckResult {
    run_check("condition-ratio", || {
        let mut detail = String::new();
        for &m2 in &[2usize, 4, 8] {
            let mut ic = cfg.instance.clone();
            ic.m1 = 2;
            ic.m2 = m2;
            ic.beta = None;
            let p = InstanceParams::new(&ic)?;
            let kj = kappa_joint(&p);
            let ka = kappa_a(&p)?;
            let ratio = kj / ka;
            let bound = 3.0 * m2 as f64 / 4.0;
            if ratio < bound {
                return Ok((
                    false,
                    format!("ratio {ratio:.6} < bound {bound:.2} at m2 = {m2}"),
                ));
            }
            let _ = write!(detail, "m2={m2}: ratio {ratio:.4} >= {bound:.2}; ");
        }
        Ok((true, detail.trim_end().to_string()))
    })
}

/// The full ordered suite. Construction errors (bad dbar, undersized beta)
/// surface as Err before any check runs.
pub fn all_checks(cfg: &RunConfig) -> Result<Vec<CheckResult>> {
    let p = cfg.params()?;
    Ok(vec![
        check_spectrum(&p),
        check_gradients(&p, cfg.seed),
        check_prox(&p, cfg.seed),
        check_support(&p, cfg.seed),
        check_certificate(&p, cfg.seed),
        check_class1_rate(&p, cfg.seed),
        check_class2_rate(&p, cfg.seed),
        check_scaling(cfg),
        check_transfer(&p),
        check_ratio(cfg),
    ])
}

// ---------------------------------------------------------------------------
// commands

/// Run every check, print one line per criterion, write the JSON report.
/// Exit code 0 only if everything passed.
pub fn cmd_verify(cfg: &RunConfig) -> Result<i32> {
    let checks = all_checks(cfg)?;
    let mut all = true;
    for c in &checks {
        println!(
            "{} {:<24} ({:6.2}s)  {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.id,
            c.seconds,
            c.detail
        );
        all &= c.pass;
    }
    fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join(format!("verify-{}.json", cfg.hash()));
    let report = json!({
        "config": cfg,
        "config_hash": cfg.hash(),
        "pass": all,
        "checks": checks,
    });
    fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    println!(
        "{} - report: {}",
        if all { "ALL CHECKS PASSED" } else { "CHECKS FAILED" },
        path.display()
    );
    Ok(if all { 0 } else { 1 })
}

/// Run the configured algorithm; write trace CSV, call-log JSONL, and a
/// summary JSON with measured oracles-to-eps and both threshold families.
pub fn cmd_run(cfg: &RunConfig) -> Result<i32> {
    let p = cfg.params()?;
    let algo = Algo::parse(&cfg.algo)?;
    let trace = algo.run(&p, cfg.max_oracles)?;
    fs::create_dir_all(&cfg.out)?;
    let stem = format!("run-{}-{}", algo.name(), cfg.hash());
    let csv_path = cfg.out.join(format!("{stem}.trace.csv"));
    fs::write(&csv_path, trace.to_csv())?;
    let jsonl_path = cfg.out.join(format!("{stem}.transcript.jsonl"));
    fs::write(&jsonl_path, trace.transcript.to_jsonl())?;

    let rate = algo.rate();
    let support_thr = 2.0 + (p.m * (p.dbar - 2)) as f64 / rate as f64;
    let denom = match algo {
        Algo::Ladmm => 72_000.0,
        _ => 36_000.0,
    };
    let t_lim = nonstat_step_limit(&p, rate);
    let r0 = residual_ap(&p, &BlockVector::zeros(p.m, p.dbar)).residual;

    let (oracles_to_eps, window_ok, window_level) = match algo {
        Algo::Penalty | Algo::Alm => {
            let hit = trace
                .rows
                .iter()
                .find(|r| r.residual_ap <= p.eps)
                .map(|r| r.oracle_count);
            let ok = r0 > p.eps
                && trace
                    .rows
                    .iter()
                    .filter(|r| r.t <= t_lim)
                    .all(|r| r.residual_ap > p.eps);
            (hit, ok, p.eps)
        }
        Algo::Ladmm => {
            let h2 = trace.history2.as_ref().expect("second-class trace");
            let mut hit = None;
            let r0sp = residual_sp(&p, &h2.x0, &h2.y0, DEFAULT_INNER_TOL)?.residual;
            let mut ok = r0sp > p.eps / 2.0;
            if r0sp <= p.eps {
                hit = Some(0);
            }
            for (idx, st) in h2.steps.iter().enumerate() {
                let t = idx + 1;
                if hit.is_some() && t > t_lim {
                    break;
                }
                let r = residual_sp(&p, &st.x, &st.y, DEFAULT_INNER_TOL)?.residual;
                if t <= t_lim && r <= p.eps / 2.0 {
                    ok = false;
                }
                if hit.is_none() && r <= p.eps {
                    hit = trace
                        .rows
                        .iter()
                        .find(|row| row.t == t)
                        .map(|row| row.oracle_count);
                }
            }
            (hit, ok, p.eps / 2.0)
        }
    };

    let summary = json!({
        "algo": algo.name(),
        "config": cfg,
        "config_hash": cfg.hash(),
        "m": p.m,
        "d": p.d,
        "beta": p.beta,
        "oracles_used": trace.oracles_used(),
        "steps": trace.fronts().len() - 1,
        "final_front": trace.fronts().last().copied().unwrap_or(0),
        "initial_residual_ap": r0,
        // fractional only when m*(dbar-2) is not a multiple of the rate
        "support_propagation_threshold_oracles": if support_thr.fract() == 0.0 {
            json!(support_thr as u64)
        } else {
            json!(support_thr)
        },
        "theorem_threshold_oracles": theorem_threshold(&p, denom),
        "theorem_threshold_note": "computed with Delta_F0 upper estimate",
        "oracles_to_eps": oracles_to_eps.map_or(json!("not reached"), |n| json!(n)),
        "nonstationary_window_steps": t_lim,
        "nonstationary_window_level": window_level,
        "nonstationary_window_ok": window_ok,
    });
    let sum_path = cfg.out.join(format!("{stem}.summary.json"));
    fs::write(&sum_path, serde_json::to_string_pretty(&summary)?)?;
    println!("trace:      {}", csv_path.display());
    println!("transcript: {}", jsonl_path.display());
    println!("summary:    {}", sum_path.display());
    println!(
        "{}: {} oracle calls, final front {}, oracles-to-eps {}",
        algo.name(),
        trace.oracles_used(),
        trace.fronts().last().copied().unwrap_or(0),
        oracles_to_eps.map_or("not reached".into(), |n| n.to_string()),
    );
    Ok(0)
}

/// One front-trace CSV per shipped algorithm: measured J(t) next to the
/// theoretical staircase for its class.
pub fn cmd_frontplot(cfg: &RunConfig) -> Result<i32> {
    let p = cfg.params()?;
    fs::create_dir_all(&cfg.out)?;
    for algo in [Algo::Penalty, Algo::Alm, Algo::Ladmm] {
        let tr = algo.run(&p, cfg.max_oracles)?;
        let rate = algo.rate();
        let mut csv = String::from("t,j,staircase\n");
        for (t, &j) in tr.fronts().iter().enumerate() {
            let _ = writeln!(csv, "{t},{j},{}", staircase(p.m, p.dbar, rate, t));
        }
        let path = cfg
            .out
            .join(format!("front-{}-{}.csv", algo.name(), cfg.hash()));
        fs::write(&path, csv)?;
        println!(
            "front trace: {} ({} steps, final J {})",
            path.display(),
            tr.fronts().len() - 1,
            tr.fronts().last().copied().unwrap_or(0)
        );
    }
    Ok(0)
}

/// Deterministic threshold table, recomputed from first principles on
/// every invocation.
pub fn cmd_bounds(cfg: &RunConfig) -> Result<i32> {
    let p = cfg.params()?;
    let kj = kappa_joint(&p);
    let ka = kappa_a(&p)?;
    let du = delta_f0_upper(&p);
    println!(
        "instance: m1={} m2={} (m={}) dbar={} eps={:e} lf={:e}",
        p.m1, p.m2, p.m, p.dbar, p.eps, p.lf
    );
    println!(
        "beta = {:.17e} (strict lower bound {:.17e})",
        p.beta,
        p.beta_lower_bound()
    );
    println!("kappa_joint = {kj:.17e}");
    println!("kappa_a = {ka:.17e}");
    println!(
        "kappa_ratio = {:.17e} (must exceed 3*m2/4 = {:.17e})",
        kj / ka,
        0.75 * p.m2 as f64
    );
    println!(
        "omega_near_stationary = {:.17e} (150*pi*eps/lf)",
        150.0 * PI * p.eps / p.lf
    );
    println!("delta_f0_upper = {du:.17e}");
    println!("oracle-call thresholds (computed with Delta_F0 upper estimate):");
    println!(
        "  class-1 (36000 pi^2)         = {}",
        theorem_threshold(&p, 36_000.0)
    );
    println!(
        "  class-2 (72000 pi^2)         = {}",
        theorem_threshold(&p, 72_000.0)
    );
    println!(
        "  combined-oracle (18000 pi^2) = {}",
        theorem_threshold(&p, 18_000.0)
    );
    println!("support-propagation thresholds (oracle calls):");
    println!(
        "  class-1  2 + m(dbar-2)/6 = {:.17e}",
        2.0 + (p.m * (p.dbar - 2)) as f64 / 6.0
    );
    println!(
        "  class-2  2 + m(dbar-2)/3 = {:.17e}",
        2.0 + (p.m * (p.dbar - 2)) as f64 / 3.0
    );
    Ok(0)
}
