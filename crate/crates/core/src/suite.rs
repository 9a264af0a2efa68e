//! Verification suites run by the command-line harness.
//!
//! Every suite returns a [`Report`] whose checks are sorted by name, so equal
//! configurations produce byte-identical JSON unless timings are requested.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::berezin::{
    berezin_kernel, berezin_transform, eval_symbol, intertwining_residual, kernel_gram, membership_margin, purity,
    radial_model, PointTuple, SeriesTransform, DEFECT_TOLERANCE, PURITY_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::fock::{weight_b, GradedBasis, TruncationSpec};
use crate::operators::{
    binomial, cauchy_dual_shift, creation_weight, lambda_lambda_star_eigenvalue, left_creation_shift, omega_values,
    right_creation_shift, word_shift, word_shift_closed_form, GuardBand, Side, WeightedShift,
};
use crate::sparse::SparseOperator;
use crate::random::{random_dense, random_interior, random_pure_point, random_symbol, rng, RNG_NAME};
use crate::scalar::{identity, max_abs, max_abs_diff, phase, CMatrix};
use crate::toeplitz::{
    all_shifts, brown_halmos_residual, extract_symbol, fejer_sum, homogeneous_part_projection_into,
    homogeneous_part_quadrature_into, partial_sum, reconstruct, to_weighted_fock_conjugate, Symbol, ToeplitzChecker,
};
use crate::words::{enumerate_words, DegreeVector};

/// Structural identities.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Identities limited by geometric truncation tails.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;
/// Decomposition identities that hold up to rounding.
pub const DEFAULT_FOURIER_TOL: f64 = 1e-12;
/// A random dense operator must miss the Brown-Halmos equations by more
/// than this.
pub const DENSE_BH_FLOOR: f64 = 1e-3;
/// Tail terms `b(m, L+1) ρ^{L+1}` are summed until below this.
const TAIL_CUTOFF: f64 = 1e-18;
const TAIL_CAP: usize = 4000;
/// Number of random symbols in the transform check.
pub const KK_SAMPLES: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub spec: TruncationSpec,
    pub seed: u64,
    /// Overrides the suite default tolerance.
    pub tol: Option<f64>,
    #[serde(skip)]
    pub timings: bool,
}

impl RunConfig {
    pub fn new(spec: TruncationSpec, seed: u64) -> Self {
        RunConfig { spec, seed, tol: None, timings: false }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = Some(tol);
        self
    }

    fn tol_or(&self, default: f64) -> f64 {
        self.tol.unwrap_or(default)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub residual: f64,
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard_band: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub detail: BTreeMap<String, Value>,
}

impl Check {
    /// Passes iff `residual` is finite and at most `tol`.
    pub fn below(name: &str, residual: f64, tol: f64) -> Self {
        let pass = residual.is_finite() && residual <= tol;
        Check::with_verdict(name, pass, residual, tol)
    }

    pub fn with_verdict(name: &str, pass: bool, residual: f64, tol: f64) -> Self {
        Check {
            name: name.to_string(),
            pass,
            residual,
            tol,
            guard_band: None,
            elapsed_ms: None,
            detail: BTreeMap::new(),
        }
    }

    pub fn guard(mut self, g: &GuardBand) -> Self {
        self.guard_band = Some(g.g.clone());
        self
    }

    pub fn detail(mut self, key: &str, value: impl Serialize) -> Self {
        self.detail.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub spec: TruncationSpec,
    pub seed: u64,
    pub rng: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub input: BTreeMap<String, Value>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    fn new(suite: &str, config: &RunConfig, mut checks: Vec<Check>) -> Self {
        checks.sort_by(|a, b| a.name.cmp(&b.name));
        let pass = checks.iter().all(|c| c.pass);
        Report {
            suite: suite.to_string(),
            spec: config.spec.clone(),
            seed: config.seed,
            rng: RNG_NAME.to_string(),
            input: BTreeMap::new(),
            checks,
            pass,
        }
    }

    fn input(mut self, key: &str, value: impl Serialize) -> Self {
        self.input.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

struct Runner {
    timings: bool,
    checks: Vec<Check>,
}

impl Runner {
    fn new(config: &RunConfig) -> Self {
        Runner { timings: config.timings, checks: Vec::new() }
    }

    fn run(&mut self, f: impl FnOnce() -> Result<Check>) -> Result<()> {
        let start = Instant::now();
        let mut check = f()?;
        if self.timings {
            check.elapsed_ms = Some(start.elapsed().as_secs_f64() * 1e3);
        }
        self.checks.push(check);
        Ok(())
    }

    /// Checks computed in one pass; each records the time of the whole pass.
    fn run_group(&mut self, f: impl FnOnce() -> Result<Vec<Check>>) -> Result<()> {
        let start = Instant::now();
        let checks = f()?;
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        for mut check in checks {
            if self.timings {
                check.elapsed_ms = Some(elapsed);
            }
            self.checks.push(check);
        }
        Ok(())
    }
}

type Sparse = SparseOperator<f64>;

fn clipped(spec: &TruncationSpec, g: usize) -> GuardBand {
    GuardBand::new(spec.l.iter().map(|&l| g.min(l)).collect())
}

fn shift_map_residual(a: &WeightedShift<f64>, b: &WeightedShift<f64>) -> f64 {
    (0..a.fock_dim())
        .map(|idx| match (a.image(idx), b.image(idx)) {
            (None, None) => 0.0,
            (Some((ta, wa)), Some((tb, wb))) if ta == tb => (wa - wb).abs(),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

/// Model-operator identities: the Cauchy-dual relations, the `ΛΛ*` grading,
/// the defect identity for `W`, commutation of left and right creation
/// operators, torus covariance, and the closed form of word operators.
pub fn verify(config: &RunConfig) -> Result<Report> {
    let spec = &config.spec;
    spec.validate()?;
    GuardBand::orders(spec).validate(spec)?;
    let tol = config.tol_or(DEFAULT_TOL);
    let basis = GradedBasis::build(spec)?;
    let n = basis.len();
    let dim = basis.model_dim();
    let d = spec.d;
    let k = spec.k;
    let shifts = |side: Side| -> Result<Vec<Vec<WeightedShift<f64>>>> {
        (0..k)
            .map(|i| {
                (1..=spec.n[i])
                    .map(|j| match side {
                        Side::Left => left_creation_shift(&basis, i, j),
                        Side::Right => right_creation_shift(&basis, i, j),
                    })
                    .collect()
            })
            .collect()
    };
    let ws = shifts(Side::Left)?;
    let lambdas = shifts(Side::Right)?;
    let sparse = |v: &Vec<Vec<WeightedShift<f64>>>| -> Vec<Vec<Sparse>> {
        v.iter().map(|f| f.iter().map(Sparse::from_shift).collect()).collect()
    };
    let (sw, sl) = (sparse(&ws), sparse(&lambdas));
    let per_degree = |i: usize, f: &dyn Fn(usize) -> f64| -> Sparse {
        let values: Vec<f64> = (0..n).map(|idx| f(basis.degree_in(idx, i))).collect();
        Sparse::diagonal_on_basis(d, &values)
    };
    let weight_sq = |m: usize, p: usize| creation_weight::<f64>(m, p).powi(2);
    let eye = Sparse::identity(dim);
    let mut runner = Runner::new(config);

    runner.run(|| {
        let mut res = 0.0f64;
        for i in 0..k {
            for w in enumerate_words(spec.n[i], spec.l[i]) {
                for side in [Side::Left, Side::Right] {
                    let prod = word_shift::<f64>(&basis, i, &w, side)?;
                    let closed = word_shift_closed_form::<f64>(&basis, i, &w, side)?;
                    res = res.max(shift_map_residual(&prod, &closed));
                }
            }
        }
        Ok(Check::below("closed_form.words", res, tol).guard(&GuardBand::zero(k)))
    })?;

    runner.run(|| {
        let mut res = 0.0f64;
        for i in 0..k {
            let g = GuardBand::single(k, i, 1);
            let d2 = per_degree(i, &|p| weight_sq(spec.m[i], p));
            for (j, lj) in sl[i].iter().enumerate() {
                for (l, ll) in sl[i].iter().enumerate() {
                    let mut x = lj.adjoint().mul(ll);
                    if j == l {
                        x = x.sub(&d2);
                    }
                    res = res.max(x.interior_max_abs(&basis, &g));
                }
            }
        }
        Ok(Check::below("isometry.lambda", res, tol).guard(&GuardBand::uniform(k, 1)))
    })?;

    runner.run(|| {
        let mut res = 0.0f64;
        for i in 0..k {
            let g = GuardBand::single(k, i, 1);
            let m = spec.m[i];
            // Λ raises the factor degree, so Ω acts at p + 1: (m + p)/(p + 1).
            let om2d2 = per_degree(i, &|p| ((m + p) as f64 / (p + 1) as f64).powi(2) * weight_sq(m, p));
            let duals: Vec<Sparse> = (1..=spec.n[i])
                .map(|j| cauchy_dual_shift(&basis, i, j).map(|s| Sparse::from_shift(&s)))
                .collect::<Result<_>>()?;
            for (j, a) in duals.iter().enumerate() {
                for (l, b) in duals.iter().enumerate() {
                    let mut x = a.adjoint().mul(b);
                    if j == l {
                        x = x.sub(&om2d2);
                    }
                    res = res.max(x.interior_max_abs(&basis, &g));
                }
            }
        }
        Ok(Check::below("cauchy_dual.orthogonality", res, tol).guard(&GuardBand::uniform(k, 1)))
    })?;

    runner.run(|| {
        let mut res = 0.0f64;
        for i in 0..k {
            let g = GuardBand::single(k, i, 1);
            let inv_d2 = per_degree(i, &|p| 1.0 / weight_sq(spec.m[i], p));
            let om = Sparse::diagonal_on_basis(d, &omega_values::<f64>(&basis, i));
            for lj in &sl[i] {
                let lstar = lj.adjoint();
                let x = inv_d2.mul(&lstar).sub(&lstar.mul(&om));
                res = res.max(x.interior_max_abs(&basis, &g));
            }
        }
        Ok(Check::below("prop21.i", res, tol).guard(&GuardBand::uniform(k, 1)))
    })?;

    let range_projection = |i: usize| -> Result<Sparse> {
        let mut out = Sparse::zeros(dim);
        for (j, lj) in sl[i].iter().enumerate() {
            let dual = Sparse::from_shift(&cauchy_dual_shift(&basis, i, j + 1)?);
            out.add_scaled(&dual.mul(&lj.adjoint()), 1.0);
        }
        Ok(out)
    };

    runner.run(|| {
        let mut res = 0.0f64;
        for i in 0..k {
            let g = GuardBand::single(k, i, 1);
            let proj = per_degree(i, &|p| if p >= 1 { 1.0 } else { 0.0 });
            res = res.max(range_projection(i)?.sub(&proj).interior_max_abs(&basis, &g));
        }
        Ok(Check::below("prop21.ii", res, tol).guard(&GuardBand::uniform(k, 1)))
    })?;

    runner.run(|| {
        let mut res = 0.0f64;
        for i in 0..k {
            let g = GuardBand::single(k, i, spec.m[i]);
            let lhs = eye.sub(&range_projection(i)?);
            let rhs = sparse_defect_factor(&sl[i], spec.m[i], &eye);
            res = res.max(lhs.sub(&rhs).interior_max_abs(&basis, &g));
        }
        Ok(Check::below("prop21.iii", res, tol).guard(&GuardBand::orders(spec)))
    })?;

    runner.run(|| {
        let mut res = 0.0f64;
        let mut displayed_res = 0.0f64;
        for i in 0..k {
            let m = spec.m[i];
            let mut sum = Sparse::zeros(dim);
            for lj in &sl[i] {
                sum.add_scaled(&lj.mul(&lj.adjoint()), 1.0);
            }
            let eig = |displayed: bool| {
                per_degree(i, &|p| match p {
                    0 => 0.0,
                    j => {
                        let (computed, shown) = lambda_lambda_star_eigenvalue::<f64>(m, j);
                        if displayed {
                            shown
                        } else {
                            computed
                        }
                    }
                })
            };
            let all = GuardBand::zero(k);
            res = res.max(sum.sub(&eig(false)).interior_max_abs(&basis, &all));
            displayed_res = displayed_res.max(sum.sub(&eig(true)).interior_max_abs(&basis, &all));
        }
        let table: Vec<Value> = (0..k)
            .map(|i| {
                let rows: Vec<Value> = (1..=spec.l[i])
                    .map(|j| {
                        let (c, s) = lambda_lambda_star_eigenvalue::<f64>(spec.m[i], j);
                        json!({"degree": j, "computed": c, "displayed": s})
                    })
                    .collect();
                Value::Array(rows)
            })
            .collect();
        Ok(Check::below("lambda_lambda_star", res, tol)
            .guard(&GuardBand::zero(k))
            .detail("formula", "j/(m+j-1)")
            .detail("displayed_formula", "1/(m+j-1)")
            .detail("displayed_residual", displayed_res)
            .detail("eigenvalues", table))
    })?;

    runner.run(|| {
        let g = GuardBand::orders(spec);
        let mut y = eye.clone();
        for i in (0..k).rev() {
            y = sparse_defect_factor(&sw[i], spec.m[i], &y);
        }
        let vac = basis.vacuum();
        let p_c = Sparse::diagonal_on_basis(d, &(0..n).map(|idx| if idx == vac { 1.0 } else { 0.0 }).collect::<Vec<_>>());
        Ok(Check::below("defect.w", y.sub(&p_c).interior_max_abs(&basis, &g), tol).guard(&g))
    })?;

    runner.run(|| {
        let g = clipped(spec, 2);
        let mut res = 0.0f64;
        for w in sw.iter().flatten() {
            for l in sl.iter().flatten() {
                res = res.max(w.mul(l).sub(&l.mul(w)).interior_max_abs(&basis, &g));
            }
        }
        Ok(Check::below("commutation.w_lambda", res, tol).guard(&g))
    })?;

    runner.run(|| {
        let mut r = rng(config.seed);
        let theta: Vec<f64> = (0..k).map(|_| r.random_range(0.0..std::f64::consts::TAU)).collect();
        let phases = crate::operators::gamma_phases(&basis, &theta)?;
        let mut res = 0.0f64;
        for i in 0..k {
            let e = phase(theta[i]);
            for w in &sw[i] {
                for (row, col, v) in w.entries() {
                    let lhs = phases[row % n] * v * phases[col % n].conj();
                    res = res.max((lhs - e * v).norm());
                }
            }
        }
        Ok(Check::below("gamma.covariance", res, tol).guard(&GuardBand::zero(k)).detail("theta", theta))
    })?;

    Ok(Report::new("verify", config, runner.checks))
}

/// `(id − Φ)^p (Y)` for a tuple of sparse operators.
fn sparse_defect_factor(xs: &[Sparse], p: usize, y: &Sparse) -> Sparse {
    let mut power = y.clone();
    let mut out = y.clone();
    for t in 1..=p {
        let mut next = Sparse::zeros(y.dim());
        for x in xs {
            next.add_scaled(&x.mul(&power).mul(&x.adjoint()), 1.0);
        }
        power = next;
        let c = binomial(p, t) as f64;
        out.add_scaled(&power, if t % 2 == 1 { -c } else { c });
    }
    out
}

/// Where the operator under test comes from.
#[derive(Clone, Debug)]
pub enum OperatorSource {
    /// `reconstruct` of a seeded symbol supported at guard band `m`.
    RandomSymbol,
    /// Complex normal entries everywhere.
    RandomDense,
    Identity,
    /// A given matrix, e.g. read from a file.
    Matrix(CMatrix<f64>),
}

impl OperatorSource {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorSource::RandomSymbol => "random-symbol",
            OperatorSource::RandomDense => "random-dense",
            OperatorSource::Identity => "identity",
            OperatorSource::Matrix(_) => "file",
        }
    }

    /// Toeplitz verdict the generator guarantees, if any.
    fn expected(&self) -> Option<bool> {
        match self {
            OperatorSource::RandomSymbol | OperatorSource::Identity => Some(true),
            OperatorSource::RandomDense => Some(false),
            OperatorSource::Matrix(_) => None,
        }
    }
}

fn generate(
    config: &RunConfig,
    source: &OperatorSource,
    basis: &GradedBasis,
) -> Result<(CMatrix<f64>, Option<Symbol<f64>>)> {
    let spec = &config.spec;
    let mut r = rng(config.seed);
    Ok(match source {
        OperatorSource::RandomSymbol => {
            let g = GuardBand::orders(spec);
            g.validate(spec)?;
            let s = random_symbol::<f64, _>(spec, &g, &mut r)?;
            (reconstruct(basis, &s)?, Some(s))
        }
        OperatorSource::RandomDense => (random_dense(spec, &mut r), None),
        OperatorSource::Identity => (identity(spec.model_dim()), None),
        OperatorSource::Matrix(m) => {
            if m.nrows() != spec.model_dim() || m.ncols() != spec.model_dim() {
                return Err(Error::DimensionMismatch { expected: spec.model_dim(), got: m.nrows() });
            }
            (m.clone(), None)
        }
    })
}

/// The operator [`toeplitz`] examines for `source`.
pub fn operator_for(config: &RunConfig, source: &OperatorSource) -> Result<CMatrix<f64>> {
    config.spec.validate()?;
    Ok(generate(config, source, &GradedBasis::build(&config.spec)?)?.0)
}

/// Toeplitz detection against the Brown-Halmos equations, symbol round
/// trip and the μ-criterion for one operator.
pub fn toeplitz(config: &RunConfig, source: &OperatorSource) -> Result<Report> {
    let spec = &config.spec;
    spec.validate()?;
    let tol = config.tol_or(DEFAULT_TOL);
    let basis = GradedBasis::build(spec)?;
    let (t, symbol) = generate(config, source, &basis)?;
    let checker = ToeplitzChecker::new(&basis);
    let mut runner = Runner::new(config);

    let tau = checker.check_tau(&t, tol)?;
    let bh = brown_halmos_residual(&basis, &t)?;
    let bh_max = bh.iter().copied().fold(0.0, f64::max);
    let bh_pass = bh_max <= tol;
    let bh_guard = GuardBand::new(spec.m.iter().zip(&spec.l).map(|(&m, &l)| (m + 1).min(l)).collect());

    runner.run(|| {
        Ok(Check::with_verdict("bh_tau_agreement", tau.is_toeplitz == bh_pass, bh_max, tol)
            .guard(&bh_guard)
            .detail("is_toeplitz", tau.is_toeplitz)
            .detail("bh_pass", bh_pass)
            .detail("bh_residual", &bh)
            .detail("toeplitz_report", &tau))
    })?;

    if let Some(expected) = source.expected() {
        runner.run(|| {
            let pass = if expected {
                tau.is_toeplitz && bh_pass
            } else {
                !tau.is_toeplitz && tau.witness.is_some() && bh_max > DENSE_BH_FLOOR
            };
            Ok(Check::with_verdict("expected_structure", pass, bh_max, tol).detail("expected_toeplitz", expected))
        })?;
    }

    runner.run(|| match &symbol {
        Some(s) => {
            let back = extract_symbol(&basis, &t)?;
            let res = s.max_abs_diff(&back);
            Ok(Check::below("round_trip", res, DEFAULT_FOURIER_TOL).detail("terms", s.len()))
        }
        None => {
            let back = reconstruct(&basis, &extract_symbol(&basis, &t)?)?;
            let res = max_abs_diff(&back, &t);
            let matches = res <= tol;
            Ok(Check::with_verdict("round_trip", matches == tau.is_toeplitz, res, tol)
                .detail("reconstruction_matches", matches))
        }
    })?;

    runner.run(|| {
        let conj = to_weighted_fock_conjugate(&basis, &t)?;
        let mu = checker.check_mu(&conj, tol)?;
        let res = mu.max_offdomain_entry.max(mu.max_ratio_residual);
        Ok(Check::with_verdict("mu_tau_agreement", mu.is_toeplitz == tau.is_toeplitz, res, tol)
            .detail("mu_report", &mu))
    })?;

    Ok(Report::new("toeplitz", config, runner.checks).input("source", source.name()))
}

/// Where the Berezin point comes from.
#[derive(Clone, Debug)]
pub enum PointSource {
    Zero { dim: usize },
    /// `rW` on the truncated Fock space.
    Radial(f64),
    /// A seeded pure point; `rho` rescales every factor to that spectral
    /// radius of `Φ_{X_i}` (no membership repair).
    Random { dim: usize, rho: Option<f64> },
    Given(PointTuple<f64>),
}

impl PointSource {
    pub fn name(&self) -> String {
        match self {
            PointSource::Zero { dim } => format!("zero(dim={dim})"),
            PointSource::Radial(r) => format!("radial(r={r})"),
            PointSource::Random { dim, rho: None } => format!("random(dim={dim})"),
            PointSource::Random { dim, rho: Some(rho) } => format!("random(dim={dim}, rho={rho})"),
            PointSource::Given(_) => "file".to_string(),
        }
    }
}

/// Builds the point of `source` for `config`.
pub fn build_point(config: &RunConfig, source: &PointSource) -> Result<PointTuple<f64>> {
    let spec = &config.spec;
    match source {
        PointSource::Zero { dim } => Ok(PointTuple::zero(&spec.n, *dim)),
        PointSource::Radial(r) => radial_model(spec, *r),
        PointSource::Random { dim, rho } => {
            let mut r = rng(config.seed);
            let x = random_pure_point::<f64, _>(spec, *dim, 0.1, 0.25, &mut r)?;
            match rho {
                None => Ok(x),
                Some(target) => {
                    let radii = purity(&x);
                    let factors = x
                        .factors()
                        .iter()
                        .zip(&radii)
                        .map(|(f, &rad)| {
                            let s = if rad > 0.0 { (target / rad).sqrt() } else { 1.0 };
                            f.iter().map(|m| m.map(|z| z * s)).collect()
                        })
                        .collect();
                    PointTuple::new(*dim, factors, *target < 1.0)
                }
            }
        }
        PointSource::Given(x) => Ok(x.clone()),
    }
}

/// Truncation depths at which the kernel series tails fall below
/// [`TAIL_CUTOFF`], given the spectral radii of the factor maps. Nilpotent
/// factors terminate on their own, so they get the cap.
pub fn tail_lengths(spec: &TruncationSpec, radii: &[f64]) -> Vec<usize> {
    (0..spec.k)
        .map(|i| {
            let rho = radii[i];
            if rho <= 0.0 {
                return TAIL_CAP.max(spec.l[i]);
            }
            let mut l = spec.l[i];
            while l < TAIL_CAP && weight_b(spec.m[i], l + 1) as f64 * rho.powi(l as i32 + 1) > TAIL_CUTOFF {
                l += 1;
            }
            l
        })
        .collect()
}

/// Kernel properties and the transform identity at one point.
pub fn berezin(config: &RunConfig, source: &PointSource) -> Result<Report> {
    let spec = &config.spec;
    spec.validate()?;
    let tol = config.tol_or(DEFAULT_TAIL_TOL);
    let x = build_point(config, source)?;
    let margin = membership_margin(&x, spec)?;
    if margin < -DEFECT_TOLERANCE {
        return Err(Error::NotMember(margin));
    }
    let basis = GradedBasis::build(spec)?;
    let radii = purity(&x);
    let rho = radii.iter().copied().fold(0.0, f64::max);
    let tails = tail_lengths(spec, &radii);
    let tail_spec = TruncationSpec { l: tails.clone(), ..spec.clone() };
    let fock = GradedBasis::build(&spec.with_d(1))?;
    let kernel = berezin_kernel(&x, &fock)?;
    let mut runner = Runner::new(config);

    runner.run(|| {
        Ok(Check::below("membership", (-margin).max(0.0), DEFECT_TOLERANCE).detail("min_defect_eigenvalue", margin))
    })?;

    runner.run(|| Ok(Check::with_verdict("purity", rho < PURITY_THRESHOLD, rho, PURITY_THRESHOLD).detail("radii", &radii)))?;

    runner.run(|| {
        let norm = kernel.norm();
        Ok(Check::below("contraction", (norm - 1.0).max(0.0), tol).detail("norm", norm))
    })?;

    runner.run(|| {
        let gram = kernel_gram(&x, &tail_spec)?;
        let res = max_abs_diff(&gram, &identity(x.dim()));
        Ok(Check::below("isometry", res, tol).detail("tail_L", &tails))
    })?;

    runner.run(|| {
        let res = intertwining_residual(&kernel, &x, &fock)?;
        Ok(Check::below("intertwining", res, tol).guard(&GuardBand::uniform(spec.k, 1)))
    })?;

    let g = GuardBand::orders(spec);
    g.validate(spec)?;
    let mut r = rng(config.seed.wrapping_add(1));
    let symbols = (0..KK_SAMPLES)
        .map(|_| random_symbol::<f64, _>(spec, &g, &mut r))
        .collect::<Result<Vec<_>>>()?;

    runner.run(|| {
        let mut res = 0.0f64;
        let mut transform = SeriesTransform::new(&x, &tail_spec)?;
        for s in &symbols {
            let series = transform.apply(s)?;
            res = res.max(max_abs_diff(&series, &eval_symbol(s, &x)?));
        }
        Ok(Check::below("transform.symbol", res, tol).detail("samples", KK_SAMPLES).detail("tail_L", &tails))
    })?;

    runner.run(|| {
        let mut res = 0.0f64;
        let mut scale = 0.0f64;
        let mut transform = SeriesTransform::new(&x, spec)?;
        for s in &symbols {
            let t = reconstruct(&basis, s)?;
            let literal = berezin_transform(&kernel, &t, spec.d)?;
            let series = transform.apply(s)?;
            res = res.max(max_abs_diff(&literal, &series));
            scale = scale.max(max_abs(&literal));
        }
        Ok(Check::below("transform.literal", res, tol).detail("max_entry", scale))
    })?;

    Ok(Report::new("berezin", config, runner.checks)
        .input("point", source.name())
        .input("dim", x.dim()))
}

/// Multi-homogeneous decomposition and Cesàro summation.
pub fn fourier(config: &RunConfig) -> Result<Report> {
    let spec = &config.spec;
    spec.validate()?;
    let tol = config.tol_or(DEFAULT_FOURIER_TOL);
    let basis = GradedBasis::build(spec)?;
    let mut r = rng(config.seed);
    let t = random_dense::<f64, _>(spec, &mut r);
    let t_norm = max_abs(&t);
    let shifts = all_shifts(spec);
    let samples: Vec<usize> = spec.l.iter().map(|&l| 2 * l + 1).collect();
    let mut runner = Runner::new(config);

    // One pass over the shifts so that only one part is alive at a time.
    runner.run_group(|| {
        let t_star = t.adjoint();
        let mut sum = CMatrix::<f64>::zeros(t.nrows(), t.ncols());
        let mut part = sum.clone();
        let mut q = sum.clone();
        let mut lhs = sum.clone();
        let (mut quad, mut adj) = (0.0f64, 0.0f64);
        let mut excess = f64::NEG_INFINITY;
        for s in &shifts {
            homogeneous_part_projection_into(&basis, &t, s, &mut part)?;
            homogeneous_part_quadrature_into(&basis, &t, s, &samples, &mut q)?;
            quad = quad.max(max_abs_diff(&q, &part));
            let neg = DegreeVector(s.0.iter().map(|v| -v).collect());
            homogeneous_part_projection_into(&basis, &t_star, &neg, &mut lhs)?;
            part.adjoint_to(&mut q);
            adj = adj.max(max_abs_diff(&lhs, &q));
            excess = excess.max(max_abs(&part) - t_norm);
            sum += &part;
        }
        Ok(vec![
            Check::below("quadrature_vs_projection", quad, tol)
                .detail("samples", &samples)
                .detail("shifts", shifts.len()),
            Check::below("adjoint_symmetry", adj, tol),
            Check::with_verdict("part_norm_bound", excess <= tol, excess.max(0.0), tol).detail("norm", t_norm),
            Check::below("parts_sum", max_abs_diff(&sum, &t), tol),
        ])
    })?;

    runner.run(|| Ok(Check::below("partial_sum_exact", max_abs_diff(&partial_sum(&basis, &t, &spec.l)?, &t), tol)))?;

    runner.run(|| {
        let g = GuardBand::orders(spec);
        g.validate(spec)?;
        let ti = random_interior::<f64, _>(&basis, &g, &mut r);
        let norm = max_abs(&ti);
        let residuals: Vec<f64> = [1, 2, 4, 8]
            .iter()
            .map(|&f| {
                let orders: Vec<usize> = spec.l.iter().map(|&l| f * l).collect();
                fejer_sum(&basis, &ti, &orders).map(|s| max_abs_diff(&s, &ti))
            })
            .collect::<Result<_>>()?;
        let monotone = residuals.windows(2).all(|w| w[1] <= w[0]);
        let last = residuals[3] / norm;
        Ok(Check::with_verdict("fejer_convergence", monotone && last < 0.2, last, 0.2)
            .guard(&g)
            .detail("multiples", [1, 2, 4, 8])
            .detail("residuals", &residuals)
            .detail("monotone", monotone))
    })?;

    runner.run(|| {
        let g = GuardBand::orders(spec);
        let s = random_symbol::<f64, _>(spec, &g, &mut r)?;
        let tt = reconstruct(&basis, &s)?;
        let base = brown_halmos_residual(&basis, &tt)?.into_iter().fold(0.0, f64::max);
        let mut worst = 0.0f64;
        let mut part = CMatrix::<f64>::zeros(tt.nrows(), tt.ncols());
        for sh in &shifts {
            homogeneous_part_projection_into(&basis, &tt, sh, &mut part)?;
            worst = worst.max(brown_halmos_residual(&basis, &part)?.into_iter().fold(0.0, f64::max));
        }
        Ok(Check::below("bh_invariance", worst, base + DEFAULT_TOL).detail("bh_residual", base))
    })?;

    Ok(Report::new("fourier", config, runner.checks))
}

/// Every suite on one configuration; check names are prefixed with the
/// suite they come from.
pub fn full_report(config: &RunConfig, point_dim: usize) -> Result<Report> {
    let runs = [
        ("verify", verify(config)?),
        ("toeplitz.random-symbol", toeplitz(config, &OperatorSource::RandomSymbol)?),
        ("toeplitz.random-dense", toeplitz(config, &OperatorSource::RandomDense)?),
        ("fourier", fourier(config)?),
        ("berezin", berezin(config, &PointSource::Random { dim: point_dim, rho: None })?),
    ];
    let checks = runs
        .into_iter()
        .flat_map(|(prefix, rep)| {
            rep.checks.into_iter().map(move |mut c| {
                c.name = format!("{prefix}/{}", c.name);
                c
            })
        })
        .collect();
    Ok(Report::new("report", config, checks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(n: &[usize], m: &[usize], l: &[usize], d: usize, seed: u64) -> RunConfig {
        RunConfig::new(TruncationSpec::new(n.to_vec(), m.to_vec(), l.to_vec(), d).unwrap(), seed)
    }

    fn assert_pass(r: &Report) {
        let failed: Vec<_> = r.failures().map(|c| (&c.name, c.residual)).collect();
        assert!(r.pass, "{} failed: {failed:?}", r.suite);
    }

    #[test]
    fn verify_examples() {
        let r = verify(&config(&[1], &[2], &[6], 1, 1)).unwrap();
        assert_pass(&r);
        assert!(r.checks.iter().all(|c| c.residual < 1e-10));
        assert_pass(&verify(&config(&[2, 2], &[2, 1], &[3, 3], 1, 1)).unwrap());
        let c = config(&[2], &[3], &[2], 1, 1);
        assert!(matches!(verify(&c), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn lambda_lambda_star_reports_displayed_value() {
        let r = verify(&config(&[2], &[2], &[3], 1, 1)).unwrap();
        let c = r.check("lambda_lambda_star").unwrap();
        assert!(c.pass);
        assert!(c.detail["displayed_residual"].as_f64().unwrap() > 0.1);
    }

    #[test]
    fn toeplitz_sources() {
        let c = config(&[2], &[2], &[4], 2, 1);
        let r = toeplitz(&c, &OperatorSource::RandomSymbol).unwrap();
        assert_pass(&r);
        assert_eq!(r.check("bh_tau_agreement").unwrap().detail["is_toeplitz"], json!(true));
        let r = toeplitz(&c, &OperatorSource::RandomDense).unwrap();
        assert_pass(&r);
        assert_eq!(r.check("bh_tau_agreement").unwrap().detail["is_toeplitz"], json!(false));
        assert!(r.check("bh_tau_agreement").unwrap().residual > DENSE_BH_FLOOR);
        assert_pass(&toeplitz(&c, &OperatorSource::Identity).unwrap());
        let m = identity(c.spec.model_dim());
        assert_pass(&toeplitz(&c, &OperatorSource::Matrix(m)).unwrap());
        assert!(toeplitz(&c, &OperatorSource::Matrix(identity(3))).is_err());
    }

    #[test]
    fn berezin_points() {
        let c = config(&[2, 1], &[2, 1], &[3, 3], 1, 2);
        assert_pass(&berezin(&c, &PointSource::Zero { dim: 2 }).unwrap());
        assert_pass(&berezin(&c, &PointSource::Radial(0.5)).unwrap());
        assert_pass(&berezin(&c, &PointSource::Random { dim: 2, rho: None }).unwrap());
        assert!(matches!(berezin(&c, &PointSource::Random { dim: 2, rho: Some(1.2) }), Err(Error::NotMember(_))));
        assert!(matches!(berezin(&c, &PointSource::Radial(1.0)), Err(Error::RadiusOutOfRange(_))));
    }

    #[test]
    fn tail_lengths_grow_with_radius() {
        let spec = TruncationSpec::new(vec![1], vec![2], vec![4], 1).unwrap();
        assert_eq!(tail_lengths(&spec, &[0.0]), vec![TAIL_CAP]);
        let a = tail_lengths(&spec, &[0.1])[0];
        let b = tail_lengths(&spec, &[0.25])[0];
        assert!(a >= 4 && a < b && b < 60);
        assert_eq!(tail_lengths(&spec, &[1e-30]), vec![4]);
    }

    #[test]
    fn fourier_suite() {
        assert_pass(&fourier(&config(&[2, 1], &[2, 1], &[2, 3], 2, 3)).unwrap());
    }

    #[test]
    fn reports_are_deterministic() {
        let c = config(&[2], &[1], &[3], 1, 9);
        assert_eq!(full_report(&c, 2).unwrap().to_json(), full_report(&c, 2).unwrap().to_json());
        let mut timed = c.clone();
        timed.timings = true;
        assert!(verify(&timed).unwrap().checks.iter().all(|ch| ch.elapsed_ms.is_some()));
        assert!(verify(&c).unwrap().checks.iter().all(|ch| ch.elapsed_ms.is_none()));
    }
}
