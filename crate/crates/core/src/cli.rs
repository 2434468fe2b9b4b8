//! Batch experiment runner behind the `dirac-collapse` binary.

use crate::assembly::{assemble_dirac, frame_bundle_operator, torus_modes};
use crate::clifford::{exterior_module, spinor_gammas, CliffordModule};
use crate::collapse::{blowup_check, collapse_run, minimax_check, perturbation_bound_check, Verdict};
use crate::error::{Error, Result};
use crate::geometry::{
    AffineMappingTorus, BundleModel, FlatTorusModel, LiftSpec, PolynomialFrameFamily, WindowConstants,
};
use crate::linalg::{identity, CMat, RMat};
use crate::resolvent::{inverse_residual, neumann_factorization_check, schur_inverse, BlockMatrix2x2};
use crate::spectrum::{eigensolve, epsilon_close, Spectrum};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    TorusSpectrum,
    WindowTest,
    Collapse,
    Blowup,
    Perturbation,
    FrameBundle,
    BlockIdentities,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    #[default]
    Spinor,
    Exterior,
}

/// Model section. `basis`/`spin_shift` describe the flat torus, or the fiber of a
/// mapping torus when `base_length` is present.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub module: ModuleKind,
    #[serde(default)]
    pub basis: Vec<Vec<f64>>,
    #[serde(default)]
    pub spin_shift: Vec<f64>,
    pub base_length: Option<f64>,
    #[serde(default)]
    pub base_spin_shift: f64,
    pub holonomy: Option<Vec<Vec<i64>>>,
    pub lift: Option<LiftSpec>,
    pub connection: Option<Vec<f64>>,
    #[serde(default)]
    pub epsilons: Vec<f64>,
}

fn default_truncation() -> usize {
    8
}
fn default_k_max() -> usize {
    4
}
fn default_tolerance() -> f64 {
    1e-9
}
fn default_window_a() -> f64 {
    PI * PI
}
fn default_window_c() -> f64 {
    10.0
}
fn default_one() -> f64 {
    1.0
}
fn default_bound_c() -> f64 {
    5.0
}
fn default_samples() -> usize {
    5
}
fn default_trials() -> usize {
    50
}
fn default_blowup_floor() -> f64 {
    0.4
}
fn default_dim() -> usize {
    2
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    /// Fourier truncation on the structure-group circle.
    #[serde(default = "default_truncation")]
    pub group_truncation: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_window_a")]
    pub window_a: f64,
    #[serde(default = "default_window_c")]
    pub window_c: f64,
    /// Curvature bound `K` of the sinh rescaling.
    #[serde(default = "default_one")]
    pub curvature_bound: f64,
    #[serde(default = "default_bound_c")]
    pub bound_constant: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_blowup_floor")]
    pub blowup_floor: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        toml::from_str("").expect("all numerics fields have defaults")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: Option<u64>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    /// File-name prefix for written artifacts.
    #[serde(default)]
    pub output_prefix: String,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    fn validate(&self) -> Result<()> {
        let n = &self.numerics;
        for (name, v) in [
            ("tolerance", n.tolerance),
            ("window_a", n.window_a),
            ("window_c", n.window_c),
            ("curvature_bound", n.curvature_bound),
            ("bound_constant", n.bound_constant),
        ] {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        let eps = &self.model.epsilons;
        if eps.iter().any(|&e| !(e > 0.0)) || eps.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::Config("epsilons must be positive and strictly decreasing".into()));
        }
        Ok(())
    }
}

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub experiment: Experiment,
    pub seed: u64,
    pub assertions: Vec<Assertion>,
    pub artifacts: Vec<PathBuf>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

struct Ctx<'a> {
    out: &'a Path,
    prefix: &'a str,
    summary: RunSummary,
}

impl Ctx<'_> {
    fn assert(&mut self, name: &str, passed: bool) {
        if passed {
            log::info!("assertion {name}: ok");
        } else {
            log::error!("assertion {name}: FAILED");
        }
        self.summary.assertions.push(Assertion {
            name: name.to_string(),
            passed,
        });
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(format!("{}{}", self.prefix, name))
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<()> {
        let path = self.path(name);
        let mut buf = Vec::new();
        body(&mut buf).expect("writing to memory");
        fs::write(&path, buf).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.summary.artifacts.push(path);
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        let text = serde_json::to_string_pretty(value).expect("serializable report");
        self.write(name, |w| writeln!(w, "{text}"))
    }

    fn write_spectrum(&mut self, name: &str, s: &Spectrum) -> Result<()> {
        self.write(name, |w| s.write_csv(w))
    }
}

fn module(kind: ModuleKind, n: usize) -> Result<CliffordModule> {
    match kind {
        ModuleKind::Spinor => spinor_gammas(n),
        ModuleKind::Exterior => exterior_module(n),
    }
}

fn torus(m: &ModelConfig) -> Result<FlatTorusModel> {
    let shift = if m.spin_shift.is_empty() {
        vec![0.0; m.basis.len()]
    } else {
        m.spin_shift.clone()
    };
    FlatTorusModel::new(m.basis.clone(), shift)
}

fn mapping_torus(m: &ModelConfig) -> Result<AffineMappingTorus> {
    let length = m
        .base_length
        .ok_or_else(|| Error::Config("mapping torus needs model.base_length".into()))?;
    let mut model = AffineMappingTorus::product(torus(m)?, length, 1.0)?;
    if let Some(h) = &m.holonomy {
        model.holonomy = h.clone();
    }
    if let Some(l) = &m.lift {
        model.lift = l.clone();
    }
    if let Some(a) = &m.connection {
        model.connection = a.clone();
    }
    model.base_spin_shift = m.base_spin_shift;
    model.validate()?;
    Ok(model)
}

fn epsilons(m: &ModelConfig) -> Result<Vec<f64>> {
    if m.epsilons.is_empty() {
        return Err(Error::Config("model.epsilons is empty".into()));
    }
    Ok(m.epsilons.clone())
}

/// Runs one experiment, writing artifacts into `out`.
pub fn run(config: &ExperimentConfig, out: &Path, seed_override: Option<u64>) -> Result<RunSummary> {
    fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.display().to_string(),
        source,
    })?;
    let seed = seed_override.or(config.seed).unwrap_or(DEFAULT_SEED);
    let mut ctx = Ctx {
        out,
        prefix: &config.output_prefix,
        summary: RunSummary {
            experiment: config.experiment,
            seed,
            assertions: Vec::new(),
            artifacts: Vec::new(),
        },
    };
    let m = &config.model;
    let num = &config.numerics;
    let constants = WindowConstants {
        a: num.window_a,
        c: num.window_c,
    };
    match config.experiment {
        Experiment::TorusSpectrum => {
            let t = torus(m)?;
            let cm = module(m.module, t.dim())?;
            let op = assemble_dirac(&BundleModel::FlatTorus(t.clone()), &cm, num.truncation)?;
            let spec = eigensolve(&op)?;
            let oracle = torus_oracle(&t, &cm, num.truncation);
            let close = epsilon_close(&spec.values, &oracle, num.tolerance).is_some();
            ctx.write_spectrum("spectrum.csv", &spec)?;
            ctx.write_json(
                "residuals.json",
                &json!({
                    "seed": seed,
                    "hermitianResidual": op.hermitian_residual(),
                    "oracleAgreement": close,
                    "count": spec.len(),
                }),
            )?;
            ctx.assert("hermitian", op.hermitian_residual() <= 1e-12);
            ctx.assert("fourier_oracle", close);
        }
        Experiment::WindowTest | Experiment::Collapse => {
            let model = mapping_torus(m)?;
            let cm = module(m.module, model.dim())?;
            let report = collapse_run(&model, &cm, &epsilons(m)?, num.k_max, num.truncation, &constants)?;
            if config.experiment == Experiment::WindowTest {
                ctx.write_json(
                    "window.json",
                    &json!({ "seed": seed, "comparisons": report.diagnostics.window }),
                )?;
                ctx.assert("invariant_space_nonempty", report.verdict == Verdict::Converges);
                ctx.assert("window_equality", report.diagnostics.window_holds());
                ctx.assert("matched_count_nondecreasing", report.diagnostics.matched_nondecreasing());
            } else {
                ctx.write_json("collapse_report.json", &report)?;
                let rows = report.plot_rows();
                let k_max = num.k_max;
                ctx.write("collapse_plot.csv", |w| {
                    let lambdas: Vec<String> = (1..=k_max).map(|k| format!("lambda_{k}")).collect();
                    writeln!(w, "epsilon,{},window", lambdas.join(","))?;
                    for row in &rows {
                        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                        writeln!(w, "{}", cells.join(","))?;
                    }
                    Ok(())
                })?;
                for (e, s) in report.epsilons.iter().zip(&report.spectra_per_eps) {
                    ctx.write_spectrum(&format!("spectrum_eps_{e}.csv"), s)?;
                }
                if let Some(limit) = &report.limit_spectrum {
                    ctx.write_spectrum("limit_spectrum.csv", limit)?;
                    ctx.assert("window_equality", report.diagnostics.window_holds());
                    ctx.assert("errors_monotone", report.diagnostics.errors_monotone);
                    let limit_op = crate::assembly::limit_operator(&model, &cm, num.truncation)?;
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut minimax = Vec::new();
                    for k in 1..=num.k_max {
                        minimax.push(minimax_check(&limit_op, k, num.trials, &mut rng)?);
                    }
                    ctx.assert("minimax", minimax.iter().all(|r| r.pass));
                    ctx.write_json("minimax.json", &json!({ "seed": seed, "checks": minimax }))?;
                }
            }
        }
        Experiment::Blowup => {
            let model = mapping_torus(m)?;
            let cm = module(m.module, model.dim())?;
            let report = blowup_check(&model, &cm, &epsilons(m)?, num.truncation)?;
            ctx.write_json("blowup.json", &json!({ "seed": seed, "report": report }))?;
            ctx.assert("rate_positive", report.pass);
            ctx.assert("rate_above_floor", report.rate >= num.blowup_floor);
        }
        Experiment::Perturbation => {
            let cm = module(m.module, num.dim)?;
            let shift = if m.spin_shift.is_empty() {
                vec![0.0; num.dim]
            } else {
                m.spin_shift.clone()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut paths = Vec::new();
            let mut all_pass = true;
            for i in 0..num.trials {
                let family = random_torus_path(&mut rng, num.dim);
                let r = perturbation_bound_check(
                    &family,
                    &shift,
                    &cm,
                    num.curvature_bound,
                    num.truncation,
                    num.samples,
                    num.bound_constant,
                )?;
                if !r.pass {
                    log::error!("path {i} exceeds the bound: {:?}", family.coefficients);
                }
                all_pass &= r.pass;
                paths.push(json!({
                    "index": i,
                    "maxObservedRatio": r.max_observed_ratio,
                    "pass": r.pass,
                    "frameCoefficients": family.coefficients.iter().map(rows).collect::<Vec<_>>(),
                }));
            }
            let worst = paths
                .iter()
                .filter_map(|p| p["maxObservedRatio"].as_f64())
                .fold(0.0, f64::max);
            ctx.write_json(
                "perturbation.json",
                &json!({ "seed": seed, "cUsed": num.bound_constant, "maxObservedRatio": worst, "paths": paths }),
            )?;
            ctx.assert("bound_holds", all_pass);
        }
        Experiment::FrameBundle => {
            let t = torus(m)?;
            let cm = module(m.module, t.dim())?;
            let out = frame_bundle_operator(&t, &cm, num.truncation, num.group_truncation)?;
            let agree = epsilon_close(&out.dirac_squared.values, &out.frame_laplacian.values, 1e-8).is_some();
            ctx.write_spectrum("dirac_squared.csv", &out.dirac_squared)?;
            ctx.write_spectrum("frame_laplacian.csv", &out.frame_laplacian)?;
            ctx.write_json(
                "frame_bundle.json",
                &json!({ "seed": seed, "casimir": out.casimir, "agree": agree,
                         "count": [out.dirac_squared.len(), out.frame_laplacian.len()] }),
            )?;
            ctx.assert("spectra_agree", agree);
            ctx.assert("casimir_quarter", (out.casimir - 0.25).abs() < 1e-12);
        }
        Experiment::BlockIdentities => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cases = Vec::new();
            let (mut ok_inv, mut ok_fac, mut ok_verdict) = (true, true, true);
            for i in 0..num.trials {
                let m = random_block_matrix(&mut rng);
                let inv = schur_inverse(&m)?;
                let res = inverse_residual(&m, &inv);
                let nr = neumann_factorization_check(&m)?;
                ok_inv &= res <= 1e-10;
                ok_fac &= nr.factorization_residual <= 1e-10;
                if nr.contraction_norm < 0.99 {
                    ok_verdict &= nr.invertible
                        && nr.direct_invertible
                        && nr.neumann_inverse_deviation.is_some_and(|d| d <= 1e-9);
                }
                cases.push(json!({
                    "index": i,
                    "schurResidual": res,
                    "factorizationResidual": nr.factorization_residual,
                    "contractionNorm": nr.contraction_norm,
                    "invertible": nr.invertible,
                    "neumannInverseDeviation": nr.neumann_inverse_deviation,
                }));
            }
            ctx.write_json("residuals.json", &json!({ "seed": seed, "cases": cases }))?;
            ctx.assert("schur_inverse", ok_inv);
            ctx.assert("neumann_factorization", ok_fac);
            ctx.assert("invertibility_verdict", ok_verdict);
        }
    }
    Ok(ctx.summary)
}

fn rows(m: &RMat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// `±2π|ξ|` with multiplicity `dim V / 2` per mode (`dim V` when `n = 1`).
fn torus_oracle(t: &FlatTorusModel, cm: &CliffordModule, n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for m in torus_modes(&t.spin_shift, n) {
        let xi = t.frequency(&m);
        if cm.n == 1 {
            out.extend(std::iter::repeat_n(2.0 * PI * xi[0], cm.dim_v));
            continue;
        }
        let r = 2.0 * PI * xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        for _ in 0..cm.dim_v / 2 {
            out.push(r);
            out.push(-r);
        }
    }
    out
}

/// `P(t) = I + P₀ + tP₁ + t²P₂` with small random `P_k`, so `P(t)` stays invertible
/// on `[0, 1]`.
pub fn random_torus_path<R: Rng>(rng: &mut R, dim: usize) -> PolynomialFrameFamily {
    let budget = 0.9 / dim as f64;
    let mut rand_mat = |scale: f64| RMat::from_fn(dim, dim, |_, _| scale * budget * rng.random_range(-1.0..1.0));
    let p0 = RMat::identity(dim, dim) + rand_mat(0.3);
    let p1 = rand_mat(0.45);
    let p2 = rand_mat(0.25);
    PolynomialFrameFamily {
        coefficients: vec![p0, p1, p2],
    }
}

/// Random blocks with well-conditioned `α` and positive definite `δ`; sizes 1..=6.
pub fn random_block_matrix<R: Rng>(rng: &mut R) -> BlockMatrix2x2 {
    fn rand_c<R: Rng>(rng: &mut R, r: usize, c: usize, s: f64) -> CMat {
        CMat::from_fn(r, c, |_, _| Complex64::new(s * rng.random_range(-1.0..1.0), s * rng.random_range(-1.0..1.0)))
    }
    let p = rng.random_range(1..=6);
    let q = rng.random_range(1..=6);
    let coupling = rng.random_range(0.1..1.5);
    let alpha = rand_c(rng, p, p, 1.0) + identity(p).scale(3.0);
    let beta = rand_c(rng, p, q, coupling);
    let gamma = rand_c(rng, q, p, coupling);
    let g = rand_c(rng, q, q, 1.0);
    let delta = &g * g.adjoint() + identity(q).scale(0.5);
    BlockMatrix2x2::new(alpha, beta, gamma, delta).expect("consistent shapes")
}
