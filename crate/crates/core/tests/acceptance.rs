//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use dirac_collapse::assembly::{
    assemble_dirac, bochner_rhs, branch_eigenvalue, eigenvalue_derivative, frame_bundle_operator, Branch,
};
use dirac_collapse::cli::{random_block_matrix, random_torus_path};
use dirac_collapse::clifford::{exterior_module, spinor_gammas, CliffordModule};
use dirac_collapse::collapse::{blowup_check, collapse_run, perturbation_bound_check};
use dirac_collapse::geometry::{
    AffineMappingTorus, BundleModel, FlatTorusModel, LiftSpec, MetricFamily, WindowConstants,
};
use dirac_collapse::linalg::{max_abs, CMat};
use dirac_collapse::resolvent::{inverse_residual, neumann_factorization_check, schur_inverse};
use dirac_collapse::spectrum::{eigensolve, epsilon_close, subset_epsilon_close};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn comm(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

fn kd(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

/// Relations recomputed from the raw generators.
fn raw_residual(cm: &CliffordModule) -> f64 {
    let n = cm.n;
    let id = DMatrix::<Complex64>::identity(cm.dim_v, cm.dim_v);
    let g = &cm.gammas;
    let h = &cm.gamma_hats;
    let mut worst: f64 = 0.0;
    for a in 0..n {
        worst = worst.max(max_abs(&(&g[a] - g[a].adjoint())));
        for b in 0..n {
            let anti = &g[a] * &g[b] + &g[b] * &g[a];
            worst = worst.max(max_abs(&(anti - &id * Complex64::new(2.0 * kd(a, b), 0.0))));
            let mut sigma = comm(&g[a], &g[b]);
            if !h.is_empty() {
                sigma += comm(&h[a], &h[b]);
            }
            let sigma = sigma * Complex64::new(0.25, 0.0);
            worst = worst.max(max_abs(&(&sigma - &cm.sigmas[a][b])));
            for c in 0..n {
                let lhs = comm(&g[a], &sigma_of(cm, b, c));
                let rhs = &g[c] * Complex64::new(kd(a, b), 0.0) - &g[b] * Complex64::new(kd(a, c), 0.0);
                worst = worst.max(max_abs(&(lhs - rhs)));
            }
        }
    }
    worst
}

fn sigma_of(cm: &CliffordModule, a: usize, b: usize) -> CMat {
    cm.sigmas[a][b].clone()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for n in 1..=6 {
        let cm = spinor_gammas(n).unwrap();
        worst = worst.max(cm.residuals().max()).max(raw_residual(&cm));
    }
    for n in 1..=4 {
        let cm = exterior_module(n).unwrap();
        worst = worst.max(cm.residuals().max()).max(raw_residual(&cm));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(worst < 1e-12 && secs < 5.0, format!("max residual {worst:.2e}, {secs:.2}s"))
}

fn random_flat_torus(rng: &mut ChaCha8Rng, n: usize) -> FlatTorusModel {
    loop {
        let basis: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| kd(i, j) * 1.2 + rng.random_range(-0.4..0.4)).collect())
            .collect();
        let shift = (0..n).map(|_| if rng.random_bool(0.5) { 0.5 } else { 0.0 }).collect();
        if let Ok(t) = FlatTorusModel::new(basis, shift) {
            if t.lattice_matrix().determinant().abs() > 0.3 {
                return t;
            }
        }
    }
}

fn hexagonal() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]]
}

fn mapping_models() -> Vec<AffineMappingTorus> {
    let mut out = Vec::new();
    let circle = FlatTorusModel::circle(2.0 * PI, 0.0).unwrap();
    let mut m = AffineMappingTorus::product(circle, 3.0, 0.5).unwrap();
    m.connection = vec![0.3];
    out.push(m);
    let circle = FlatTorusModel::circle(1.5, 0.5).unwrap();
    let mut m = AffineMappingTorus::product(circle, 2.0, 0.7).unwrap();
    m.base_spin_shift = 0.5;
    out.push(m);
    let square = FlatTorusModel::rectangular(&[1.0, 1.0], &[0.5, 0.5]).unwrap();
    let mut m = AffineMappingTorus::product(square, 1.0, 0.5).unwrap();
    m.holonomy = vec![vec![-1, 0], vec![0, -1]];
    m.lift = LiftSpec::Rotation { a: 1, b: 2, angle: PI };
    out.push(m);
    let square = FlatTorusModel::rectangular(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
    let mut m = AffineMappingTorus::product(square, 2.5, 0.8).unwrap();
    m.holonomy = vec![vec![0, -1], vec![1, 0]];
    out.push(with_equivariant_lift(m, PI / 2.0));
    let hex = FlatTorusModel::new(hexagonal(), vec![0.0, 0.0]).unwrap();
    let mut m = AffineMappingTorus::product(hex, 1.7, 0.6).unwrap();
    m.holonomy = vec![vec![0, -1], vec![1, 1]];
    m.base_spin_shift = 0.5;
    out.push(with_equivariant_lift(m, PI / 3.0));
    out
}

/// Fiber-plane rotation lift by `±angle`, whichever covers the holonomy.
fn with_equivariant_lift(mut m: AffineMappingTorus, angle: f64) -> AffineMappingTorus {
    let cm = spinor_gammas(m.dim()).unwrap();
    for a in [angle, -angle] {
        m.lift = LiftSpec::Rotation { a: 1, b: 2, angle: a };
        if m.resolve_lift(&cm).is_ok() {
            return m;
        }
    }
    panic!("no equivariant rotation lift");
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut models = Vec::new();
    for i in 0..10 {
        let n = 1 + i % 3;
        models.push(BundleModel::FlatTorus(random_flat_torus(&mut rng, n)));
    }
    models.extend(mapping_models().into_iter().map(BundleModel::MappingTorus));
    for model in &models {
        let n = match model {
            BundleModel::FlatTorus(t) => t.dim(),
            BundleModel::MappingTorus(m) => m.dim(),
        };
        let cm = spinor_gammas(n).unwrap();
        let d = match assemble_dirac(model, &cm, 8) {
            Ok(d) => d,
            Err(e) => return outcome(false, format!("assembly failed: {e}")),
        };
        let rhs = bochner_rhs(model, &cm, 8).unwrap();
        worst = worst.max(d.square().max_abs_diff(&rhs).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 1e-10 && secs < 30.0,
        format!("max |D² - rhs| {worst:.2e} over {} models, {secs:.2}s", models.len()),
    )
}

/// `±2π|B^{-T}(m + δ)|`, by enumerating modes here.
fn fourier_oracle(basis: &[Vec<f64>], shift: &[f64], n: i64, dim_v: usize) -> Vec<f64> {
    let dim = basis.len();
    let b = DMatrix::from_fn(dim, dim, |i, j| basis[j][i]);
    let dual = b.try_inverse().unwrap().transpose();
    let ranges: Vec<Vec<i64>> = shift
        .iter()
        .map(|&d| (-n - 1..=n + 1).filter(|&m| (m as f64 + d).abs() <= n as f64).collect())
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    'outer: loop {
        let nu = nalgebra::DVector::from_iterator(dim, (0..dim).map(|i| ranges[i][idx[i]] as f64 + shift[i]));
        let xi = &dual * nu;
        if dim == 1 {
            out.extend(std::iter::repeat_n(2.0 * PI * xi[0], dim_v));
        } else {
            for _ in 0..dim_v / 2 {
                out.push(2.0 * PI * xi.norm());
                out.push(-2.0 * PI * xi.norm());
            }
        }
        for i in 0..dim {
            idx[i] += 1;
            if idx[i] < ranges[i].len() {
                continue 'outer;
            }
            idx[i] = 0;
        }
        break;
    }
    out
}

fn criterion_3() -> Outcome {
    let n = 16;
    let mut cases: Vec<(Vec<Vec<f64>>, Vec<f64>)> = vec![
        (vec![vec![2.0 * PI]], vec![0.0]),
        (vec![vec![2.0 * PI]], vec![0.5]),
        (vec![vec![1.0]], vec![0.5]),
    ];
    for shift in [[0.0, 0.0], [0.5, 0.0], [0.5, 0.5]] {
        cases.push((vec![vec![1.0, 0.0], vec![0.0, 1.0]], shift.to_vec()));
        cases.push((vec![vec![1.0, 0.2], vec![-0.3, 1.4]], shift.to_vec()));
    }
    let mut worst: f64 = 0.0;
    for (basis, shift) in &cases {
        let t = FlatTorusModel::new(basis.clone(), shift.clone()).unwrap();
        let cm = spinor_gammas(t.dim()).unwrap();
        let spec = eigensolve(&assemble_dirac(&BundleModel::FlatTorus(t), &cm, n).unwrap()).unwrap();
        let mut oracle = fourier_oracle(basis, shift, n as i64, cm.dim_v);
        oracle.sort_by(f64::total_cmp);
        if oracle.len() != spec.len() {
            return outcome(false, format!("count {} vs oracle {}", spec.len(), oracle.len()));
        }
        let dev = spec.values.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    outcome(worst <= 1e-9, format!("max deviation {worst:.2e} over {} tori, N = {n}", cases.len()))
}

fn criterion_4() -> Outcome {
    let fiber = FlatTorusModel::circle(2.0 * PI, 0.0).unwrap();
    let mut model = AffineMappingTorus::product(fiber, 2.0 * PI, 1.0).unwrap();
    model.base_spin_shift = 0.5;
    let cm = spinor_gammas(2).unwrap();
    let report = match collapse_run(&model, &cm, &[1.0, 0.5, 0.25, 0.125], 4, 12, &WindowConstants::default()) {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let d = &report.diagnostics;
    let counts: Vec<usize> = d.window.iter().map(|w| w.matched).collect();
    let dev = d.window.iter().map(|w| w.max_deviation).fold(0.0, f64::max);
    outcome(
        d.window_holds() && d.matched_increasing(),
        format!("matched counts {counts:?}, max deviation {dev:.2e}, W = {:?}", report.window_bounds),
    )
}

fn criterion_5() -> Outcome {
    let eps = [1.0, 0.5, 0.25, 0.125];
    let cm2 = spinor_gammas(2).unwrap();
    let circle = FlatTorusModel::circle(2.0 * PI, 0.5).unwrap();
    let c = blowup_check(&AffineMappingTorus::product(circle, 2.0 * PI, 1.0).unwrap(), &cm2, &eps, 6).unwrap();
    let exact = c.epsilons.iter().zip(&c.min_abs).all(|(e, m)| (m - 0.5 / e).abs() < 1e-9);

    let square = FlatTorusModel::rectangular(&[1.0, 1.0], &[0.5, 0.5]).unwrap();
    let mut t2 = AffineMappingTorus::product(square, 1.0, 1.0).unwrap();
    t2.holonomy = vec![vec![-1, 0], vec![0, -1]];
    t2.lift = LiftSpec::Rotation { a: 1, b: 2, angle: PI };
    let r = blowup_check(&t2, &spinor_gammas(3).unwrap(), &eps, 4).unwrap();
    let floor = |rep: &dirac_collapse::collapse::BlowupReport| {
        rep.epsilons.iter().zip(&rep.min_abs).all(|(e, m)| *m >= 0.4 / e)
    };
    outcome(
        exact && floor(&c) && floor(&r),
        format!("circle rate {:.6} (exact 0.5: {exact}), T² rate {:.6}", c.rate, r.rate),
    )
}

/// Branch eigenvalue from the block `2πγ(ξ)` at the torus with Gram matrix `c(t)`.
fn block_branch(family: &dyn MetricFamily, cm: &CliffordModule, shift: &[f64], b: &Branch, t: f64) -> f64 {
    let torus = FlatTorusModel::from_gram(&family.gram(t), shift.to_vec()).unwrap();
    let xi = torus.frequency(&b.mode);
    let mut block = CMat::zeros(cm.dim_v, cm.dim_v);
    for (g, x) in cm.gammas.iter().zip(&xi) {
        block += g * Complex64::new(2.0 * PI * x, 0.0);
    }
    let eig = SymmetricEigen::new(block);
    let vals = eig.eigenvalues.iter().copied();
    if b.sign >= 0 {
        vals.fold(f64::NEG_INFINITY, f64::max)
    } else {
        vals.fold(f64::INFINITY, f64::min)
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let h = 1e-4;
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let dim = 2 + i % 2;
        let cm = spinor_gammas(dim).unwrap();
        let family = random_torus_path(&mut rng, dim);
        let shift: Vec<f64> = (0..dim).map(|_| if rng.random_bool(0.5) { 0.5 } else { 0.0 }).collect();
        let mode: Vec<i64> = loop {
            let m: Vec<i64> = (0..dim).map(|_| rng.random_range(-3..=3)).collect();
            if m.iter().zip(&shift).any(|(&x, &d)| x as f64 + d != 0.0) {
                break m;
            }
        };
        let b = Branch {
            mode,
            sign: if rng.random_bool(0.5) { 1 } else { -1 },
        };
        let t0 = rng.random_range(0.2..0.8);
        let analytic = eigenvalue_derivative(&family, &cm, &shift, &b, t0).unwrap();
        let fd = (block_branch(&family, &cm, &shift, &b, t0 + h) - block_branch(&family, &cm, &shift, &b, t0 - h))
            / (2.0 * h);
        let lam = branch_eigenvalue(&family, &shift, &b, t0).unwrap();
        let rel = (analytic - fd).abs() / fd.abs().max(1e-3 * lam.abs());
        worst = worst.max(rel);
    }
    outcome(worst <= 1e-4, format!("max relative error {worst:.2e} over 20 paths"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cm = spinor_gammas(2).unwrap();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for i in 0..100 {
        let family = random_torus_path(&mut rng, 2);
        let shift = [if i % 2 == 0 { 0.0 } else { 0.5 }, 0.0];
        let r = perturbation_bound_check(&family, &shift, &cm, 1.0, 4, 5, 5.0).unwrap();
        worst = worst.max(r.max_observed_ratio);
        if !r.pass {
            failures.push(format!("path {i}: {:?}", family.coefficients));
        }
    }
    outcome(
        failures.is_empty(),
        format!("max ratio {worst:.4} against C = 5{}", if failures.is_empty() { String::new() } else { format!("; offending {failures:?}") }),
    )
}

fn criterion_8() -> Outcome {
    let cm = spinor_gammas(2).unwrap();
    let mut worst: f64 = 0.0;
    let mut casimir_ok = true;
    for shift in [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5], [0.5, 0.5]] {
        let t = FlatTorusModel::new(vec![vec![1.0, 0.0], vec![0.3, 1.2]], shift.to_vec()).unwrap();
        let out = frame_bundle_operator(&t, &cm, 5, 3).unwrap();
        casimir_ok &= (out.casimir - 0.25).abs() < 1e-12;
        match epsilon_close(&out.dirac_squared.values, &out.frame_laplacian.values, 1e-8) {
            Some(pairs) => {
                for (i, j) in pairs {
                    worst = worst.max((out.dirac_squared.values[i] - out.frame_laplacian.values[j]).abs());
                }
            }
            None => return outcome(false, format!("spectra differ for δ = {shift:?}")),
        }
    }
    outcome(casimir_ok && worst <= 1e-8, format!("max deviation {worst:.2e}, c_V = 1/4: {casimir_ok}"))
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut schur, mut fact, mut neumann) = (0.0_f64, 0.0_f64, 0.0_f64);
    let mut verdict_ok = true;
    let mut contracting = 0;
    for _ in 0..50 {
        let m = random_block_matrix(&mut rng);
        let inv = schur_inverse(&m).unwrap();
        let dense = m.to_dense().try_inverse().unwrap();
        let rel = max_abs(&(inv.to_dense() - &dense)) / max_abs(&dense);
        schur = schur.max(inverse_residual(&m, &inv)).max(rel);
        let r = neumann_factorization_check(&m).unwrap();
        fact = fact.max(r.factorization_residual);
        if r.contraction_norm < 0.99 {
            contracting += 1;
            let s = m.schur_complement().unwrap();
            verdict_ok &= r.invertible && s.try_inverse().is_some();
            match r.neumann_inverse_deviation {
                Some(d) => neumann = neumann.max(d),
                None => verdict_ok = false,
            }
        }
    }
    outcome(
        schur <= 1e-10 && fact <= 1e-10 && verdict_ok && neumann <= 1e-9,
        format!(
            "Schur {schur:.2e}, factorization {fact:.2e}, Neumann inverse {neumann:.2e} on {contracting} contracting cases"
        ),
    )
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn injection_exists(a: &[f64], b: &[f64], eps: f64, used: &mut Vec<bool>) -> bool {
    let Some((&x, rest)) = a.split_first() else {
        return true;
    };
    for j in 0..b.len() {
        if !used[j] && (x - b[j]).abs() <= eps {
            used[j] = true;
            if injection_exists(rest, b, eps, used) {
                used[j] = false;
                return true;
            }
            used[j] = false;
        }
    }
    false
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut mismatches = 0;
    let mut positives = (0, 0);
    for _ in 0..500 {
        let na = rng.random_range(0..=8);
        let nb = if rng.random_bool(0.5) { na } else { rng.random_range(na..=8) };
        let grid = |rng: &mut ChaCha8Rng| (rng.random_range(0..6) as f64) * 0.25 + rng.random_range(-0.05..0.05);
        let a: Vec<f64> = (0..na).map(|_| grid(&mut rng)).collect();
        let b: Vec<f64> = (0..nb).map(|_| grid(&mut rng)).collect();
        let eps = rng.random_range(0.0..0.3);
        let bij = a.len() == b.len()
            && permutations(a.len())
                .iter()
                .any(|p| p.iter().enumerate().all(|(i, &j)| (a[i] - b[j]).abs() <= eps));
        let inj = injection_exists(&a, &b, eps, &mut vec![false; b.len()]);
        let fast_bij = epsilon_close(&a, &b, eps).is_some();
        let fast_inj = subset_epsilon_close(&a, &b, eps);
        if bij != fast_bij || inj != fast_inj {
            mismatches += 1;
        }
        positives.0 += usize::from(bij);
        positives.1 += usize::from(inj);
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} mismatches in 500 instances ({} bijective, {} injective)", positives.0, positives.1),
    )
}

fn run_cli(bin: &Path, config: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(bin)
        .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("{} exited with {}", config.display(), status.status))
    }
}

fn dir_contents(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (PathBuf::from(p.file_name().unwrap()), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_11() -> Outcome {
    let bin = PathBuf::from(env!("CARGO_BIN_EXE_dirac-collapse"));
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let tmp = tempfile::tempdir().unwrap();
    let mut names: Vec<PathBuf> = std::fs::read_dir(&configs)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    names.sort();
    let mut differing = Vec::new();
    for cfg in &names {
        let stem = cfg.file_stem().unwrap().to_string_lossy().to_string();
        let (a, b) = (tmp.path().join(format!("{stem}-1")), tmp.path().join(format!("{stem}-2")));
        for out in [&a, &b] {
            if let Err(e) = run_cli(&bin, cfg, out) {
                return outcome(false, e);
            }
        }
        let (ca, cb) = (dir_contents(&a), dir_contents(&b));
        if ca.is_empty() || ca != cb {
            differing.push(stem);
        }
    }
    outcome(
        differing.is_empty() && !names.is_empty(),
        format!("{} experiments, differing: {differing:?}", names.len()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 clifford relations", criterion_1),
        ("2 bochner identity", criterion_2),
        ("3 analytic spectra", criterion_3),
        ("4 spectral window", criterion_4),
        ("5 blow-up rate", criterion_5),
        ("6 eigenvalue derivative", criterion_6),
        ("7 perturbation bound", criterion_7),
        ("8 frame bundle identity", criterion_8),
        ("9 block identities", criterion_9),
        ("10 comparison predicates", criterion_10),
        ("11 cli determinism", criterion_11),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let o = std::panic::catch_unwind(f).unwrap_or_else(|_| outcome(false, "panicked"));
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
