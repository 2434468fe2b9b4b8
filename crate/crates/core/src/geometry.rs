//! Model Riemannian affine fiber bundles with flat total space: flat tori and
//! mapping tori of flat tori over a circle, plus paths of flat metrics.

use crate::clifford::{CliffordModule, HolonomyRep};
use crate::error::{Error, Result};
use crate::linalg::{identity, max_abs_diff, spd_sqrt_pair, CMat, RMat};
use serde::{Deserialize, Serialize};

/// Default grid resolution per dimension for brute-force diameters.
pub const DIAMETER_GRID: usize = 64;

fn check_shift(shift: &[f64], what: &str) -> Result<()> {
    for &d in shift {
        if d != 0.0 && d != 0.5 {
            return Err(Error::InvalidModel(format!(
                "{what} spin shift entries must be 0 or 1/2, got {d}"
            )));
        }
    }
    Ok(())
}

/// Flat torus `R^n / Λ` with a spin structure encoded as half-integer shifts of
/// the dual lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatTorusModel {
    /// Lattice basis vectors `b_1, ..., b_n` (the columns of the lattice matrix).
    pub basis: Vec<Vec<f64>>,
    /// `δ ∈ {0, ½}^n`; sections pick up `(-1)^{2δ_i}` along `b_i`.
    pub spin_shift: Vec<f64>,
}

impl FlatTorusModel {
    pub fn new(basis: Vec<Vec<f64>>, spin_shift: Vec<f64>) -> Result<Self> {
        let model = Self { basis, spin_shift };
        model.validate()?;
        Ok(model)
    }

    /// Circle of the given length.
    pub fn circle(length: f64, shift: f64) -> Result<Self> {
        Self::new(vec![vec![length]], vec![shift])
    }

    /// Rectangular torus with the given side lengths.
    pub fn rectangular(sides: &[f64], shift: &[f64]) -> Result<Self> {
        let n = sides.len();
        let basis = (0..n)
            .map(|i| (0..n).map(|j| if i == j { sides[i] } else { 0.0 }).collect())
            .collect();
        Self::new(basis, shift.to_vec())
    }

    /// Torus whose lattice has Gram matrix `gram`, realized by the basis `gram^{1/2}`.
    pub fn from_gram(gram: &RMat, spin_shift: Vec<f64>) -> Result<Self> {
        let (root, _) = spd_sqrt_pair(gram)
            .ok_or_else(|| Error::InvalidModel("Gram matrix is not positive definite".into()))?;
        let n = gram.nrows();
        Self::new((0..n).map(|j| root.column(j).iter().copied().collect()).collect(), spin_shift)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.basis.len();
        if n == 0 {
            return Err(Error::InvalidModel("torus dimension must be positive".into()));
        }
        if self.basis.iter().any(|b| b.len() != n) || self.spin_shift.len() != n {
            return Err(Error::InvalidModel(format!(
                "lattice basis and spin shift must have dimension {n}"
            )));
        }
        if self.lattice_matrix().determinant().abs() <= 1e-12 {
            return Err(Error::InvalidModel("lattice basis is singular".into()));
        }
        check_shift(&self.spin_shift, "fiber")
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Lattice matrix with the basis vectors as columns.
    pub fn lattice_matrix(&self) -> RMat {
        let n = self.dim();
        RMat::from_fn(n, n, |i, j| self.basis[j][i])
    }

    /// Gram matrix `G = BᵀB` of the lattice basis.
    pub fn gram(&self) -> RMat {
        let b = self.lattice_matrix();
        b.transpose() * b
    }

    /// `B^{-T}`, mapping lattice-dual coordinates to physical frequencies.
    pub fn dual_matrix(&self) -> RMat {
        self.lattice_matrix()
            .try_inverse()
            .expect("validated lattice is invertible")
            .transpose()
    }

    /// Physical frequency `B^{-T}(m + δ)` of Fourier mode `m`.
    pub fn frequency(&self, mode: &[i64]) -> Vec<f64> {
        let dual = self.dual_matrix();
        let shifted = nalgebra::DVector::from_iterator(
            self.dim(),
            mode.iter().zip(&self.spin_shift).map(|(&m, &d)| m as f64 + d),
        );
        (dual * shifted).iter().copied().collect()
    }

    /// Lattice scaled uniformly by `eps`.
    pub fn scaled(&self, eps: f64) -> Self {
        Self {
            basis: self
                .basis
                .iter()
                .map(|b| b.iter().map(|x| x * eps).collect())
                .collect(),
            spin_shift: self.spin_shift.clone(),
        }
    }

    pub fn has_zero_mode(&self) -> bool {
        self.spin_shift.iter().all(|&d| d == 0.0)
    }

    /// Image of the lattice generators in `Aut(V)`: `(-1)^{2δ_i} Id`.
    pub fn holonomy_rep(&self, dim_v: usize) -> HolonomyRep {
        let gens = self
            .spin_shift
            .iter()
            .map(|&d| identity(dim_v).scale(if d == 0.0 { 1.0 } else { -1.0 }))
            .collect();
        HolonomyRep::new(dim_v, gens).expect("±Id is unitary")
    }

    /// Smallest singular value of `B^{-T}`: every mode with `‖m + δ‖_∞ > N` has
    /// physical frequency at least `N` times this.
    pub fn dual_min_singular(&self) -> f64 {
        self.dual_matrix()
            .singular_values()
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// Intrinsic diameter of the flat torus (the covering radius of the lattice).
    pub fn diameter(&self) -> f64 {
        self.diameter_with_grid(DIAMETER_GRID)
    }

    pub fn diameter_with_grid(&self, resolution: usize) -> f64 {
        let g = self.gram();
        let n = self.dim();
        let rectangular = (0..n).all(|i| (0..n).all(|j| i == j || g[(i, j)].abs() < 1e-14));
        if rectangular {
            return 0.5 * (0..n).map(|i| g[(i, i)]).sum::<f64>().sqrt();
        }
        covering_radius_grid(&self.lattice_matrix(), resolution)
    }
}

/// Distance from physical point `B u` to the lattice, over a box of neighbours.
fn lattice_distance(b: &RMat, u: &[f64]) -> f64 {
    let n = u.len();
    let reach = 2i64;
    let width = (2 * reach + 1) as usize;
    let total = width.pow(n as u32);
    let mut best = f64::INFINITY;
    let mut z = vec![0i64; n];
    for idx in 0..total {
        let mut rem = idx;
        for zk in z.iter_mut() {
            *zk = (rem % width) as i64 - reach;
            rem /= width;
        }
        let mut d2 = 0.0;
        for i in 0..n {
            let mut x = 0.0;
            for j in 0..n {
                x += b[(i, j)] * (u[j] - z[j] as f64);
            }
            d2 += x * x;
        }
        best = best.min(d2);
    }
    best.sqrt()
}

fn covering_radius_grid(b: &RMat, resolution: usize) -> f64 {
    let n = b.nrows();
    // keep the grid at a few million points in higher dimension
    let res = resolution.min((2.0e6_f64.powf(1.0 / n as f64)) as usize).max(2);
    let total = res.pow(n as u32);
    let mut best = 0.0;
    let mut best_u = vec![0.0; n];
    let mut u = vec![0.0; n];
    for idx in 0..total {
        let mut rem = idx;
        for uk in u.iter_mut() {
            *uk = (rem % res) as f64 / res as f64;
            rem /= res;
        }
        let d = lattice_distance(b, &u);
        if d > best {
            best = d;
            best_u.clone_from(&u);
        }
    }
    // zoom around the best grid point
    let mut step = 1.0 / res as f64;
    for _ in 0..24 {
        let center = best_u.clone();
        let sub = 9usize;
        let total = sub.pow(n as u32);
        for idx in 0..total {
            let mut rem = idx;
            for (k, uk) in u.iter_mut().enumerate() {
                let off = (rem % sub) as f64 / (sub - 1) as f64 - 0.5;
                *uk = center[k] + 2.0 * off * step;
                rem /= sub;
            }
            let d = lattice_distance(b, &u);
            if d > best {
                best = d;
                best_u.clone_from(&u);
            }
        }
        step /= 4.0;
    }
    best
}

/// How the base-loop holonomy acts on the module.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LiftSpec {
    Identity,
    /// `exp(angle · σ^{ab})` with module indices (index 0 is the base direction).
    Rotation { a: usize, b: usize, angle: f64 },
    #[serde(skip)]
    Explicit(CMat),
}

impl LiftSpec {
    pub fn resolve(&self, cm: &CliffordModule) -> Result<CMat> {
        match self {
            LiftSpec::Identity => Ok(identity(cm.dim_v)),
            LiftSpec::Rotation { a, b, angle } => cm.rotation_lift(*a, *b, *angle),
            LiftSpec::Explicit(m) => {
                if m.nrows() != cm.dim_v || m.ncols() != cm.dim_v {
                    return Err(Error::DimensionMismatch(format!(
                        "holonomy lift is {}x{}, module dimension {}",
                        m.nrows(),
                        m.ncols(),
                        cm.dim_v
                    )));
                }
                Ok(m.clone())
            }
        }
    }
}

/// Maximal order accepted for the fiber holonomy `φ`.
pub const HOLONOMY_ORDER_CAP: usize = 24;

/// Mapping torus `(R × Z) / ((θ, u) ~ (θ + L, φu))` of a flat torus `Z` over a
/// circle of length `L`, with horizontal field `∂_θ + A·∂_u`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffineMappingTorus {
    /// Fiber at scale 1.
    pub fiber: FlatTorusModel,
    /// `φ ∈ GL(m, Z)` acting on lattice coordinates, given by rows.
    pub holonomy: Vec<Vec<i64>>,
    pub lift: LiftSpec,
    pub base_length: f64,
    /// `0` or `½`: extra sign `(-1)^{2δ_B}` around the base circle.
    #[serde(default)]
    pub base_spin_shift: f64,
    /// Constant connection vector `A` in lattice coordinates; must satisfy `φA = A`.
    pub connection: Vec<f64>,
    pub fiber_scale: f64,
}

impl AffineMappingTorus {
    /// Product-like bundle `S¹_L × Z` with trivial holonomy and connection.
    pub fn product(fiber: FlatTorusModel, base_length: f64, fiber_scale: f64) -> Result<Self> {
        let m = fiber.dim();
        let model = Self {
            holonomy: (0..m)
                .map(|i| (0..m).map(|j| i64::from(i == j)).collect())
                .collect(),
            fiber,
            lift: LiftSpec::Identity,
            base_length,
            base_spin_shift: 0.0,
            connection: vec![0.0; m],
            fiber_scale,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber.dim()
    }

    /// Total dimension `1 + dim Z`.
    pub fn dim(&self) -> usize {
        1 + self.fiber.dim()
    }

    pub fn with_scale(&self, eps: f64) -> Self {
        let mut out = self.clone();
        out.fiber_scale = eps;
        out
    }

    pub fn holonomy_matrix(&self) -> RMat {
        let m = self.fiber_dim();
        RMat::from_fn(m, m, |i, j| self.holonomy[i][j] as f64)
    }

    /// Order of `φ`.
    pub fn holonomy_order(&self) -> Result<usize> {
        let phi = self.holonomy_matrix();
        let id = RMat::identity(phi.nrows(), phi.ncols());
        let mut power = phi.clone();
        for k in 1..=HOLONOMY_ORDER_CAP {
            if (&power - &id).abs().max() < 1e-12 {
                return Ok(k);
            }
            power = &power * &phi;
        }
        Err(Error::InvalidModel(format!(
            "holonomy has order above {HOLONOMY_ORDER_CAP}"
        )))
    }

    /// Orthogonal map `R = B φ B^{-1}` induced on physical fiber vectors.
    pub fn fiber_rotation(&self) -> RMat {
        let b = self.fiber.lattice_matrix();
        &b * self.holonomy_matrix() * b.try_inverse().expect("validated lattice")
    }

    pub fn validate(&self) -> Result<()> {
        self.fiber.validate()?;
        let m = self.fiber_dim();
        if self.holonomy.len() != m || self.holonomy.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidModel(format!("holonomy must be {m}x{m}")));
        }
        if self.connection.len() != m {
            return Err(Error::InvalidModel(format!("connection must have length {m}")));
        }
        if !(self.base_length > 0.0) || !(self.fiber_scale > 0.0) {
            return Err(Error::InvalidModel(
                "base length and fiber scale must be positive".into(),
            ));
        }
        check_shift(&[self.base_spin_shift], "base")?;
        let phi = self.holonomy_matrix();
        if (phi.determinant().abs() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidModel("holonomy is not in GL(m, Z)".into()));
        }
        let g = self.fiber.gram();
        let defect = (phi.transpose() * &g * &phi - &g).abs().max();
        if defect > 1e-12 * g.abs().max().max(1.0) {
            return Err(Error::InvalidModel(format!(
                "holonomy does not preserve the fiber metric (defect {defect:.3e})"
            )));
        }
        if phi.determinant() < 0.0 {
            return Err(Error::InvalidModel("holonomy reverses fiber orientation".into()));
        }
        self.holonomy_order()?;
        let a = nalgebra::DVector::from_vec(self.connection.clone());
        if (&phi * &a - &a).abs().max() > 1e-12 {
            return Err(Error::InvalidModel("connection is not holonomy invariant".into()));
        }
        let delta = nalgebra::DVector::from_vec(self.fiber.spin_shift.clone());
        let moved = phi.transpose() * &delta - &delta;
        if moved.iter().any(|x| (x - x.round()).abs() > 1e-12) {
            return Err(Error::InvalidModel(
                "fiber spin structure is not holonomy invariant".into(),
            ));
        }
        Ok(())
    }

    /// Resolves the lift on `cm` and checks `U γ(v) U^{-1} = γ(Rv)` on the fiber
    /// and `[U, γ^0] = 0`.
    pub fn resolve_lift(&self, cm: &CliffordModule) -> Result<CMat> {
        if cm.n != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "module dimension {} but bundle dimension {}",
                cm.n,
                self.dim()
            )));
        }
        let u = self.lift.resolve(cm)?;
        let res = crate::linalg::unitary_residual(&u);
        if res > 1e-10 {
            return Err(Error::NotUnitary(res));
        }
        let r = self.fiber_rotation();
        let m = self.fiber_dim();
        let uinv = u.adjoint();
        let mut worst = max_abs_diff(&(&u * &cm.gammas[0]), &(&cm.gammas[0] * &u));
        for i in 0..m {
            let lhs = &u * &cm.gammas[1 + i] * &uinv;
            let mut rhs = CMat::zeros(cm.dim_v, cm.dim_v);
            for k in 0..m {
                rhs += cm.gammas[1 + k].scale(r[(k, i)]);
            }
            worst = worst.max(max_abs_diff(&lhs, &rhs));
        }
        if worst > 1e-9 {
            return Err(Error::InvalidModel(format!(
                "holonomy lift is not equivariant over the fiber rotation (residual {worst:.3e})"
            )));
        }
        Ok(u)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BundleModel {
    FlatTorus(FlatTorusModel),
    MappingTorus(AffineMappingTorus),
}

/// Connection coefficients and curvature norms in the adapted orthonormal frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometricData {
    pub n: usize,
    /// `omega[a][b][j] = ω_{abj}`.
    pub omega: Vec<Vec<Vec<f64>>>,
    pub norm_r: f64,
    pub norm_pi: f64,
    pub norm_t: f64,
    pub diam_z: f64,
    /// False when the model cannot carry horizontal curvature (one-dimensional
    /// base); `norm_t` is then reported as zero.
    pub t_supported: bool,
}

fn zero_omega(n: usize) -> Vec<Vec<Vec<f64>>> {
    vec![vec![vec![0.0; n]; n]; n]
}

pub fn geometric_data(model: &BundleModel) -> GeometricData {
    match model {
        BundleModel::FlatTorus(t) => GeometricData {
            n: t.dim(),
            omega: zero_omega(t.dim()),
            norm_r: 0.0,
            norm_pi: 0.0,
            norm_t: 0.0,
            diam_z: t.diameter(),
            t_supported: false,
        },
        // Constant horizontal field on a flat fiber: the adapted frame has
        // vanishing brackets, so every ω_{abj} vanishes.
        BundleModel::MappingTorus(m) => GeometricData {
            n: m.dim(),
            omega: zero_omega(m.dim()),
            norm_r: 0.0,
            norm_pi: 0.0,
            norm_t: 0.0,
            diam_z: m.fiber_scale * m.fiber.diameter(),
            t_supported: false,
        },
    }
}

/// Constants of the spectral window `W = (A diam^{-2} - C(‖R‖ + ‖Π‖² + ‖T‖²))^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConstants {
    pub a: f64,
    pub c: f64,
}

impl Default for WindowConstants {
    fn default() -> Self {
        Self {
            a: std::f64::consts::PI * std::f64::consts::PI,
            c: 10.0,
        }
    }
}

impl WindowConstants {
    pub fn window(&self, g: &GeometricData) -> f64 {
        let w2 = self.a / (g.diam_z * g.diam_z)
            - self.c * (g.norm_r + g.norm_pi * g.norm_pi + g.norm_t * g.norm_t);
        w2.max(0.0).sqrt()
    }
}

/// One-parameter family of flat metrics, given by Gram matrices in lattice coordinates.
pub trait MetricFamily: Send + Sync {
    fn dim(&self) -> usize;
    fn gram(&self, t: f64) -> RMat;
    /// `ċ(t)`; central differences unless a family knows better.
    fn gram_dot(&self, t: f64) -> RMat {
        let h = 1e-5;
        (self.gram(t + h) - self.gram(t - h)) / (2.0 * h)
    }
}

#[derive(Debug, Clone)]
pub struct ConstantFamily(pub RMat);

impl MetricFamily for ConstantFamily {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn gram(&self, _t: f64) -> RMat {
        self.0.clone()
    }
    fn gram_dot(&self, _t: f64) -> RMat {
        RMat::zeros(self.0.nrows(), self.0.ncols())
    }
}

/// `c(t) = e^{rate·t} G₀`.
#[derive(Debug, Clone)]
pub struct ConformalFamily {
    pub base: RMat,
    pub rate: f64,
}

impl MetricFamily for ConformalFamily {
    fn dim(&self) -> usize {
        self.base.nrows()
    }
    fn gram(&self, t: f64) -> RMat {
        &self.base * (self.rate * t).exp()
    }
    fn gram_dot(&self, t: f64) -> RMat {
        &self.base * (self.rate * (self.rate * t).exp())
    }
}

/// `c(t) = (1-t) G₀ + t G₁`.
#[derive(Debug, Clone)]
pub struct LinearFamily {
    pub start: RMat,
    pub end: RMat,
}

impl MetricFamily for LinearFamily {
    fn dim(&self) -> usize {
        self.start.nrows()
    }
    fn gram(&self, t: f64) -> RMat {
        &self.start * (1.0 - t) + &self.end * t
    }
    fn gram_dot(&self, _t: f64) -> RMat {
        &self.end - &self.start
    }
}

/// `c(t) = P(t)ᵀ P(t)` with `P(t) = Σ_k t^k P_k`, an analytic family of lattice bases.
#[derive(Debug, Clone)]
pub struct PolynomialFrameFamily {
    pub coefficients: Vec<RMat>,
}

impl PolynomialFrameFamily {
    pub fn frame(&self, t: f64) -> RMat {
        let mut acc = RMat::zeros(self.dim(), self.dim());
        for p in self.coefficients.iter().rev() {
            acc = acc * t + p;
        }
        acc
    }

    fn frame_dot(&self, t: f64) -> RMat {
        let mut acc = RMat::zeros(self.dim(), self.dim());
        for (k, p) in self.coefficients.iter().enumerate().skip(1).rev() {
            acc = acc * t + p * (k as f64);
        }
        acc
    }
}

impl MetricFamily for PolynomialFrameFamily {
    fn dim(&self) -> usize {
        self.coefficients[0].nrows()
    }
    fn gram(&self, t: f64) -> RMat {
        let p = self.frame(t);
        p.transpose() * p
    }
    fn gram_dot(&self, t: f64) -> RMat {
        let p = self.frame(t);
        let pd = self.frame_dot(t);
        pd.transpose() * &p + p.transpose() * pd
    }
}

/// Restriction of a family to `[t0, t1]`, reparametrized over `[0, 1]`.
pub struct Segment<'a> {
    pub family: &'a dyn MetricFamily,
    pub t0: f64,
    pub t1: f64,
}

impl MetricFamily for Segment<'_> {
    fn dim(&self) -> usize {
        self.family.dim()
    }
    fn gram(&self, s: f64) -> RMat {
        self.family.gram(self.t0 + s * (self.t1 - self.t0))
    }
    fn gram_dot(&self, s: f64) -> RMat {
        self.family.gram_dot(self.t0 + s * (self.t1 - self.t0)) * (self.t1 - self.t0)
    }
}

/// `‖ċ(t)‖_{c(t)}`: the largest `|eigenvalue|` of `c^{-1} ċ`.
pub fn metric_speed(gram: &RMat, gram_dot: &RMat, t: f64) -> Result<f64> {
    let (_, inv_sqrt) = spd_sqrt_pair(gram).ok_or(Error::NotPositiveDefinite(t))?;
    let sym = &inv_sqrt * gram_dot * &inv_sqrt;
    let eig = nalgebra::SymmetricEigen::new((&sym + sym.transpose()) * 0.5);
    Ok(eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs())))
}

fn quadrature_weights(samples: usize) -> Vec<f64> {
    let intervals = samples - 1;
    let h = 1.0 / intervals as f64;
    let mut w = vec![0.0; samples];
    if intervals == 1 {
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    // composite Simpson; an odd interval count closes with the 3/8 rule
    let simpson_end = if intervals.is_multiple_of(2) { intervals } else { intervals - 3 };
    for k in (0..simpson_end).step_by(2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if simpson_end < intervals {
        let k = simpson_end;
        for (off, coef) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
            w[k + off] += 3.0 * h / 8.0 * coef;
        }
    }
    w
}

/// Length `l(c) = ∫₀¹ ‖ċ(t)‖_{c(t)} dt`, with `ċ` by central differences.
pub fn metric_path(family: &dyn MetricFamily, samples: usize) -> Result<f64> {
    if samples < 2 {
        return Err(Error::InvalidArgument("metric_path needs at least 2 samples".into()));
    }
    let weights = quadrature_weights(samples);
    let h = 1e-6;
    let mut total = 0.0;
    for (k, w) in weights.iter().enumerate() {
        let t = k as f64 / (samples - 1) as f64;
        let dot = (family.gram(t + h) - family.gram(t - h)) / (2.0 * h);
        total += w * metric_speed(&family.gram(t), &dot, t)?;
    }
    Ok(total)
}
