//! Convergence, heat, smoothing and space-time studies, and the identity
//! verification suite. These back the command-line tool.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alt_ops::{Clement, L2Projection};
use crate::dualbasis::{dual_basis, verify_dual_basis, DualBasisTable, MAX_DEGREE, MAX_DIM};
use crate::functional::DualFunctional;
use crate::linalg::SparseCholesky;
use crate::mesh::{h1_error, l2_error, lagrange_space, DofSet, FEFunction, LagrangeSpace, MeshFile, SimplicialMesh};
use crate::negnorm::{NegNormSolver, DEFAULT_ENRICHMENT};
use crate::polyref::binomial;
use crate::sz_ops::{GlobalDualBasis, Projections};
use crate::timespace::{
    apply_pi_tensor, apply_pi_x, gauss_points_per_interval, tensor_eval, AvgTaylor, TensorFunction, TimeGrid, TimeMesh,
};
use crate::{Error, Result};

/// Seed of every random probe.
pub const SEED: u64 = 0x5eed_2024;

/// Quadrature order for errors against smooth data.
const ERR_ORDER_EXTRA: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operator {
    Pi0,
    Pi,
    Pi0star,
    Pi2,
    Clement,
    PiTensor,
}

impl FromStr for Operator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "pi0" => Operator::Pi0,
            "pi" => Operator::Pi,
            "pi0star" => Operator::Pi0star,
            "pi2" => Operator::Pi2,
            "clement" => Operator::Clement,
            "pitensor" => Operator::PiTensor,
            _ => return Err(Error::Unsupported(format!("unknown operator {s:?}"))),
        })
    }
}

/// Named input data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// `Π sin(π x_c)`, zero trace
    Sin,
    /// `(1+x)e^x (·cos y)`, non-zero trace
    Smooth,
    /// `−div F` with `F = sign(x − ½)·e₁`
    Flux,
    /// point mass at `x = 1/3` (d = 1)
    Dirac,
    /// identically zero
    Zero,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
            .map_err(|_| Error::Unsupported(format!("unknown preset {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L2,
    H1,
    Wm1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Refinement {
    /// halve time and space steps together
    Both,
    /// refine space only, time mesh fixed
    Space,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub op: Operator,
    pub d: usize,
    pub k: usize,
    pub levels: usize,
    pub preset: Preset,
    pub norms: Vec<Norm>,
    /// extra refinements of the dual-norm evaluation mesh; per-dimension
    /// default when absent
    pub enrichment: Option<usize>,
    pub mesh: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// time degree of the space-time study
    pub k_t: usize,
    pub refine: Refinement,
    /// final time of the heat study
    pub final_time: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            op: Operator::Pi0,
            d: 1,
            k: 1,
            levels: 6,
            preset: Preset::Sin,
            norms: vec![Norm::L2, Norm::H1, Norm::Wm1],
            enrichment: None,
            mesh: None,
            out: None,
            k_t: 1,
            refine: Refinement::Both,
            final_time: 0.1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.d) {
            return Err(Error::Unsupported(format!("d = {} (supported: 1, 2)", self.d)));
        }
        if !(1..=MAX_DEGREE).contains(&self.k) || !(1..=MAX_DEGREE).contains(&self.k_t) {
            return Err(Error::Unsupported(format!("k = {}, k_t = {} (supported: 1..=3)", self.k, self.k_t)));
        }
        let max_levels = if self.d == 1 { 7 } else { 5 };
        if self.levels == 0 || self.levels > max_levels {
            return Err(Error::Unsupported(format!(
                "levels = {} (supported for d = {}: 1..={max_levels})",
                self.levels, self.d
            )));
        }
        Ok(())
    }

    pub fn enrichment(&self) -> usize {
        self.enrichment.unwrap_or(default_enrichment(self.d))
    }

    fn records(&self, n: Norm) -> bool {
        self.norms.contains(&n)
    }

    /// Level-1 mesh: `--mesh` if given, else 4 intervals or the 4×4 square.
    pub fn base_mesh(&self) -> Result<SimplicialMesh<f64>> {
        match &self.mesh {
            Some(p) => {
                let m = SimplicialMesh::read_json(p)?;
                if m.dim() != self.d {
                    return Err(Error::DimensionMismatch(format!("mesh has d = {}, config d = {}", m.dim(), self.d)));
                }
                Ok(m)
            }
            None => Ok(base_mesh(self.d)),
        }
    }
}

/// 4 intervals of `(0,1)` or the 4×4 square of `(0,1)²`.
pub fn base_mesh(d: usize) -> SimplicialMesh<f64> {
    if d == 1 {
        SimplicialMesh::interval(4)
    } else {
        SimplicialMesh::square(4)
    }
}

/// Extra refinements for dual norms: two in 1D, one in 2D.
pub fn default_enrichment(d: usize) -> usize {
    if d == 1 {
        DEFAULT_ENRICHMENT
    } else {
        1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub level: usize,
    pub h: f64,
    #[serde(rename = "err_L2")]
    pub err_l2: Option<f64>,
    #[serde(rename = "rate_L2")]
    pub rate_l2: Option<f64>,
    #[serde(rename = "err_H1")]
    pub err_h1: Option<f64>,
    #[serde(rename = "rate_H1")]
    pub rate_h1: Option<f64>,
    #[serde(rename = "err_Wm1")]
    pub err_wm1: Option<f64>,
    #[serde(rename = "rate_Wm1")]
    pub rate_wm1: Option<f64>,
}

/// Errors per level with observed rates `log₂(e_{ℓ−1}/e_ℓ)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: Vec<RateRow>,
}

fn rate(prev: Option<f64>, cur: Option<f64>, h_prev: f64, h: f64) -> Option<f64> {
    match (prev, cur) {
        (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).ln() / (h_prev / h).ln()),
        _ => None,
    }
}

impl RateTable {
    /// Appends a level; errors are `[L², H¹, W^{-1,2}]`.
    pub fn push(&mut self, h: f64, errs: [Option<f64>; 3]) {
        let level = self.rows.len() + 1;
        let (r0, r1, r2) = match self.rows.last() {
            Some(p) => (
                rate(p.err_l2, errs[0], p.h, h),
                rate(p.err_h1, errs[1], p.h, h),
                rate(p.err_wm1, errs[2], p.h, h),
            ),
            None => (None, None, None),
        };
        self.rows.push(RateRow {
            level,
            h,
            err_l2: errs[0],
            rate_l2: r0,
            err_h1: errs[1],
            rate_h1: r1,
            err_wm1: errs[2],
            rate_wm1: r2,
        });
    }

    /// Rates of the last level, `[L², H¹, W^{-1,2}]`.
    pub fn final_rates(&self) -> [Option<f64>; 3] {
        self.rows
            .last()
            .map_or([None; 3], |r| [r.rate_l2, r.rate_h1, r.rate_wm1])
    }

    pub fn final_errors(&self) -> [Option<f64>; 3] {
        self.rows
            .last()
            .map_or([None; 3], |r| [r.err_l2, r.err_h1, r.err_wm1])
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        let mut s = String::from_utf8(bytes).expect("csv output is UTF-8");
        if self.rows.is_empty() {
            s = "level,h,err_L2,rate_L2,err_H1,rate_H1,err_Wm1,rate_Wm1\n".into();
        }
        Ok(s)
    }
}

type Field = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type Grad = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Value and gradient of a smooth preset.
pub fn preset_field(preset: Preset, d: usize) -> Result<(Field, Grad)> {
    use std::f64::consts::PI;
    Ok(match preset {
        Preset::Sin => (
            Arc::new(move |x: &[f64]| x.iter().take(d).map(|&c| (PI * c).sin()).product()),
            Arc::new(move |x: &[f64]| {
                (0..d)
                    .map(|c| {
                        (0..d)
                            .map(|e| if e == c { PI * (PI * x[e]).cos() } else { (PI * x[e]).sin() })
                            .product()
                    })
                    .collect()
            }),
        ),
        Preset::Smooth => {
            if d == 1 {
                (
                    Arc::new(|x: &[f64]| (1.0 + x[0]) * x[0].exp()),
                    Arc::new(|x: &[f64]| vec![(2.0 + x[0]) * x[0].exp()]),
                )
            } else {
                (
                    Arc::new(|x: &[f64]| (1.0 + x[0]) * x[0].exp() * x[1].cos()),
                    Arc::new(|x: &[f64]| {
                        vec![
                            (2.0 + x[0]) * x[0].exp() * x[1].cos(),
                            -(1.0 + x[0]) * x[0].exp() * x[1].sin(),
                        ]
                    }),
                )
            }
        }
        Preset::Zero => (Arc::new(|_: &[f64]| 0.0), Arc::new(move |_: &[f64]| vec![0.0; d])),
        Preset::Flux | Preset::Dirac => {
            return Err(Error::Unsupported(format!("{preset:?} is not a smooth field")))
        }
    })
}

/// The functional `ξ` of a preset.
pub fn preset_functional(preset: Preset, d: usize) -> Result<DualFunctional<f64>> {
    Ok(match preset {
        Preset::Flux => DualFunctional::flux(move |x: &[f64]| {
            let mut f = vec![0.0; d];
            f[0] = if x[0] < 0.5 { -1.0 } else { 1.0 };
            f
        }),
        Preset::Dirac => {
            if d != 1 {
                return Err(Error::Unsupported(
                    "point masses are W^{-1,2} functionals only in one dimension".into(),
                ));
            }
            DualFunctional::atom(vec![1.0 / 3.0], 1.0)
        }
        _ => {
            let (f, _) = preset_field(preset, d)?;
            DualFunctional::density(move |x: &[f64]| f(x))
        }
    })
}

enum Applied {
    Quasi(Projections<f64>, Operator),
    Pi2(L2Projection<f64>),
    Clement(Clement<f64>),
}

impl Applied {
    fn new(op: Operator, space: &Arc<LagrangeSpace<f64>>) -> Result<Self> {
        Ok(match op {
            Operator::Pi2 => Applied::Pi2(L2Projection::new(space)?),
            Operator::Clement => Applied::Clement(Clement::new(space)?),
            Operator::PiTensor => return Err(Error::Unsupported("the tensor operator runs in the space-time study".into())),
            _ => Applied::Quasi(Projections::new(space)?, op),
        })
    }

    fn apply(&self, xi: &DualFunctional<f64>) -> Result<FEFunction<f64>> {
        match self {
            Applied::Quasi(p, Operator::Pi0) => p.apply_pi0(xi),
            Applied::Quasi(p, Operator::Pi) => p.apply_pi(xi),
            Applied::Quasi(p, Operator::Pi0star) => p.apply_pi0_star(xi),
            Applied::Quasi(..) => unreachable!("operator checked at construction"),
            Applied::Pi2(p) => p.apply(xi),
            Applied::Clement(c) => c.apply(xi),
        }
    }
}

fn level_meshes(cfg: &ExperimentConfig) -> Result<Vec<Arc<SimplicialMesh<f64>>>> {
    let base = cfg.base_mesh()?;
    let mut out = vec![Arc::new(base)];
    for _ in 1..cfg.levels {
        let next = out.last().expect("non-empty").uniform_refine();
        out.push(Arc::new(next));
    }
    Ok(out)
}

fn collect_table(rows: Vec<(f64, [Option<f64>; 3])>) -> RateTable {
    let mut t = RateTable::default();
    for (h, e) in rows {
        t.push(h, e);
    }
    t
}

/// Applies the operator to the preset on every level and records the errors.
pub fn cmd_converge(cfg: &ExperimentConfig) -> Result<RateTable> {
    cfg.validate()?;
    if cfg.op == Operator::PiTensor {
        return cmd_spacetime(cfg);
    }
    let (w, grad) = preset_field(cfg.preset, cfg.d)?;
    let meshes = level_meshes(cfg)?;
    let r = cfg.enrichment();
    let rows: Result<Vec<_>> = meshes
        .par_iter()
        .map(|mesh| {
            let space = lagrange_space(mesh, cfg.k)?;
            let op = Applied::new(cfg.op, &space)?;
            let wf = w.clone();
            let xi = DualFunctional::density(move |x: &[f64]| wf(x));
            let fh = op.apply(&xi)?;
            let deg = fh.space().degree();
            let order = 2 * deg + ERR_ORDER_EXTRA;
            let e_l2 = cfg.records(Norm::L2).then(|| l2_error(&fh, order, |x| w(x)));
            let e_h1 = cfg.records(Norm::H1).then(|| h1_error(&fh, order, |x| grad(x)));
            let e_wm1 = if cfg.records(Norm::Wm1) {
                let solver = NegNormSolver::new(mesh, deg, r)?;
                Some(solver.norm(&xi.clone().minus_discrete(fh.clone()))?)
            } else {
                None
            };
            Ok((mesh.max_diameter(), [e_l2, e_h1, e_wm1]))
        })
        .collect();
    Ok(collect_table(rows?))
}

/// `‖ξ − Πξ‖_{W^{-1,2}}` per level for rough or smooth data.
pub fn cmd_smooth(cfg: &ExperimentConfig) -> Result<RateTable> {
    cfg.validate()?;
    let op = match cfg.op {
        Operator::Pi0 | Operator::Pi => cfg.op,
        _ => Operator::Pi,
    };
    let xi = preset_functional(cfg.preset, cfg.d)?;
    let meshes = level_meshes(cfg)?;
    let r = cfg.enrichment();
    let rows: Result<Vec<_>> = meshes
        .par_iter()
        .map(|mesh| {
            let space = lagrange_space(mesh, cfg.k)?;
            let fh = Applied::new(op, &space)?.apply(&xi)?;
            let solver = NegNormSolver::new(mesh, cfg.k, r)?;
            let e = solver.norm(&xi.clone().minus_discrete(fh))?;
            Ok((mesh.max_diameter(), [None, None, Some(e)]))
        })
        .collect();
    Ok(collect_table(rows?))
}

/// Semi-discrete heat equation on `(0,1)` with `u = sin(πx)e^{−π²t}`:
/// `Π₂` initial data, Crank–Nicolson with `Δt ≈ h^{k+1}`. Records
/// `‖u − u_h‖_{L²(J;L²)}` and `‖∂_x(u − u_h)‖_{L²(J;L²)}`.
pub fn cmd_heat(cfg: &ExperimentConfig) -> Result<RateTable> {
    use std::f64::consts::PI;
    cfg.validate()?;
    if cfg.d != 1 {
        return Err(Error::Unsupported("the heat study is one-dimensional".into()));
    }
    let amp = match cfg.preset {
        Preset::Zero => 0.0,
        _ => 1.0,
    };
    let t_end = cfg.final_time;
    let meshes = level_meshes(cfg)?;
    let rows: Result<Vec<_>> = meshes
        .par_iter()
        .map(|mesh| {
            let k = cfg.k;
            let space = lagrange_space(mesh, k)?;
            let h = mesh.max_diameter();
            // the error integral is sampled every `stride` steps
            let samples = 64 * mesh.num_simplices();
            let fine_steps = (t_end / h.powi(k as i32 + 1)).ceil().max(1.0) as usize;
            let stride = fine_steps.div_ceil(samples);
            let steps = stride * fine_steps.div_ceil(stride);
            let dt = t_end / steps as f64;
            let mass = space.mass_matrix(DofSet::Interior);
            let stiff = space.stiffness_matrix(DofSet::Interior);
            let lhs = SparseCholesky::factor(&mass.add_scaled(0.5 * dt, &stiff))?;
            let rhs_op = mass.add_scaled(-0.5 * dt, &stiff);
            let u0 = L2Projection::new(&space)?.apply(&DualFunctional::density(move |x: &[f64]| amp * (PI * x[0]).sin()))?;
            let mut u = u0.interior_values();
            let order = 2 * k + ERR_ORDER_EXTRA;
            let errs = |u: &[f64], t: f64| {
                let f = FEFunction::from_interior(&space, u);
                let decay = amp * (-PI * PI * t).exp();
                let e0 = l2_error(&f, order, |x| decay * (PI * x[0]).sin());
                let e1 = h1_error(&f, order, |x| vec![decay * PI * (PI * x[0]).cos()]);
                (e0 * e0, e1 * e1)
            };
            let (a0, a1) = errs(&u, 0.0);
            let (mut s0, mut s1) = (0.5 * a0, 0.5 * a1);
            for n in 1..=steps {
                u = lhs.solve(&rhs_op.matvec(&u));
                if n % stride == 0 {
                    let (b0, b1) = errs(&u, n as f64 * dt);
                    let w = if n == steps { 0.5 } else { 1.0 };
                    s0 += w * b0;
                    s1 += w * b1;
                }
            }
            let ds = dt * stride as f64;
            Ok((h, [Some((s0 * ds).sqrt()), Some((s1 * ds).sqrt()), None]))
        })
        .collect();
    Ok(collect_table(rows?))
}

/// `Π_⊗` on `v = e^{−t} sin(πx)` over `J = (0,1)`, `Ω = (0,1)`.
pub fn cmd_spacetime(cfg: &ExperimentConfig) -> Result<RateTable> {
    use std::f64::consts::PI;
    cfg.validate()?;
    if cfg.d != 1 {
        return Err(Error::Unsupported("the space-time study uses one space dimension".into()));
    }
    let meshes = level_meshes(cfg)?;
    let base_intervals = meshes[0].num_simplices();
    let r = cfg.enrichment();
    let v = |t: f64, x: &[f64]| (-t).exp() * (PI * x[0]).sin();
    let rows: Result<Vec<_>> = meshes
        .par_iter()
        .enumerate()
        .map(|(l, mesh)| {
            let nt = match cfg.refine {
                Refinement::Both => base_intervals << l,
                Refinement::Space => base_intervals,
            };
            let tm = TimeMesh::uniform(1.0, nt, cfg.k_t)?;
            let px = Projections::new(&lagrange_space(mesh, cfg.k)?)?;
            let sample_space = lagrange_space(mesh, cfg.k + 2)?;
            let grid = Arc::new(TimeGrid::gauss(tm.mesh(), gauss_points_per_interval(cfg.k_t)));
            let vs = TensorFunction::sample(&grid, &sample_space, v);
            let c = apply_pi_tensor(&vs, &tm, &px)?;
            let pv = tensor_eval(&c, &tm, px.space(), &grid)?;
            let order = 2 * cfg.k + ERR_ORDER_EXTRA;
            let e_l2 = cfg.records(Norm::L2).then(|| pv.l2l2_error(order, v));
            let e_h1 = cfg
                .records(Norm::H1)
                .then(|| pv.l2h1_error(order, |t, x| vec![(-t).exp() * PI * (PI * x[0]).cos()]));
            let e_wm1 = if cfg.records(Norm::Wm1) {
                let solver = NegNormSolver::new(mesh, cfg.k, r)?;
                let parts: Result<Vec<f64>> = pv
                    .samples
                    .par_iter()
                    .zip(&grid.times)
                    .zip(&grid.weights)
                    .map(|((s, &t), &w)| {
                        let xi = DualFunctional::density(move |x: &[f64]| v(t, x)).minus_discrete(s.clone());
                        let e = solver.norm(&xi)?;
                        Ok(w * e * e)
                    })
                    .collect();
                Some(parts?.into_iter().sum::<f64>().sqrt())
            } else {
                None
            };
            Ok((mesh.max_diameter(), [e_l2, e_h1, e_wm1]))
        })
        .collect();
    Ok(collect_table(rows?))
}

/// One line of the verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub identity: String,
    pub d: usize,
    pub k: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn add(&mut self, identity: &str, d: usize, k: usize, residual: f64, tolerance: f64) {
        let pass = residual.is_finite() && residual <= tolerance;
        self.checks.push(Check {
            identity: identity.into(),
            d,
            k,
            residual,
            tolerance,
            pass,
        });
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Clone, Debug, Default)]
pub struct VerifyOptions {
    /// replace the `(d, k)` table by a perturbed copy (negative control)
    pub corrupt: Option<(usize, usize)>,
    /// restrict to these `(d, k)` pairs; all supported pairs when empty
    pub only: Vec<(usize, usize)>,
}

/// Non-uniform 7-interval mesh of `(0,1)` or the 8-triangle square with a
/// shifted centre vertex.
pub fn verification_mesh(d: usize) -> SimplicialMesh<f64> {
    if d == 1 {
        SimplicialMesh::interval_from_points(&[0.0, 0.1, 0.25, 0.3, 0.5, 0.65, 0.8, 1.0]).expect("valid points")
    } else {
        perturbed_square(2)
    }
}

/// `square(n)` with interior vertices shifted by a fixed pattern of up to
/// 15% of the mesh size.
pub fn perturbed_square(n: usize) -> SimplicialMesh<f64> {
    let mut f: MeshFile = SimplicialMesh::<f64>::square(n).to_file();
    let h = 1.0 / n as f64;
    for (i, v) in f.vertices.iter_mut().enumerate() {
        let interior = v.iter().all(|&c| c > 1e-12 && c < 1.0 - 1e-12);
        if interior {
            v[0] += 0.15 * h * (7.0 * i as f64 + 1.0).sin();
            v[1] += 0.15 * h * (5.0 * i as f64 + 2.0).cos();
        }
    }
    SimplicialMesh::from_file(&f).expect("perturbation keeps the mesh valid")
}

/// Deterministic random coefficients in `[−1, 1]`, zero at boundary nodes if
/// `zero_trace`.
pub fn random_fe(space: &Arc<LagrangeSpace<f64>>, rng: &mut ChaCha8Rng, zero_trace: bool) -> FEFunction<f64> {
    let c = (0..space.num_nodes())
        .map(|i| {
            let v: f64 = rng.gen_range(-1.0..1.0);
            if zero_trace && space.is_boundary(i) {
                0.0
            } else {
                v
            }
        })
        .collect();
    FEFunction::from_coeffs(space, c).expect("sized to the space")
}

/// Random point of simplex `t` as barycentric coordinates.
pub fn random_barycentric(d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut cuts: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut lam = Vec::with_capacity(d + 1);
    let mut prev = 0.0;
    for c in cuts {
        lam.push(c - prev);
        prev = c;
    }
    lam.push(1.0 - prev);
    lam
}

fn interior_simplices(mesh: &SimplicialMesh<f64>) -> Vec<usize> {
    (0..mesh.num_simplices()).filter(|&t| !mesh.touches_boundary(t)).collect()
}

/// Max deviation from 1 of `f` on interior simplices, at random points.
fn constant_defect(f: &FEFunction<f64>, rng: &mut ChaCha8Rng) -> f64 {
    let mesh = f.space().mesh();
    let d = mesh.dim();
    let mut worst = 0.0f64;
    for t in interior_simplices(mesh) {
        for _ in 0..10 {
            let lam = random_barycentric(d, rng);
            worst = worst.max((f.eval_local(t, &lam) - 1.0).abs());
        }
    }
    worst
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

fn verify_weights(report: &mut VerifyReport, table: Arc<DualBasisTable<f64>>, rng: &mut ChaCha8Rng) -> Result<()> {
    let (d, k) = (table.d, table.k);
    let mesh = Arc::new(verification_mesh(d));
    let space = lagrange_space(&mesh, k)?;
    let ops = Projections::from_raw(GlobalDualBasis::with_table(&space, table)?)?;
    let n = space.num_nodes();
    let basis: Vec<FEFunction<f64>> = (0..n).map(|i| FEFunction::basis(&space, i)).collect();
    let (mut raw, mut cor) = (0.0f64, 0.0f64);
    for i in 0..n {
        for (l, b) in basis.iter().enumerate() {
            let e = if i == l { 1.0 } else { 0.0 };
            raw = raw.max((ops.raw().weight(i).inner_fe(&mesh, b) - e).abs());
            cor = cor.max((ops.corrected().weight(i).inner_fe(&mesh, b) - e).abs());
        }
    }
    report.add("global_biorthogonality", d, k, raw, 1e-10);
    report.add("corrected_biorthogonality", d, k, cor, 1e-9);
    // Σ ⟨1,b_i⟩ ψ_i ≡ 1 at random points
    let denom = binomial(k + d, d) as f64;
    let mut mass = 0.0f64;
    for _ in 0..200 {
        let t = rng.gen_range(0..mesh.num_simplices());
        let lam = random_barycentric(d, rng);
        let s: f64 = space
            .local_nodes(t)
            .iter()
            .map(|&i| space.support_measure(i) / denom * ops.raw().weight(i).eval_local(t, &lam))
            .sum();
        mass = mass.max((s - 1.0).abs());
    }
    report.add("mass_identity", d, k, mass, 1e-10);
    let high = ops.weight_space();
    let mut trace = 0.0f64;
    for w in ops.corrected().weights() {
        for (t, p) in &w.blocks {
            for (&g, &c) in high.local_nodes(*t).iter().zip(p.coeffs()) {
                if high.is_boundary(g) {
                    trace = trace.max(c.abs());
                }
            }
        }
    }
    report.add("corrected_zero_trace", d, k, trace, 1e-12);
    // adjoints on a mesh with interior simplices
    let fine = Arc::new(if d == 1 { mesh.uniform_refine() } else { perturbed_square(4) });
    let fs = lagrange_space(&fine, k)?;
    let fo = Projections::new(&fs)?;
    let one = DualFunctional::density(|_: &[f64]| 1.0);
    report.add("adjoint_constants_pi0_star", d, k, constant_defect(&fo.apply_pi0_star(&one)?, rng), 1e-10);
    report.add("adjoint_constants_pi_star", d, k, constant_defect(&fo.apply_pi_star(&one)?, rng), 1e-10);
    let (mut adj0, mut adj, mut idem, mut idem_pi, mut mass_p) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let v = random_fe(&space, rng, false);
        let w = random_fe(&space, rng, false);
        let dv = DualFunctional::discrete(v.clone());
        let dw = DualFunctional::discrete(w.clone());
        let p0v = ops.apply_pi0(&dv)?;
        let lhs = p0v.inner(&w);
        let rhs = DualFunctional::discrete(v.clone()).pair(&ops.apply_pi0_star(&dw)?, 0)?;
        adj0 = adj0.max(rel(lhs, rhs));
        let lhs = ops.apply_pi(&dv)?.inner(&w);
        let rhs = DualFunctional::discrete(v.clone()).pair(&ops.apply_pi_star(&dw)?, 0)?;
        adj = adj.max(rel(lhs, rhs));
        idem = idem.max(ops.apply_pi0(&DualFunctional::discrete(p0v.clone()))?.max_coeff_diff(&p0v));
        let pv = ops.apply_pi(&dv)?;
        idem_pi = idem_pi.max(ops.apply_pi(&DualFunctional::discrete(pv.clone()))?.max_coeff_diff(&pv));
        mass_p = mass_p.max((ops.apply_p_raw(&dv)?.integral() - v.integral()).abs());
    }
    report.add("adjoint_consistency_pi0", d, k, adj0, 1e-9);
    report.add("adjoint_consistency_pi", d, k, adj, 1e-9);
    report.add("idempotence_pi0", d, k, idem, 1e-10);
    report.add("idempotence_pi", d, k, idem_pi, 1e-10);
    report.add("mass_preservation_p", d, k, mass_p, 1e-10);
    Ok(())
}

fn verify_clement(report: &mut VerifyReport, d: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    let mesh = Arc::new(if d == 1 { verification_mesh(1) } else { perturbed_square(4) });
    let space = lagrange_space(&mesh, k)?;
    let c = Clement::new(&space)?;
    let (mut sa, mut ratio) = (0.0f64, f64::INFINITY);
    for _ in 0..10 {
        let v = random_fe(&space, rng, false);
        let w = random_fe(&space, rng, false);
        let cv = c.apply(&DualFunctional::discrete(v.clone()))?;
        let cw = c.apply(&DualFunctional::discrete(w.clone()))?;
        sa = sa.max(rel(cv.inner(&w), v.inner(&cw)));
    }
    for _ in 0..50 {
        let v = random_fe(&space, rng, true);
        let cv = c.apply(&DualFunctional::discrete(v.clone()))?;
        ratio = ratio.min(cv.inner(&v) / v.inner(&v));
    }
    report.add("clement_self_adjoint", d, k, sa, 1e-10);
    let lower = k as f64 / (2 * k + d) as f64;
    report.add("clement_ellipticity", d, k, (lower - ratio).max(0.0), 0.0);
    if k >= 2 {
        let low = lagrange_space(&mesh, k - 1)?;
        let v = random_fe(&low, rng, true);
        let cv = c.apply(&DualFunctional::discrete(v.clone()))?;
        report.add("clement_identity_lower_degree", d, k, cv.max_coeff_diff(&v.transfer(&space)), 1e-10);
    }
    Ok(())
}

fn verify_tensor(report: &mut VerifyReport, k: usize) -> Result<()> {
    let tm = TimeMesh::uniform(1.0, 3, k)?;
    let xm = Arc::new(SimplicialMesh::interval(4));
    let px = Projections::new(&lagrange_space(&xm, k)?)?;
    let fine = lagrange_space(&xm, k + 2)?;
    let grid = Arc::new(TimeGrid::gauss(tm.mesh(), gauss_points_per_interval(k)));
    let v = TensorFunction::sample(&grid, &fine, |t: f64, x: &[f64]| (1.0 + t).sqrt() * (3.0 * x[0]).sin() + t * x[0]);
    let a = tm.apply(&apply_pi_x(&v, &px)?)?;
    let b = apply_pi_x(&tm.apply(&v)?, &px)?;
    report.add("tensor_commutation", 1, k, a.max_coeff_diff(&b), 1e-9);
    // ∂_t Π_x = Π_x ∂_t on a quadratic-in-time function, central differences
    let g = |t: f64, x: &[f64]| (1.0 + t + 2.0 * t * t) * (2.0 * x[0]).sin();
    let dg = |t: f64, x: &[f64]| (1.0 + 4.0 * t) * (2.0 * x[0]).sin();
    let (t0, h) = (0.4, 1e-3);
    let at = |t: f64| px.apply_pi0(&DualFunctional::discrete(FEFunction::interpolate(&fine, |x| g(t, x))));
    let mut fd = at(t0 + h)?;
    fd.axpy(-1.0, &at(t0 - h)?);
    fd.scale(0.5 / h);
    let exact = px.apply_pi0(&DualFunctional::discrete(FEFunction::interpolate(&fine, |x| dg(t0, x))))?;
    report.add("time_derivative_commutation", 1, k, fd.max_coeff_diff(&exact), 1e-9);
    Ok(())
}

fn verify_taylor(report: &mut VerifyReport) -> Result<()> {
    let mut repro = 0.0f64;
    for s in 0..=MAX_DEGREE {
        let at = AvgTaylor::new(0.2, 1.3, s)?;
        let c = at.apply(|x: f64| x.powi(s as i32));
        for i in 0..=20 {
            let t = 0.2 + 1.1 * i as f64 / 20.0;
            repro = repro.max((at.eval(&c, t) - t.powi(s as i32)).abs());
        }
    }
    report.add("taylor_reproduction", 1, 0, repro, 1e-9);
    let v = |x: f64| (3.0 * x).sin() + x * x;
    let dv = |x: f64| 3.0 * (3.0 * x).cos() + 2.0 * x;
    let mut comm = 0.0f64;
    for s in 1..=MAX_DEGREE {
        let hi = AvgTaylor::new(0.0, 1.0, s)?.apply(v);
        let lo = AvgTaylor::new(0.0, 1.0, s - 1)?.apply(dv);
        for m in 0..s {
            comm = comm.max((hi[m + 1] * (m + 1) as f64 - lo[m]).abs());
        }
    }
    report.add("taylor_commutation", 1, 0, comm, 1e-8);
    Ok(())
}

/// Runs the identity suite over all supported `(d, k)`.
pub fn cmd_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for d in 1..=MAX_DIM {
        for k in 1..=MAX_DEGREE {
            if !opts.only.is_empty() && !opts.only.contains(&(d, k)) {
                continue;
            }
            let mut table = dual_basis::<f64>(d, k)?;
            if opts.corrupt == Some((d, k)) {
                table = Arc::new(table.perturbed(0, 0, 1e-3));
            }
            let r = verify_dual_basis(&table);
            report.add("dual_biorthogonality", d, k, r.biorthogonality, 1e-10);
            report.add("dual_sum_identity", d, k, r.sum_identity, 1e-10);
            report.add("dual_symmetry", d, k, r.symmetry, 1e-12);
            report.add("dual_product_identity", d, k, r.product_identity, 1e-12);
            verify_weights(&mut report, table, &mut rng)?;
            verify_clement(&mut report, d, k, &mut rng)?;
            if d == 1 {
                verify_tensor(&mut report, k)?;
            }
        }
    }
    verify_taylor(&mut report)?;
    report.pass = report.checks.iter().all(|c| c.pass);
    Ok(report)
}

/// The certified table for `(d, k)` with its identity report.
pub fn cmd_dualbasis(d: usize, k: usize) -> Result<serde_json::Value> {
    let table = dual_basis::<f64>(d, k)?;
    let report = verify_dual_basis(&table);
    let mut v = table.to_json();
    v["report"] = serde_json::to_value(&report)?;
    Ok(v)
}
