//! Plane-stress bilinear-quad finite elements with SIMP interpolation and a cone density
//! filter, plus the compliance design problems built on them.
//!
//! Meshes are uniform grids of unit-thickness square elements of width `h`. Grid nodes are
//! numbered column by column (y fastest), which keeps the stiffness band narrow for beams
//! that are longer than they are tall.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::linalg::SkylineMatrix;
use crate::optimizer::Problem;
use crate::probmod::{RandomInput, RandomVariable};
use crate::scalar::Real;

/// SIMP penalization exponent.
pub const PENALTY: i32 = 3;
/// Lower bound on design variables, which keeps the stiffness matrix nonsingular.
pub const DENSITY_MIN: f64 = 1e-3;
pub const POISSON: f64 = 0.3;

/// Structured grid with some cells possibly removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    /// Grid cell `(ix, iy)` of each element, with `iy` counted upwards.
    pub cells: Vec<(usize, usize)>,
    /// Node indices, counter-clockwise from the lower-left corner.
    pub elements: Vec<[usize; 4]>,
    pub nodes: Vec<[f64; 2]>,
    pub fixed_dofs: Vec<usize>,
    /// `(dof, value)` pairs of the unit load; scaled by the load multiplier at solve time.
    pub load: Vec<(usize, f64)>,
}

impl Mesh {
    /// Builds a mesh from the active cells of an `nx × ny` grid. `fix` and `load` receive
    /// the grid coordinates `(ix, iy)` of every used node.
    fn from_cells(
        nx: usize,
        ny: usize,
        active: impl Fn(usize, usize) -> bool,
        fix: impl Fn(usize, usize) -> (bool, bool),
        load: impl Fn(usize, usize) -> Option<(f64, f64)>,
    ) -> Self {
        let grid = |ix: usize, iy: usize| ix * (ny + 1) + iy;
        let mut used = vec![false; (nx + 1) * (ny + 1)];
        let mut cells = Vec::new();
        for ix in 0..nx {
            for iy in 0..ny {
                if active(ix, iy) {
                    cells.push((ix, iy));
                    for (dx, dy) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
                        used[grid(ix + dx, iy + dy)] = true;
                    }
                }
            }
        }
        let mut index = vec![usize::MAX; used.len()];
        let mut nodes = Vec::new();
        let mut fixed_dofs = Vec::new();
        let mut loads = Vec::new();
        for ix in 0..=nx {
            for iy in 0..=ny {
                if !used[grid(ix, iy)] {
                    continue;
                }
                let n = nodes.len();
                index[grid(ix, iy)] = n;
                nodes.push([ix as f64, iy as f64]);
                let (fx, fy) = fix(ix, iy);
                if fx {
                    fixed_dofs.push(2 * n);
                }
                if fy {
                    fixed_dofs.push(2 * n + 1);
                }
                if let Some((px, py)) = load(ix, iy) {
                    if px != 0.0 {
                        loads.push((2 * n, px));
                    }
                    if py != 0.0 {
                        loads.push((2 * n + 1, py));
                    }
                }
            }
        }
        // elements ordered like the nodes: column by column
        cells.sort_by_key(|&(ix, iy)| (ix, iy));
        let elements = cells
            .iter()
            .map(|&(ix, iy)| {
                [
                    index[grid(ix, iy)],
                    index[grid(ix + 1, iy)],
                    index[grid(ix + 1, iy + 1)],
                    index[grid(ix, iy + 1)],
                ]
            })
            .collect();
        Self {
            nx,
            ny,
            h: 1.0,
            cells,
            elements,
            nodes,
            fixed_dofs,
            load: loads,
        }
    }

    /// Right half of a simply supported beam loaded at midspan: horizontal DOFs fixed along
    /// the left (symmetry) edge, vertical roller at the bottom-right corner, unit downward
    /// load at the top-left corner.
    pub fn half_beam(nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidParameter("beam mesh needs nx, ny >= 1".into()));
        }
        Ok(Self::from_cells(
            nx,
            ny,
            |_, _| true,
            |ix, iy| (ix == 0, ix == nx && iy == 0),
            |ix, iy| (ix == 0 && iy == ny).then_some((0.0, -1.0)),
        ))
    }

    /// `n × n` square minus its top-right `2n/3 × 2n/3` block. The top edge of the
    /// vertical leg is clamped and a unit downward load acts at the middle of the right
    /// face of the horizontal leg.
    pub fn l_shape(n: usize) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(6) {
            return Err(Error::InvalidParameter(format!(
                "L-shape size must be a positive multiple of 6, got {n}"
            )));
        }
        let leg = n / 3;
        Ok(Self::from_cells(
            n,
            n,
            |ix, iy| ix < leg || iy < leg,
            |ix, iy| {
                let clamped = iy == n && ix <= leg;
                (clamped, clamped)
            },
            |ix, iy| (ix == n && iy == n / 6).then_some((0.0, -1.0)),
        ))
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn dof_count(&self) -> usize {
        2 * self.nodes.len()
    }

    /// Element volume (area times unit thickness).
    pub fn element_volume(&self) -> f64 {
        self.h * self.h
    }

    /// Element values laid out on the grid, top row first; removed cells read as 0.
    pub fn grid_rows<T: Real>(&self, values: &[T]) -> Vec<Vec<T>> {
        let mut rows = vec![vec![T::zero(); self.nx]; self.ny];
        for (&(ix, iy), &v) in self.cells.iter().zip(values) {
            rows[self.ny - 1 - iy][ix] = v;
        }
        rows
    }
}

/// Element densities as CSV, one grid row per line, top row first.
pub fn density_csv<T: Real>(mesh: &Mesh, rho: &[T]) -> String {
    let mut out = String::new();
    for row in mesh.grid_rows(rho) {
        let line: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64())).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Binary 8-bit PGM with gray level `1 - ρ`, so material is dark and voids are white.
pub fn density_pgm<T: Real>(mesh: &Mesh, rho: &[T]) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", mesh.nx, mesh.ny).into_bytes();
    for row in mesh.grid_rows(rho) {
        for v in row {
            let level = (1.0 - v.as_f64().clamp(0.0, 1.0)) * 255.0;
            out.push(level.round() as u8);
        }
    }
    out
}

/// Q4 plane-stress stiffness for modulus `e`, Poisson ratio `nu` and a square element of
/// width `h` with unit thickness, integrated with 2×2 Gauss points. DOF order is
/// `(u0, v0, u1, v1, u2, v2, u3, v3)` with nodes counter-clockwise from the lower left.
pub fn element_stiffness<T: Real>(e: T, nu: T, h: T) -> [[T; 8]; 8] {
    let one = T::one();
    let half = T::of(0.5);
    let d = {
        let c = e / (one - nu * nu);
        [
            [c, c * nu, T::zero()],
            [c * nu, c, T::zero()],
            [T::zero(), T::zero(), c * (one - nu) * half],
        ]
    };
    let xi_n = [-one, one, one, -one];
    let eta_n = [-one, -one, one, one];
    let gp = one / T::of(3.0).sqrt();
    let jac = h * half; // dx/dξ for a square element
    let det = jac * jac;
    let mut k = [[T::zero(); 8]; 8];
    for &gx in &[-gp, gp] {
        for &gy in &[-gp, gp] {
            let mut b = [[T::zero(); 8]; 3];
            for a in 0..4 {
                let dn_dxi = T::of(0.25) * xi_n[a] * (one + eta_n[a] * gy);
                let dn_deta = T::of(0.25) * eta_n[a] * (one + xi_n[a] * gx);
                let dx = dn_dxi / jac;
                let dy = dn_deta / jac;
                b[0][2 * a] = dx;
                b[1][2 * a + 1] = dy;
                b[2][2 * a] = dy;
                b[2][2 * a + 1] = dx;
            }
            let mut db = [[T::zero(); 8]; 3];
            for r in 0..3 {
                for c in 0..8 {
                    db[r][c] = (0..3).map(|s| d[r][s] * b[s][c]).sum();
                }
            }
            for i in 0..8 {
                for j in i..8 {
                    k[i][j] += (0..3).map(|s| b[s][i] * db[s][j]).sum::<T>() * det;
                }
            }
        }
    }
    for i in 0..8 {
        for j in 0..i {
            k[i][j] = k[j][i];
        }
    }
    k
}

/// Row-normalized cone filter `ρ = W θ` with weights `max(0, r - d)` between element
/// centers.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityFilter<T> {
    rows: Vec<Vec<(usize, T)>>,
}

impl<T: Real> DensityFilter<T> {
    pub fn new(mesh: &Mesh, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("filter radius must be > 0, got {radius}")));
        }
        let mut lookup = vec![usize::MAX; mesh.nx * mesh.ny];
        for (e, &(ix, iy)) in mesh.cells.iter().enumerate() {
            lookup[ix * mesh.ny + iy] = e;
        }
        let reach = (radius / mesh.h).ceil() as isize;
        let rows = mesh
            .cells
            .iter()
            .map(|&(ix, iy)| {
                let mut row = Vec::new();
                for dx in -reach..=reach {
                    for dy in -reach..=reach {
                        let (jx, jy) = (ix as isize + dx, iy as isize + dy);
                        if jx < 0 || jy < 0 || jx >= mesh.nx as isize || jy >= mesh.ny as isize {
                            continue;
                        }
                        let j = lookup[jx as usize * mesh.ny + jy as usize];
                        if j == usize::MAX {
                            continue;
                        }
                        let dist = ((dx * dx + dy * dy) as f64).sqrt() * mesh.h;
                        let w = radius - dist;
                        if w > 0.0 {
                            row.push((j, w));
                        }
                    }
                }
                let total: f64 = row.iter().map(|&(_, w)| w).sum();
                row.into_iter().map(|(j, w)| (j, T::of(w / total))).collect()
            })
            .collect();
        Ok(Self { rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, e: usize) -> &[(usize, T)] {
        &self.rows[e]
    }

    pub fn forward(&self, theta: &[T]) -> Vec<T> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, w)| w * theta[j]).sum())
            .collect()
    }

    /// Applies `Wᵀ`.
    pub fn backward(&self, d_rho: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows.len()];
        for (row, &g) in self.rows.iter().zip(d_rho) {
            for &(j, w) in row {
                out[j] += w * g;
            }
        }
        out
    }
}

/// Assembly and solution of the SIMP stiffness system on a fixed mesh.
#[derive(Debug, Clone)]
pub struct FeModel<T> {
    mesh: Mesh,
    unit_ke: [[T; 8]; 8],
    /// Equation number of each element DOF, `None` when constrained.
    element_eqs: Vec<[Option<usize>; 8]>,
    equation_dof: Vec<usize>,
    first: Vec<usize>,
    unit_force: Vec<T>,
}

impl<T: Real> FeModel<T> {
    pub fn new(mesh: Mesh) -> Result<Self> {
        if mesh.fixed_dofs.is_empty() {
            return Err(Error::InvalidParameter("mesh has no constrained DOFs".into()));
        }
        let mut eq_of = vec![Some(0); mesh.dof_count()];
        for &d in &mesh.fixed_dofs {
            eq_of[d] = None;
        }
        let mut equation_dof = Vec::new();
        for (d, slot) in eq_of.iter_mut().enumerate() {
            if slot.is_some() {
                *slot = Some(equation_dof.len());
                equation_dof.push(d);
            }
        }
        let element_eqs: Vec<[Option<usize>; 8]> = mesh
            .elements
            .iter()
            .map(|nodes| {
                let mut eqs = [None; 8];
                for (a, &n) in nodes.iter().enumerate() {
                    eqs[2 * a] = eq_of[2 * n];
                    eqs[2 * a + 1] = eq_of[2 * n + 1];
                }
                eqs
            })
            .collect();
        let mut first: Vec<usize> = (0..equation_dof.len()).collect();
        for eqs in &element_eqs {
            let lo = eqs.iter().flatten().copied().min();
            if let Some(lo) = lo {
                for &q in eqs.iter().flatten() {
                    first[q] = first[q].min(lo);
                }
            }
        }
        let mut unit_force = vec![T::zero(); equation_dof.len()];
        for &(d, v) in &mesh.load {
            if let Some(q) = eq_of[d] {
                unit_force[q] += T::of(v);
            }
        }
        let unit_ke = element_stiffness(T::one(), T::of(POISSON), T::of(mesh.h));
        Ok(Self {
            mesh,
            unit_ke,
            element_eqs,
            equation_dof,
            first,
            unit_force,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn equations(&self) -> usize {
        self.equation_dof.len()
    }

    /// Assembled, constrained stiffness for element moduli `ρ_i^3 e0`.
    pub fn stiffness(&self, rho: &[T], e0: T) -> SkylineMatrix<T> {
        let mut k = SkylineMatrix::new(self.first.clone());
        for (eqs, &r) in self.element_eqs.iter().zip(rho) {
            let scale = r.powi(PENALTY) * e0;
            for a in 0..8 {
                let Some(i) = eqs[a] else { continue };
                for b in 0..=a {
                    let Some(j) = eqs[b] else { continue };
                    k.add(i, j, self.unit_ke[a][b] * scale);
                }
            }
        }
        k
    }

    /// Displacements on every mesh DOF (zero where constrained) and compliance `fᵀu`.
    pub fn solve(&self, rho: &[T], e0: T, load: T) -> Result<(Vec<T>, T)> {
        if rho.len() != self.mesh.element_count() {
            return Err(Error::InvalidParameter(format!(
                "{} densities for {} elements",
                rho.len(),
                self.mesh.element_count()
            )));
        }
        let mut k = self.stiffness(rho, e0);
        k.factor()?;
        let f: Vec<T> = self.unit_force.iter().map(|&v| v * load).collect();
        let mut u = f.clone();
        k.solve_in_place(&mut u);
        let c = f.iter().zip(&u).map(|(&a, &b)| a * b).sum();
        let mut full = vec![T::zero(); self.mesh.dof_count()];
        for (q, &d) in self.equation_dof.iter().enumerate() {
            full[d] = u[q];
        }
        Ok((full, c))
    }

    /// `dC/dρ_i = -3 ρ_i² e0 u_iᵀ k̂ u_i`.
    pub fn compliance_sensitivity(&self, rho: &[T], e0: T, u: &[T]) -> Vec<T> {
        self.mesh
            .elements
            .iter()
            .zip(rho)
            .map(|(nodes, &r)| {
                let mut ue = [T::zero(); 8];
                for (a, &n) in nodes.iter().enumerate() {
                    ue[2 * a] = u[2 * n];
                    ue[2 * a + 1] = u[2 * n + 1];
                }
                let mut energy = T::zero();
                for i in 0..8 {
                    let row: T = (0..8).map(|j| self.unit_ke[i][j] * ue[j]).sum();
                    energy += ue[i] * row;
                }
                -T::of(PENALTY as f64) * r.powi(PENALTY - 1) * e0 * energy
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Half beam of `nx × ny` elements.
    Beam { nx: usize, ny: usize },
    /// L-shape cut from an `n × n` square.
    LShape { n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSettings<T> {
    pub domain: Domain,
    pub c_max: T,
    /// Mass weight.
    pub tau: T,
    /// Nominal load `P0`; the load realization is `P0 (1 + c ξ)`.
    pub load: T,
    pub load_cov: T,
    pub modulus_mean: T,
    pub modulus_std: T,
    /// Filter radius in element widths.
    pub filter_radius: T,
}

impl<T: Real> BeamSettings<T> {
    /// 120 × 40 half beam, `C_max = 700`, `P = 1 + 0.25 ξ`, `E0 ~ LN(1, 0.1)`.
    pub fn half_beam() -> Self {
        Self {
            domain: Domain::Beam { nx: 120, ny: 40 },
            c_max: T::of(700.0),
            tau: T::of(0.25),
            load: T::one(),
            load_cov: T::of(0.25),
            modulus_mean: T::one(),
            modulus_std: T::of(0.1),
            filter_radius: T::of(1.5),
        }
    }

    /// 2880-element L-shape, `C_max = 650`, `P = 0.5 (1 + 0.5 ξ)`, `E0 ~ LN(1, 0.2)`.
    pub fn l_beam() -> Self {
        Self {
            domain: Domain::LShape { n: 72 },
            c_max: T::of(650.0),
            tau: T::of(0.25),
            load: T::of(0.5),
            load_cov: T::of(0.5),
            modulus_mean: T::one(),
            modulus_std: T::of(0.2),
            filter_radius: T::of(1.5),
        }
    }
}

struct Cached<T> {
    theta: Vec<T>,
    rho: Vec<T>,
    /// Compliance at unit modulus and nominal load.
    c_unit: T,
    /// `Wᵀ dC_unit/dρ`.
    grad_unit: Vec<T>,
}

/// Compliance-plus-mass design problem with the compliance limit state
/// `g = C_max - C(θ; ξ)`, `ξ = (load variable, E0)`.
///
/// Load and modulus enter the compliance as `C = (1 + c ξ_0)² C_unit / E0`, so one solve
/// per design serves every realization; the solve is cached for the last design seen.
pub struct BeamProblem<T> {
    pub settings: BeamSettings<T>,
    fe: FeModel<T>,
    filter: DensityFilter<T>,
    input: RandomInput<T>,
    mass_grad: Vec<T>,
    cache: RefCell<Option<Cached<T>>>,
    solves: RefCell<u64>,
}

impl<T: Real> BeamProblem<T> {
    pub fn new(settings: BeamSettings<T>) -> Result<Self> {
        let mesh = match settings.domain {
            Domain::Beam { nx, ny } => Mesh::half_beam(nx, ny)?,
            Domain::LShape { n } => Mesh::l_shape(n)?,
        };
        if !(settings.c_max > T::zero()) || !(settings.tau >= T::zero()) {
            return Err(Error::InvalidParameter("C_max must be > 0 and tau >= 0".into()));
        }
        let input = RandomInput::new(vec![
            RandomVariable::StandardNormal,
            RandomVariable::lognormal(settings.modulus_mean, settings.modulus_std)?,
        ])?;
        let filter = DensityFilter::new(&mesh, settings.filter_radius.as_f64() * mesh.h)?;
        let v = T::of(mesh.element_volume());
        let mass_grad = filter.backward(&vec![settings.tau * v; mesh.element_count()]);
        Ok(Self {
            fe: FeModel::new(mesh)?,
            filter,
            input,
            mass_grad,
            settings,
            cache: RefCell::new(None),
            solves: RefCell::new(0),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        self.fe.mesh()
    }

    pub fn fe(&self) -> &FeModel<T> {
        &self.fe
    }

    pub fn filter(&self) -> &DensityFilter<T> {
        &self.filter
    }

    /// Finite-element solves performed so far.
    pub fn solves(&self) -> u64 {
        *self.solves.borrow()
    }

    pub fn densities(&self, theta: &[T]) -> Vec<T> {
        self.filter.forward(theta)
    }

    fn load_factor(&self, xi: &[T]) -> T {
        let f = T::one() + self.settings.load_cov * xi[0];
        f * f / xi[1]
    }

    fn with_cache<R>(&self, theta: &[T], f: impl FnOnce(&Cached<T>) -> R) -> Result<R> {
        let mut slot = self.cache.borrow_mut();
        if slot.as_ref().is_none_or(|c| c.theta != theta) {
            let rho = self.filter.forward(theta);
            let (u, c_unit) = self.fe.solve(&rho, T::one(), self.settings.load)?;
            *self.solves.borrow_mut() += 1;
            let d_rho = self.fe.compliance_sensitivity(&rho, T::one(), &u);
            *slot = Some(Cached {
                theta: theta.to_vec(),
                grad_unit: self.filter.backward(&d_rho),
                rho,
                c_unit,
            });
        }
        Ok(f(slot.as_ref().expect("cache filled")))
    }

    /// Compliance for realization `ξ` through the cached unit solve.
    pub fn compliance(&self, theta: &[T], xi: &[T]) -> Result<T> {
        let s = self.load_factor(xi);
        self.with_cache(theta, |c| s * c.c_unit)
    }

    /// Compliance from a dedicated solve at the realized load and modulus.
    pub fn compliance_exact(&self, theta: &[T], xi: &[T]) -> Result<T> {
        let rho = self.filter.forward(theta);
        let load = self.settings.load * (T::one() + self.settings.load_cov * xi[0]);
        let (_, c) = self.fe.solve(&rho, xi[1], load)?;
        Ok(c)
    }

    pub fn limit_state_exact(&self, theta: &[T], xi: &[T]) -> Result<T> {
        Ok(self.settings.c_max - self.compliance_exact(theta, xi)?)
    }

    pub fn mass(&self, rho: &[T]) -> T {
        T::of(self.mesh().element_volume()) * rho.iter().copied().sum::<T>()
    }
}

impl<T: Real> Problem<T> for BeamProblem<T> {
    fn dim(&self) -> usize {
        self.mesh().element_count()
    }

    fn bounds(&self) -> (Vec<T>, Vec<T>) {
        let n = self.dim();
        (vec![T::of(DENSITY_MIN); n], vec![T::one(); n])
    }

    fn initial_design(&self) -> Vec<T> {
        vec![T::of(0.5); self.dim()]
    }

    fn input(&self) -> &RandomInput<T> {
        &self.input
    }

    fn objective_sample(&self, theta: &[T], xi: &[T]) -> Result<(T, Vec<T>)> {
        let s = self.load_factor(xi);
        let tau = self.settings.tau;
        let v = T::of(self.mesh().element_volume());
        self.with_cache(theta, |c| {
            let mass: T = c.rho.iter().copied().sum::<T>() * v;
            let grad = c
                .grad_unit
                .iter()
                .zip(&self.mass_grad)
                .map(|(&g, &m)| s * g + m)
                .collect();
            (s * c.c_unit + tau * mass, grad)
        })
    }

    fn limit_state(&self, theta: &[T], xi: &[T]) -> Result<T> {
        Ok(self.settings.c_max - self.compliance(theta, xi)?)
    }
}
