//! Batched tridiagonal line solves and a conjugate-gradient solver.
//!
//! Splitting schemes only ever invert operators of the form
//! `a·m + b·A*_α κ A_α` on `H` or `a·m + b·A_α A*_α` on `H_α`. For a fixed
//! direction these decouple into independent tridiagonal systems, one per
//! grid line, each solved directly by forward elimination and back
//! substitution. Genuinely two-dimensional operators go through
//! [`solve_spd`].

use crate::error::{HhcError, Result};
use crate::grid::{ordered_dot, Direction, FluxField, ScalarField, StaggeredGrid};
use crate::scalar::Real;

/// Default relative residual of [`solve_spd`].
pub const DEFAULT_TOL: f64 = 1e-10;

/// Solves one tridiagonal system in place.
///
/// `sub[i]` multiplies `x[i-1]` and `sup[i]` multiplies `x[i+1]` in row `i`;
/// `sub[0]` and `sup[n-1]` are ignored. The systems built in this module are
/// symmetric and diagonally dominant, so no pivoting is needed.
pub fn thomas<T: Real>(sub: &[T], diag: &[T], sup: &[T], rhs: &mut [T], scratch: &mut Vec<T>) {
    let n = rhs.len();
    debug_assert!(sub.len() == n && diag.len() == n && sup.len() == n);
    if n == 0 {
        return;
    }
    scratch.clear();
    scratch.resize(n, T::zero());
    let mut denom = diag[0];
    rhs[0] = rhs[0] / denom;
    for i in 1..n {
        scratch[i - 1] = sup[i - 1] / denom;
        denom = diag[i] - sub[i] * scratch[i - 1];
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - scratch[i] * rhs[i + 1];
    }
}

/// `a·m ⊙ x + b·A*_α (κ ⊙ A_α x)` on the temperature grid, split into lines along `direction`.
///
/// `mass` defaults to one and `conductivity` (face values of direction
/// `direction`) defaults to one.
#[derive(Debug, Clone, Copy)]
pub struct NodeLineSystem<'a, T> {
    pub direction: Direction,
    pub a: T,
    pub b: T,
    pub mass: Option<&'a ScalarField<T>>,
    pub conductivity: Option<&'a FluxField<T>>,
}

impl<'a, T: Real> NodeLineSystem<'a, T> {
    pub fn new(direction: Direction, a: T, b: T) -> Self {
        Self { direction, a, b, mass: None, conductivity: None }
    }

    pub fn with_mass(mut self, mass: &'a ScalarField<T>) -> Self {
        self.mass = Some(mass);
        self
    }

    pub fn with_conductivity(mut self, k: &'a FluxField<T>) -> Self {
        self.conductivity = Some(k);
        self
    }
}

/// `a·m ⊙ q + b·A_α A*_α q` on the flux grid `ω_α`, split into lines along `direction`.
#[derive(Debug, Clone, Copy)]
pub struct FaceLineSystem<'a, T> {
    pub direction: Direction,
    pub a: T,
    pub b: T,
    pub mass: Option<&'a FluxField<T>>,
}

impl<'a, T: Real> FaceLineSystem<'a, T> {
    pub fn new(direction: Direction, a: T, b: T) -> Self {
        Self { direction, a, b, mass: None }
    }

    pub fn with_mass(mut self, mass: &'a FluxField<T>) -> Self {
        self.mass = Some(mass);
        self
    }
}

fn check_coefficients<T: Real>(a: T, b: T) -> Result<()> {
    if !(a > T::zero()) || !a.is_finite() {
        return Err(HhcError::InvalidParameter(format!("line system needs a > 0, got {a}")));
    }
    if !(b >= T::zero()) || !b.is_finite() {
        return Err(HhcError::InvalidParameter(format!("line system needs b >= 0, got {b}")));
    }
    Ok(())
}

/// Layout of the lines of an `m1 x m2` row-major array along `dir`:
/// `(number of lines, line length, stride between entries, start offset of line l)`.
fn line_layout(dir: Direction, m1: usize, m2: usize) -> (usize, usize, usize, impl Fn(usize) -> usize) {
    match dir {
        Direction::X1 => (m2, m1, m2, Box::new(move |l: usize| l) as Box<dyn Fn(usize) -> usize>),
        Direction::X2 => (m1, m2, 1, Box::new(move |l: usize| l * m2) as Box<dyn Fn(usize) -> usize>),
    }
}

/// Direct solution of every line system of a [`NodeLineSystem`].
pub fn solve_lines<T: Real>(
    grid: &StaggeredGrid<T>,
    sys: &NodeLineSystem<'_, T>,
    rhs: &ScalarField<T>,
) -> Result<ScalarField<T>> {
    check_coefficients(sys.a, sys.b)?;
    grid.check_scalar(rhs)?;
    if let Some(m) = sys.mass {
        grid.check_scalar(m)?;
    }
    if let Some(k) = sys.conductivity {
        grid.check_flux(k, sys.direction)?;
    }
    let dir = sys.direction;
    let (m1, m2) = grid.node_shape();
    let (fm1, fm2) = grid.flux_shape(dir);
    let inv_h2 = (grid.h(dir) * grid.h(dir)).recip();
    let (lines, len, stride, start) = line_layout(dir, m1, m2);

    let mut out = rhs.clone();
    let values = out.values_mut();
    let mut sub = vec![T::zero(); len];
    let mut diag = vec![T::zero(); len];
    let mut sup = vec![T::zero(); len];
    let mut buf = vec![T::zero(); len];
    let mut scratch = Vec::with_capacity(len);

    // Face j of a line sits between line entries j-1 and j (j = 0..=len).
    let face = |line: usize, j: usize| -> T {
        match sys.conductivity {
            None => T::one(),
            Some(k) => {
                let (a, b) = match dir {
                    Direction::X1 => (j, line),
                    Direction::X2 => (line, j),
                };
                debug_assert!(a < fm1 && b < fm2);
                k.as_slice()[a * fm2 + b]
            }
        }
    };

    for line in 0..lines {
        let s = start(line);
        for i in 0..len {
            let idx = s + i * stride;
            let mass = sys.mass.map_or(T::one(), |m| m.as_slice()[idx]);
            let kl = face(line, i) * inv_h2 * sys.b;
            let kr = face(line, i + 1) * inv_h2 * sys.b;
            diag[i] = sys.a * mass + kl + kr;
            sub[i] = -kl;
            sup[i] = -kr;
            buf[i] = values[idx];
        }
        thomas(&sub, &diag, &sup, &mut buf, &mut scratch);
        for (i, v) in buf.iter().enumerate() {
            values[s + i * stride] = *v;
        }
    }
    Ok(out)
}

/// Direct solution of every line system of a [`FaceLineSystem`].
pub fn solve_flux_lines<T: Real>(
    grid: &StaggeredGrid<T>,
    sys: &FaceLineSystem<'_, T>,
    rhs: &FluxField<T>,
) -> Result<FluxField<T>> {
    check_coefficients(sys.a, sys.b)?;
    let dir = sys.direction;
    grid.check_flux(rhs, dir)?;
    if let Some(m) = sys.mass {
        grid.check_flux(m, dir)?;
    }
    let (m1, m2) = grid.flux_shape(dir);
    let coupling = sys.b / (grid.h(dir) * grid.h(dir));
    let (lines, len, stride, start) = line_layout(dir, m1, m2);

    let mut out = rhs.clone();
    let values = out.values_mut();
    let mut sub = vec![T::zero(); len];
    let mut diag = vec![T::zero(); len];
    let mut sup = vec![T::zero(); len];
    let mut buf = vec![T::zero(); len];
    let mut scratch = Vec::with_capacity(len);

    for line in 0..lines {
        let s = start(line);
        for i in 0..len {
            let idx = s + i * stride;
            let mass = sys.mass.map_or(T::one(), |m| m.as_slice()[idx]);
            // A_α A*_α couples a midpoint to its neighbours through the interior
            // nodes only: the end midpoints see a single neighbour.
            let left = if i > 0 { coupling } else { T::zero() };
            let right = if i + 1 < len { coupling } else { T::zero() };
            diag[i] = sys.a * mass + left + right;
            sub[i] = -left;
            sup[i] = -right;
            buf[i] = values[idx];
        }
        thomas(&sub, &diag, &sup, &mut buf, &mut scratch);
        for (i, v) in buf.iter().enumerate() {
            values[s + i * stride] = *v;
        }
    }
    Ok(out)
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Tolerance and iteration cap for [`solve_spd`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdSettings<T> {
    pub tol: T,
    /// `None` means ten times the number of unknowns.
    pub max_iter: Option<usize>,
}

impl<T: Real> Default for SpdSettings<T> {
    fn default() -> Self {
        Self { tol: T::lit(DEFAULT_TOL), max_iter: None }
    }
}

impl<T: Real> SpdSettings<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { tol, max_iter: None }
    }

    pub fn iteration_cap(&self, unknowns: usize) -> usize {
        self.max_iter.unwrap_or(10 * unknowns.max(1))
    }
}

/// Conjugate gradients for a symmetric positive definite operator on `H`.
///
/// Stops once `‖rhs − apply(x)‖ ≤ tol·‖rhs‖` (Euclidean norms, which differ
/// from the `H` norm by the constant factor `h1·h2`).
pub fn solve_spd<T, F>(
    mut apply: F,
    rhs: &ScalarField<T>,
    guess: Option<&ScalarField<T>>,
    settings: &SpdSettings<T>,
) -> Result<(ScalarField<T>, SolveStats)>
where
    T: Real,
    F: FnMut(&ScalarField<T>) -> Result<ScalarField<T>>,
{
    let tol = settings.tol;
    if !(tol > T::zero()) {
        return Err(HhcError::InvalidParameter(format!("solver tolerance must be positive, got {tol}")));
    }
    let max_iter = settings.iteration_cap(rhs.len());
    let rhs_norm = ordered_dot(rhs.as_slice(), rhs.as_slice()).sqrt();
    if rhs_norm == T::zero() {
        return Ok((rhs.map(|_| T::zero()), SolveStats { iterations: 0, relative_residual: 0.0 }));
    }

    let mut x = match guess {
        Some(g) => {
            if g.shape() != rhs.shape() {
                return Err(HhcError::GridMismatch {
                    expected: format!("{:?}", rhs.shape()),
                    found: format!("{:?}", g.shape()),
                });
            }
            g.clone()
        }
        None => rhs.map(|_| T::zero()),
    };
    let mut r = match guess {
        Some(_) => rhs.sub(&apply(&x)?),
        None => rhs.clone(),
    };
    let mut rr = ordered_dot(r.as_slice(), r.as_slice());
    let threshold = tol * rhs_norm;
    if rr.sqrt() <= threshold {
        return Ok((x, SolveStats { iterations: 0, relative_residual: (rr.sqrt() / rhs_norm).to_f64_lossy() }));
    }
    let mut p = r.clone();
    for it in 1..=max_iter {
        let ap = apply(&p)?;
        let pap = ordered_dot(p.as_slice(), ap.as_slice());
        if !(pap > T::zero()) {
            return Err(HhcError::InvalidParameter(format!("operator is not positive definite (p·Ap = {pap})")));
        }
        let alpha = rr / pap;
        x.axpy_in_place(alpha, &p);
        r.axpy_in_place(-alpha, &ap);
        let rr_new = ordered_dot(r.as_slice(), r.as_slice());
        if rr_new.sqrt() <= threshold {
            return Ok((
                x,
                SolveStats { iterations: it, relative_residual: (rr_new.sqrt() / rhs_norm).to_f64_lossy() },
            ));
        }
        let beta = rr_new / rr;
        rr = rr_new;
        p = r.lin_comb(T::one(), &p, beta);
    }
    Err(HhcError::SolverDiverged { iterations: max_iter, residual: (rr.sqrt() / rhs_norm).to_f64_lossy() })
}
