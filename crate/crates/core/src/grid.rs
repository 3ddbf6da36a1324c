//! Rectangle, staggered grids and grid functions.
//!
//! Temperature unknowns sit on the interior nodes `ω` (`i1 = 1..N1-1`,
//! `i2 = 1..N2-1`); boundary node values are zero and never stored. The
//! flux component `q1` sits on `ω1` (`x1 = (i1+0.5)h1`, `i1 = 0..N1-1`,
//! `i2 = 1..N2-1`) and `q2` on `ω2` (`i1 = 1..N1-1`, `x2 = (i2+0.5)h2`,
//! `i2 = 0..N2-1`). Flux values on the boundary rows of the closed flux grids
//! are not stored either: they never couple to interior temperature nodes.
//!
//! All arrays are row-major with `i1` the slow index.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{HhcError, Result};
use crate::scalar::Real;

/// Coordinate direction of a difference operator or flux component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    X1,
    X2,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::X1, Direction::X2];

    /// 1 or 2.
    pub fn index(self) -> usize {
        match self {
            Direction::X1 => 1,
            Direction::X2 => 2,
        }
    }

    pub fn from_index(alpha: usize) -> Result<Self> {
        match alpha {
            1 => Ok(Direction::X1),
            2 => Ok(Direction::X2),
            other => Err(HhcError::InvalidParameter(format!("flux direction must be 1 or 2, got {other}"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Side lengths and cell counts of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    pub l1: T,
    pub l2: T,
    pub n1: usize,
    pub n2: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(l1: T, l2: T, n1: usize, n2: usize) -> Self {
        Self { l1, l2, n1, n2 }
    }

    pub fn square(n: usize) -> Self {
        Self::new(T::one(), T::one(), n, n)
    }
}

/// Uniform rectangular grid with its two staggered flux grids.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredGrid<T> {
    spec: GridSpec<T>,
    h1: T,
    h2: T,
}

impl<T: Real> StaggeredGrid<T> {
    pub fn new(spec: GridSpec<T>) -> Result<Self> {
        if spec.n1 < 2 || spec.n2 < 2 {
            return Err(HhcError::InvalidGrid(format!(
                "cell counts must be at least 2 (got {}x{}), otherwise there is no interior node",
                spec.n1, spec.n2
            )));
        }
        if !(spec.l1 > T::zero() && spec.l2 > T::zero()) || !spec.l1.is_finite() || !spec.l2.is_finite() {
            return Err(HhcError::InvalidGrid(format!(
                "side lengths must be positive and finite (got {} x {})",
                spec.l1, spec.l2
            )));
        }
        let h1 = spec.l1 / T::from_usize_lossy(spec.n1);
        let h2 = spec.l2 / T::from_usize_lossy(spec.n2);
        Ok(Self { spec, h1, h2 })
    }

    pub fn spec(&self) -> &GridSpec<T> {
        &self.spec
    }

    pub fn n(&self, dir: Direction) -> usize {
        match dir {
            Direction::X1 => self.spec.n1,
            Direction::X2 => self.spec.n2,
        }
    }

    pub fn h(&self, dir: Direction) -> T {
        match dir {
            Direction::X1 => self.h1,
            Direction::X2 => self.h2,
        }
    }

    pub fn l(&self, dir: Direction) -> T {
        match dir {
            Direction::X1 => self.spec.l1,
            Direction::X2 => self.spec.l2,
        }
    }

    /// `h1 * h2`, the weight of every inner product.
    pub fn cell_area(&self) -> T {
        self.h1 * self.h2
    }

    /// Extent `(m1, m2)` of the stored temperature array.
    pub fn node_shape(&self) -> (usize, usize) {
        (self.spec.n1 - 1, self.spec.n2 - 1)
    }

    /// Extent `(m1, m2)` of the stored flux array of direction `dir`.
    pub fn flux_shape(&self, dir: Direction) -> (usize, usize) {
        match dir {
            Direction::X1 => (self.spec.n1, self.spec.n2 - 1),
            Direction::X2 => (self.spec.n1 - 1, self.spec.n2),
        }
    }

    /// `|ω|`.
    pub fn node_count(&self) -> usize {
        let (a, b) = self.node_shape();
        a * b
    }

    /// `|ω_α|`.
    pub fn flux_count(&self, dir: Direction) -> usize {
        let (a, b) = self.flux_shape(dir);
        a * b
    }

    /// Coordinates of temperature node `(i1, i2)` in grid indices (boundary included).
    pub fn node_coords(&self, i1: usize, i2: usize) -> (T, T) {
        (T::from_usize_lossy(i1) * self.h1, T::from_usize_lossy(i2) * self.h2)
    }

    /// Coordinates of the flux midpoint with grid indices `(i1, i2)`.
    pub fn flux_coords(&self, dir: Direction, i1: usize, i2: usize) -> (T, T) {
        let half = T::lit(0.5);
        match dir {
            Direction::X1 => ((T::from_usize_lossy(i1) + half) * self.h1, T::from_usize_lossy(i2) * self.h2),
            Direction::X2 => (T::from_usize_lossy(i1) * self.h1, (T::from_usize_lossy(i2) + half) * self.h2),
        }
    }

    /// Iterates `(storage index, i1, i2)` over `ω` in storage order.
    pub fn node_indices(&self) -> impl Iterator<Item = (usize, usize, usize)> {
        let (m1, m2) = self.node_shape();
        (0..m1).flat_map(move |a| (0..m2).map(move |b| (a * m2 + b, a + 1, b + 1)))
    }

    /// Iterates `(storage index, i1, i2)` over `ω_α` in storage order.
    pub fn flux_indices(&self, dir: Direction) -> impl Iterator<Item = (usize, usize, usize)> {
        let (m1, m2) = self.flux_shape(dir);
        let (o1, o2) = match dir {
            Direction::X1 => (0, 1),
            Direction::X2 => (1, 0),
        };
        (0..m1).flat_map(move |a| (0..m2).map(move |b| (a * m2 + b, a + o1, b + o2)))
    }

    pub fn check_scalar(&self, y: &ScalarField<T>) -> Result<()> {
        let shape = self.node_shape();
        if (y.m1, y.m2) != shape {
            return Err(HhcError::GridMismatch {
                expected: format!("scalar field {}x{}", shape.0, shape.1),
                found: format!("scalar field {}x{}", y.m1, y.m2),
            });
        }
        Ok(())
    }

    pub fn check_flux(&self, q: &FluxField<T>, dir: Direction) -> Result<()> {
        if q.dir != dir {
            return Err(HhcError::DirectionMismatch { expected: dir.index(), found: q.dir.index() });
        }
        let shape = self.flux_shape(dir);
        if (q.m1, q.m2) != shape {
            return Err(HhcError::GridMismatch {
                expected: format!("flux-{dir} field {}x{}", shape.0, shape.1),
                found: format!("flux-{dir} field {}x{}", q.m1, q.m2),
            });
        }
        Ok(())
    }

    /// `(y, w)` in `H`.
    pub fn inner_h(&self, y: &ScalarField<T>, w: &ScalarField<T>) -> Result<T> {
        self.check_scalar(y)?;
        self.check_scalar(w)?;
        Ok(ordered_dot(&y.values, &w.values) * self.cell_area())
    }

    /// `(y, w)_α` in `H_α`.
    pub fn inner_h_alpha(&self, y: &FluxField<T>, w: &FluxField<T>) -> Result<T> {
        self.check_flux(y, y.dir)?;
        self.check_flux(w, y.dir)?;
        Ok(ordered_dot(&y.values, &w.values) * self.cell_area())
    }

    pub fn norm_h(&self, y: &ScalarField<T>) -> Result<T> {
        Ok(self.inner_h(y, y)?.sqrt())
    }

    pub fn norm_h_alpha(&self, y: &FluxField<T>) -> Result<T> {
        Ok(self.inner_h_alpha(y, y)?.sqrt())
    }

    /// Evaluates `phi` at every interior node.
    pub fn sample_scalar<F>(&self, phi: F) -> Result<ScalarField<T>>
    where
        F: Fn(T, T) -> T,
    {
        let (m1, m2) = self.node_shape();
        let mut values = Vec::with_capacity(m1 * m2);
        for (_, i1, i2) in self.node_indices() {
            let (x1, x2) = self.node_coords(i1, i2);
            let v = phi(x1, x2);
            if !v.is_finite() {
                return Err(HhcError::NonFinite { location: format!("node ({i1},{i2})"), value: v.to_f64_lossy() });
            }
            values.push(v);
        }
        Ok(ScalarField { m1, m2, values })
    }

    /// Evaluates `phi` at every flux midpoint of direction `dir`.
    pub fn sample_flux<F>(&self, dir: Direction, phi: F) -> Result<FluxField<T>>
    where
        F: Fn(T, T) -> T,
    {
        let (m1, m2) = self.flux_shape(dir);
        let mut values = Vec::with_capacity(m1 * m2);
        for (_, i1, i2) in self.flux_indices(dir) {
            let (x1, x2) = self.flux_coords(dir, i1, i2);
            let v = phi(x1, x2);
            if !v.is_finite() {
                return Err(HhcError::NonFinite {
                    location: format!("flux-{dir} midpoint ({i1},{i2})"),
                    value: v.to_f64_lossy(),
                });
            }
            values.push(v);
        }
        Ok(FluxField { dir, m1, m2, values })
    }

    pub fn zero_scalar(&self) -> ScalarField<T> {
        let (m1, m2) = self.node_shape();
        ScalarField { m1, m2, values: vec![T::zero(); m1 * m2] }
    }

    pub fn zero_flux(&self, dir: Direction) -> FluxField<T> {
        let (m1, m2) = self.flux_shape(dir);
        FluxField { dir, m1, m2, values: vec![T::zero(); m1 * m2] }
    }

    pub fn constant_scalar(&self, value: T) -> ScalarField<T> {
        let mut f = self.zero_scalar();
        f.values.iter_mut().for_each(|v| *v = value);
        f
    }

    pub fn constant_flux(&self, dir: Direction, value: T) -> FluxField<T> {
        let mut f = self.zero_flux(dir);
        f.values.iter_mut().for_each(|v| *v = value);
        f
    }

    pub fn scalar_from_values(&self, values: Vec<T>) -> Result<ScalarField<T>> {
        let (m1, m2) = self.node_shape();
        if values.len() != m1 * m2 {
            return Err(HhcError::GridMismatch {
                expected: format!("{} node values", m1 * m2),
                found: format!("{} values", values.len()),
            });
        }
        check_finite(&values, "scalar field")?;
        Ok(ScalarField { m1, m2, values })
    }

    pub fn flux_from_values(&self, dir: Direction, values: Vec<T>) -> Result<FluxField<T>> {
        let (m1, m2) = self.flux_shape(dir);
        if values.len() != m1 * m2 {
            return Err(HhcError::GridMismatch {
                expected: format!("{} flux-{dir} values", m1 * m2),
                found: format!("{} values", values.len()),
            });
        }
        check_finite(&values, "flux field")?;
        Ok(FluxField { dir, m1, m2, values })
    }
}

/// Sequential left-to-right dot product; the fixed order keeps results bit-reproducible.
pub(crate) fn ordered_dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = T::zero();
    for (x, y) in a.iter().zip(b) {
        acc = acc + *x * *y;
    }
    acc
}

fn check_finite<T: Real>(values: &[T], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(HhcError::NonFinite { location: format!("{what} entry {i}"), value: values[i].to_f64_lossy() }),
        None => Ok(()),
    }
}

macro_rules! field_algebra {
    ($ty:ident) => {
        impl<T: Real> $ty<T> {
            pub fn as_slice(&self) -> &[T] {
                &self.values
            }

            pub fn values_mut(&mut self) -> &mut [T] {
                &mut self.values
            }

            pub fn into_values(self) -> Vec<T> {
                self.values
            }

            pub fn len(&self) -> usize {
                self.values.len()
            }

            pub fn is_empty(&self) -> bool {
                self.values.is_empty()
            }

            pub fn map(&self, f: impl Fn(T) -> T) -> Self {
                let mut out = self.clone();
                out.values.iter_mut().for_each(|v| *v = f(*v));
                out
            }

            /// Pointwise `f(self, other)`; shapes must agree.
            pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
                assert_eq!(self.values.len(), other.values.len(), "field shape mismatch");
                let mut out = self.clone();
                out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a = f(*a, *b));
                out
            }

            pub fn scaled(&self, a: T) -> Self {
                self.map(|v| a * v)
            }

            /// `a * self + b * other`.
            pub fn lin_comb(&self, a: T, other: &Self, b: T) -> Self {
                self.zip_map(other, |x, y| a * x + b * y)
            }

            pub fn add(&self, other: &Self) -> Self {
                self.zip_map(other, |x, y| x + y)
            }

            pub fn sub(&self, other: &Self) -> Self {
                self.zip_map(other, |x, y| x - y)
            }

            pub fn mul(&self, other: &Self) -> Self {
                self.zip_map(other, |x, y| x * y)
            }

            pub fn div(&self, other: &Self) -> Self {
                self.zip_map(other, |x, y| x / y)
            }

            /// `self += a * other`.
            pub fn axpy_in_place(&mut self, a: T, other: &Self) {
                assert_eq!(self.values.len(), other.values.len(), "field shape mismatch");
                self.values.iter_mut().zip(&other.values).for_each(|(x, y)| *x = *x + a * *y);
            }

            pub fn max_abs(&self) -> T {
                self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
            }

            pub fn is_finite(&self) -> bool {
                self.values.iter().all(|v| v.is_finite())
            }
        }
    };
}

/// Grid function on the interior temperature nodes `ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    m1: usize,
    m2: usize,
    values: Vec<T>,
}

field_algebra!(ScalarField);

impl<T: Real> ScalarField<T> {
    pub fn shape(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }

    /// Value at grid node `(i1, i2)`; boundary nodes read as zero.
    pub fn at(&self, i1: usize, i2: usize) -> T {
        if i1 == 0 || i2 == 0 || i1 > self.m1 || i2 > self.m2 {
            T::zero()
        } else {
            self.values[(i1 - 1) * self.m2 + (i2 - 1)]
        }
    }
}

/// Grid function on the flux midpoints `ω_α` of one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField<T> {
    dir: Direction,
    m1: usize,
    m2: usize,
    values: Vec<T>,
}

field_algebra!(FluxField);

impl<T: Real> FluxField<T> {
    pub fn direction(&self) -> Direction {
        self.dir
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.m1, self.m2)
    }
}

/// Kind tag of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub enum Snapshot<T> {
    Scalar(ScalarField<T>),
    Flux(FluxField<T>),
}

/// Writes `HHC-FIELD v1 <kind> <alpha|-> <N1> <N2> <l1> <l2>` and one value per line.
pub fn write_snapshot<T: Real, W: Write>(
    grid: &StaggeredGrid<T>,
    field: &Snapshot<T>,
    mut out: W,
) -> std::io::Result<()> {
    let spec = grid.spec();
    let (kind, alpha, values) = match field {
        Snapshot::Scalar(f) => ("scalar", "-".to_string(), f.as_slice()),
        Snapshot::Flux(f) => ("flux", f.direction().to_string(), f.as_slice()),
    };
    writeln!(
        out,
        "HHC-FIELD v1 {kind} {alpha} {} {} {:.16e} {:.16e}",
        spec.n1,
        spec.n2,
        spec.l1.to_f64_lossy(),
        spec.l2.to_f64_lossy()
    )?;
    for v in values {
        writeln!(out, "{:.16e}", v.to_f64_lossy())?;
    }
    Ok(())
}

/// Parses a snapshot written by [`write_snapshot`], rebuilding its grid.
pub fn read_snapshot<T: Real, R: BufRead>(input: R) -> Result<(StaggeredGrid<T>, Snapshot<T>)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| HhcError::Snapshot("empty input".into()))?
        .map_err(|e| HhcError::Snapshot(e.to_string()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 8 || parts[0] != "HHC-FIELD" || parts[1] != "v1" {
        return Err(HhcError::Snapshot(format!("bad header `{header}`")));
    }
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| HhcError::Snapshot(format!("bad count `{s}`")));
    let parse_real =
        |s: &str| s.parse::<f64>().map(T::lit).map_err(|_| HhcError::Snapshot(format!("bad number `{s}`")));
    let spec =
        GridSpec::new(parse_real(parts[6])?, parse_real(parts[7])?, parse_usize(parts[4])?, parse_usize(parts[5])?);
    let grid = StaggeredGrid::new(spec)?;
    let mut values = Vec::new();
    for line in lines {
        let line = line.map_err(|e| HhcError::Snapshot(e.to_string()))?;
        let line = line.trim();
        if !line.is_empty() {
            values.push(parse_real(line)?);
        }
    }
    let field = match (parts[2], parts[3]) {
        ("scalar", "-") => Snapshot::Scalar(grid.scalar_from_values(values)?),
        ("flux", a) => {
            let dir = Direction::from_index(parse_usize(a)?)?;
            Snapshot::Flux(grid.flux_from_values(dir, values)?)
        }
        (k, a) => return Err(HhcError::Snapshot(format!("unknown kind `{k} {a}`"))),
    };
    Ok((grid, field))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(l1: f64, l2: f64, n1: usize, n2: usize) -> StaggeredGrid<f64> {
        StaggeredGrid::new(GridSpec::new(l1, l2, n1, n2)).unwrap()
    }

    #[test]
    fn index_set_sizes() {
        let g = grid(1.0, 1.0, 4, 4);
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.flux_count(Direction::X1), 12);
        assert_eq!(g.flux_count(Direction::X2), 12);

        let g = grid(1.0, 2.0, 2, 2);
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.flux_count(Direction::X1), 2);
        assert_eq!(g.flux_count(Direction::X2), 2);
    }

    #[test]
    fn rejects_empty_interior() {
        let err = StaggeredGrid::new(GridSpec::new(1.0, 1.0, 1, 4)).unwrap_err();
        assert!(matches!(err, HhcError::InvalidGrid(_)));
        assert!(StaggeredGrid::new(GridSpec::new(0.0, 1.0, 4, 4)).is_err());
    }

    #[test]
    fn step_sizes_tile_the_sides() {
        let g = grid(1.0, 2.0, 4, 8);
        assert_eq!(g.h(Direction::X1) * 4.0, 1.0);
        assert_eq!(g.h(Direction::X2) * 8.0, 2.0);
    }

    #[test]
    fn flux_midpoints_are_strictly_inside() {
        let g = grid(1.0, 2.0, 5, 3);
        for dir in Direction::ALL {
            for (_, i1, i2) in g.flux_indices(dir) {
                let (x1, x2) = g.flux_coords(dir, i1, i2);
                match dir {
                    Direction::X1 => {
                        assert!(x1 > 0.0 && x1 < 1.0);
                        assert!(x2 > 0.0 && x2 < 2.0);
                    }
                    Direction::X2 => {
                        assert!(x1 > 0.0 && x1 < 1.0);
                        assert!(x2 > 0.0 && x2 < 2.0);
                    }
                }
            }
        }
    }

    #[test]
    fn inner_products_of_ones() {
        let g = grid(1.0, 1.0, 4, 4);
        let zero = g.zero_scalar();
        assert_eq!(g.inner_h(&zero, &zero).unwrap(), 0.0);
        let one = g.constant_scalar(1.0);
        assert!((g.inner_h(&one, &one).unwrap() - 0.5625).abs() < 1e-15);
        let q = g.constant_flux(Direction::X1, 1.0);
        assert!((g.inner_h_alpha(&q, &q).unwrap() - 0.75).abs() < 1e-15);
        let z = g.zero_flux(Direction::X1);
        assert_eq!(g.inner_h_alpha(&z, &z).unwrap(), 0.0);
    }

    #[test]
    fn mismatches_are_reported() {
        let g = grid(1.0, 1.0, 4, 4);
        let other = grid(1.0, 1.0, 5, 4);
        let y = g.zero_scalar();
        let w = other.zero_scalar();
        assert!(matches!(g.inner_h(&y, &w), Err(HhcError::GridMismatch { .. })));
        let q1 = g.zero_flux(Direction::X1);
        let q2 = g.zero_flux(Direction::X2);
        assert!(matches!(g.inner_h_alpha(&q1, &q2), Err(HhcError::DirectionMismatch { .. })));
    }

    #[test]
    fn sampling_flux_midpoints() {
        let g = grid(1.0, 1.0, 4, 4);
        let q = g.sample_flux(Direction::X1, |x1, _| x1).unwrap();
        let row: Vec<f64> = q.as_slice().chunks(3).map(|c| c[0]).collect();
        assert_eq!(row, vec![0.125, 0.375, 0.625, 0.875]);
        for chunk in q.as_slice().chunks(3) {
            assert!(chunk.iter().all(|v| *v == chunk[0]));
        }
        let z = g.sample_scalar(|_, _| 0.0).unwrap();
        assert_eq!(z, g.zero_scalar());
    }

    #[test]
    fn sampling_rejects_non_finite() {
        let g = grid(1.0, 1.0, 4, 4);
        let err = g.sample_scalar(|x1, _| 1.0 / (x1 - 0.5)).unwrap_err();
        assert!(matches!(err, HhcError::NonFinite { .. }));
    }

    #[test]
    fn boundary_reads_as_zero() {
        let g = grid(1.0, 1.0, 4, 4);
        let pi = std::f64::consts::PI;
        let u = g.sample_scalar(|x1, x2| (pi * x1).sin() * (pi * x2).sin()).unwrap();
        assert_eq!(u.at(0, 2), 0.0);
        assert_eq!(u.at(4, 2), 0.0);
        assert!((u.at(2, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn snapshot_round_trip() {
        let g = grid(1.0, 2.0, 4, 3);
        let q = g.sample_flux(Direction::X2, |x1, x2| x1 * 0.1 + x2.exp()).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&g, &Snapshot::Flux(q.clone()), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("HHC-FIELD v1 flux 2 4 3 "));
        let (g2, back) = read_snapshot::<f64, _>(buf.as_slice()).unwrap();
        assert_eq!(g2, g);
        assert_eq!(back, Snapshot::Flux(q));
    }

    fn field_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-10.0f64..10.0, len)
    }

    proptest! {
        #[test]
        fn cauchy_schwarz_and_symmetry(y in field_strategy(12), w in field_strategy(12)) {
            let g = grid(1.3, 0.7, 5, 4);
            let y = g.scalar_from_values(y).unwrap();
            let w = g.scalar_from_values(w).unwrap();
            let yw = g.inner_h(&y, &w).unwrap();
            let wy = g.inner_h(&w, &y).unwrap();
            prop_assert_eq!(yw, wy);
            let yy = g.inner_h(&y, &y).unwrap();
            let ww = g.inner_h(&w, &w).unwrap();
            prop_assert!(yy >= 0.0);
            prop_assert!(yw * yw <= yy * ww * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn inner_product_is_bilinear(y in field_strategy(20), w in field_strategy(20), a in -5.0f64..5.0) {
            let g = grid(1.0, 1.0, 4, 6);
            let y = g.flux_from_values(Direction::X1, y).unwrap();
            let w = g.flux_from_values(Direction::X1, w).unwrap();
            let lhs = g.inner_h_alpha(&y.scaled(a), &w).unwrap();
            let rhs = a * g.inner_h_alpha(&y, &w).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn sampled_coordinates_round_trip(n1 in 2usize..9, n2 in 2usize..9) {
            let g = grid(1.7, 0.9, n1, n2);
            let xs = g.sample_scalar(|x1, _| x1).unwrap();
            for (idx, i1, _) in g.node_indices() {
                let x = xs.as_slice()[idx];
                prop_assert!((x / g.h(Direction::X1) - i1 as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn norm_is_zero_only_for_zero() {
        let g = grid(1.0, 1.0, 3, 3);
        assert_eq!(g.norm_h(&g.zero_scalar()).unwrap(), 0.0);
        let mut y = g.zero_scalar();
        y.values_mut()[3] = 1e-3;
        assert!(g.norm_h(&y).unwrap() > 0.0);
    }
}
