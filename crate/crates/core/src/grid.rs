//! Cartesian nodal grids, field storage and ghost-layer extension.
//!
//! Nodes are indexed `0..=K` along each axis. Storage is dense with the first
//! index running fastest: node `(i, j)` lives at `j * (K + 1) + i`. In 1D the
//! second index is always `0`.
//!
//! Boundary conditions enter through a single ghost layer that is built on
//! demand by [`extend`]: density-like fields are mirrored (zero normal
//! derivative), velocity-like fields are mirrored with a sign flip (weak
//! no-slip). Corner ghosts such as `(-1, -1)` are never read by any stencil in
//! this crate and are stored as zero.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Dim {
    pub fn as_usize(self) -> usize {
        match self {
            Dim::One => 1,
            Dim::Two => 2,
        }
    }

    pub fn from_usize(d: usize) -> Option<Self> {
        match d {
            1 => Some(Dim::One),
            2 => Some(Dim::Two),
            _ => None,
        }
    }
}

/// Reflection rule used to fill the ghost layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    /// `f_{-1} = f_0`, `f_{K+1} = f_K` (density, chemical potential).
    Symmetric,
    /// `f_{-1} = -f_0`, `f_{K+1} = -f_K` (velocity, momentum-like fluxes).
    Antisymmetric,
}

impl Parity {
    #[inline]
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Parity::Symmetric => T::one(),
            Parity::Antisymmetric => -T::one(),
        }
    }
}

/// Uniform Cartesian grid on `[origin, origin + length]^dim` with `K` cells per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T> {
    dim: Dim,
    cells: usize,
    origin: T,
    length: T,
    h: T,
}

impl<T: Scalar> GridSpec<T> {
    /// Grid on the unit interval / unit square, `h = 1/K`.
    pub fn unit(dim: Dim, cells: usize) -> Self {
        Self::new(dim, cells, T::zero(), T::one())
    }

    /// Grid on `[origin, origin + length]^dim`.
    ///
    /// # Panics
    /// If `cells == 0` or `length <= 0`.
    pub fn new(dim: Dim, cells: usize, origin: T, length: T) -> Self {
        assert!(cells > 0, "grid needs at least one cell");
        assert!(length > T::zero(), "domain length must be positive");
        let h = length / T::of_usize(cells);
        Self {
            dim,
            cells,
            origin,
            length,
            h,
        }
    }

    /// The symmetric interval `[-1, 1]` (1D) or square `[-1, 1]^2`, `h = 2/K`.
    pub fn symmetric(dim: Dim, cells: usize) -> Self {
        Self::new(dim, cells, -T::one(), T::of(2.0))
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Number of cells `K` per axis.
    #[inline]
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Nodes per axis, `K + 1`.
    #[inline]
    pub fn nodes_per_axis(&self) -> usize {
        self.cells + 1
    }

    /// Total node count `(K + 1)^dim`.
    #[inline]
    pub fn len(&self) -> usize {
        match self.dim {
            Dim::One => self.cells + 1,
            Dim::Two => (self.cells + 1) * (self.cells + 1),
        }
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn h(&self) -> T {
        self.h
    }

    #[inline]
    pub fn origin(&self) -> T {
        self.origin
    }

    #[inline]
    pub fn length(&self) -> T {
        self.length
    }

    /// `h^dim`, the nodal quadrature weight.
    pub fn cell_volume(&self) -> T {
        match self.dim {
            Dim::One => self.h,
            Dim::Two => self.h * self.h,
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.cells && j <= self.cells);
        debug_assert!(self.dim == Dim::Two || j == 0);
        j * (self.cells + 1) + i
    }

    /// Inverse of [`GridSpec::index`].
    #[inline]
    pub fn node(&self, idx: usize) -> (usize, usize) {
        let n = self.cells + 1;
        (idx % n, idx / n)
    }

    /// Coordinate of node index `i` along an axis.
    #[inline]
    pub fn coord(&self, i: usize) -> T {
        self.origin + T::of_usize(i) * self.h
    }

    /// Iterates node pairs `(i, j)` in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).map(move |k| self.node(k))
    }

    /// Node indices on the discrete boundary: `i ∈ {0, K}` or (2D) `j ∈ {0, K}`.
    pub fn boundary_nodes(&self) -> Vec<(usize, usize)> {
        let k = self.cells;
        self.nodes()
            .filter(|&(i, j)| match self.dim {
                Dim::One => i == 0 || i == k,
                Dim::Two => i == 0 || i == k || j == 0 || j == k,
            })
            .collect()
    }

    /// Ghost indices of the one-layer halo (corners included in 2D).
    pub fn ghost_nodes(&self) -> Vec<(isize, isize)> {
        let k = self.cells as isize;
        match self.dim {
            Dim::One => vec![(-1, 0), (k + 1, 0)],
            Dim::Two => {
                let mut out = Vec::with_capacity(4 * self.cells + 8);
                for j in -1..=k + 1 {
                    for i in -1..=k + 1 {
                        if i == -1 || i == k + 1 || j == -1 || j == k + 1 {
                            out.push((i, j));
                        }
                    }
                }
                out
            }
        }
    }

    /// Same dimension and cell count (origin/length compared exactly).
    pub fn same_as(&self, other: &Self) -> bool {
        self == other
    }
}

/// Nodal scalar values on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: GridSpec<T>,
    values: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    /// # Panics
    /// If the number of values does not match the grid.
    pub fn new(grid: GridSpec<T>, values: Vec<T>) -> Self {
        assert_eq!(
            values.len(),
            grid.len(),
            "field length must equal (K+1)^dim"
        );
        Self { grid, values }
    }

    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn constant(grid: GridSpec<T>, c: T) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at every node (`y = 0` in 1D).
    pub fn from_fn(grid: GridSpec<T>, f: impl Fn(T, T) -> T) -> Self {
        let values = grid
            .nodes()
            .map(|(i, j)| {
                let y = if grid.dim() == Dim::Two {
                    grid.coord(j)
                } else {
                    T::zero()
                };
                f(grid.coord(i), y)
            })
            .collect();
        Self { grid, values }
    }

    /// Builds a field from the node indices `(i, j)`.
    pub fn from_index_fn(grid: GridSpec<T>, f: impl Fn(usize, usize) -> T) -> Self {
        let values = grid.nodes().map(|(i, j)| f(i, j)).collect();
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    pub fn sum(&self) -> T {
        self.values.iter().copied().sum()
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_abs(&self) -> T {
        crate::scalar::max_abs(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise map into a new field on the same grid.
    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!(
            self.values.len(),
            other.values.len(),
            "fields live on different grids"
        );
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self {
            grid: self.grid,
            values,
        }
    }

    /// Canonical (unweighted) inner product over all nodes.
    pub fn dot(&self, other: &Self) -> T {
        crate::scalar::dot(&self.values, &other.values)
    }
}

/// Nodal vector field with `dim` components (`u`, and `w` in 2D).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    grid: GridSpec<T>,
    components: Vec<ScalarField<T>>,
}

impl<T: Scalar> VectorField<T> {
    /// # Panics
    /// If the component count differs from the grid dimension or any component
    /// lives on a different grid.
    pub fn new(components: Vec<ScalarField<T>>) -> Self {
        let grid = *components.first().expect("at least one component").grid();
        assert_eq!(
            components.len(),
            grid.dim().as_usize(),
            "one component per axis"
        );
        assert!(
            components.iter().all(|c| c.grid() == &grid),
            "components on different grids"
        );
        Self { grid, components }
    }

    pub fn zeros(grid: GridSpec<T>) -> Self {
        let components = (0..grid.dim().as_usize())
            .map(|_| ScalarField::zeros(grid))
            .collect();
        Self { grid, components }
    }

    /// Every node carries the same vector `c` (length `dim`).
    pub fn constant(grid: GridSpec<T>, c: &[T]) -> Self {
        assert_eq!(c.len(), grid.dim().as_usize());
        let components = c
            .iter()
            .map(|&ck| ScalarField::constant(grid, ck))
            .collect();
        Self { grid, components }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec<T> {
        &self.grid
    }

    #[inline]
    pub fn components(&self) -> &[ScalarField<T>] {
        &self.components
    }

    #[inline]
    pub fn component(&self, k: usize) -> &ScalarField<T> {
        &self.components[k]
    }

    pub fn into_components(self) -> Vec<ScalarField<T>> {
        self.components
    }

    /// `|v|^2` at every node.
    pub fn norm_sq(&self) -> ScalarField<T> {
        let mut out = ScalarField::zeros(self.grid);
        for c in &self.components {
            for (o, &x) in out.values_mut().iter_mut().zip(c.values()) {
                *o += x * x;
            }
        }
        out
    }

    /// Maximum over nodes of the Euclidean length `|v_{i,j}|`.
    pub fn max_norm(&self) -> T {
        self.norm_sq()
            .values()
            .iter()
            .fold(T::zero(), |m, &x| m.max(x))
            .sqrt()
    }

    /// Multiplies every component by the scalar field `s`.
    pub fn scale_by(&self, s: &ScalarField<T>) -> Self {
        let components = self
            .components
            .iter()
            .map(|c| c.zip_map(s, |a, b| a * b))
            .collect();
        Self {
            grid: self.grid,
            components,
        }
    }

    /// Applies `f` componentwise.
    pub fn map_components(&self, f: impl Fn(&ScalarField<T>) -> ScalarField<T>) -> Self {
        Self {
            grid: self.grid,
            components: self.components.iter().map(f).collect(),
        }
    }

    /// Componentwise combination with another vector field.
    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T + Copy) -> Self {
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.zip_map(b, f))
            .collect();
        Self {
            grid: self.grid,
            components,
        }
    }

    /// Sum over nodes of `v · other`.
    pub fn dot(&self, other: &Self) -> T {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.dot(b))
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(ScalarField::is_finite)
    }
}

/// A field padded with one ghost layer on every side.
#[derive(Debug, Clone)]
pub struct Extended<T> {
    dim: Dim,
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Extended<T> {
    /// Value at node `(i, j)` with `i, j ∈ {-1, ..., K+1}` (`j = 0` in 1D).
    #[inline]
    pub fn at(&self, i: isize, j: isize) -> T {
        let w = self.n + 2;
        match self.dim {
            Dim::One => {
                debug_assert_eq!(j, 0);
                self.data[(i + 1) as usize]
            }
            Dim::Two => self.data[(j + 1) as usize * w + (i + 1) as usize],
        }
    }
}

/// Pads `field` with one ghost layer filled according to `parity`.
pub fn extend<T: Scalar>(field: &ScalarField<T>, parity: Parity) -> Extended<T> {
    let grid = field.grid();
    let n = grid.nodes_per_axis();
    let k = n - 1;
    let s: T = parity.sign();
    match grid.dim() {
        Dim::One => {
            let mut data = Vec::with_capacity(n + 2);
            data.push(s * field.values()[0]);
            data.extend_from_slice(field.values());
            data.push(s * field.values()[k]);
            Extended {
                dim: Dim::One,
                n,
                data,
            }
        }
        Dim::Two => {
            let w = n + 2;
            let mut data = vec![T::zero(); w * w];
            for j in 0..n {
                let row = &field.values()[j * n..(j + 1) * n];
                let base = (j + 1) * w;
                data[base + 1..base + 1 + n].copy_from_slice(row);
                data[base] = s * row[0];
                data[base + n + 1] = s * row[k];
            }
            for i in 0..n {
                data[i + 1] = s * field.values()[i];
                data[(n + 1) * w + i + 1] = s * field.values()[k * n + i];
            }
            Extended {
                dim: Dim::Two,
                n,
                data,
            }
        }
    }
}

/// Orthogonal projection onto mean-free fields: subtracts the nodal mean.
pub fn mean_subtract<T: Scalar>(field: &ScalarField<T>) -> ScalarField<T> {
    let mean = field.sum() / T::of_usize(field.values().len());
    field.map(|v| v - mean)
}
