//! Randomized checks of the discrete identities behind the scheme's mass and
//! energy estimates.
//!
//! * compatibility of the advection operator:
//!   `Σ div~_h(ρv⊗v)·v = Σ ½|v|² div_h(ρv)`,
//! * inverse inequality `Σ_{0..K-1} |D_h v|² ≤ (8/h²) Σ |v|²`,
//! * summation by parts for the antisymmetric vector Laplacian, in both the
//!   quadratic and the bilinear form,
//! * telescoping `Σ div_h F = 0` for antisymmetrically extended `F`.
//!
//! The summation-by-parts sums run over every grid edge and weight each
//! boundary node by its number of ghost neighbours; in 1D this is the usual
//! `Σ_{i=0}^{K-1}|D_h v|² + (2/h²)(|v_0|² + |v_K|²)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::grid::{Dim, GridSpec, Parity, ScalarField, VectorField};
use crate::operators::{div_advection, div_centered, jacobian_forward, vector_laplacian};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    /// Largest relative defect (for the inequality: largest `lhs/rhs`).
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub seed: u64,
    pub results: Vec<CheckResult>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

pub const IDENTITY_TOLERANCE: f64 = 1e-12;
pub const CHECK_CELLS: [usize; 3] = [4, 8, 16];

/// A random `(ρ, v)` pair with `ρ ∈ [0.5, 2]` and `v ∈ [-1, 1]^d`.
pub fn random_case(
    rng: &mut impl Rng,
    dim: Dim,
    cells: usize,
) -> (ScalarField<f64>, VectorField<f64>) {
    let g = GridSpec::unit(dim, cells);
    let rho = ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(0.5..=2.0)).collect());
    let v = VectorField::new(
        (0..dim.as_usize())
            .map(|_| ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect()))
            .collect(),
    );
    (rho, v)
}

pub fn relative_defect(lhs: f64, rhs: f64) -> f64 {
    let scale = lhs.abs().max(rhs.abs());
    if scale == 0.0 {
        0.0
    } else {
        (lhs - rhs).abs() / scale
    }
}

/// Both sides of the advection compatibility identity.
pub fn compatibility_sides(rho: &ScalarField<f64>, v: &VectorField<f64>) -> (f64, f64) {
    let lhs = div_advection(rho, v).dot(v);
    let div = div_centered(&v.scale_by(rho), Parity::Antisymmetric);
    let rhs = v
        .norm_sq()
        .values()
        .iter()
        .zip(div.values())
        .map(|(&v2, &d)| 0.5 * v2 * d)
        .sum();
    (lhs, rhs)
}

/// `(Σ_{0..K-1}|D_h v|², (8/h²)Σ|v|²)`.
pub fn inverse_inequality_sides(v: &VectorField<f64>) -> (f64, f64) {
    let h = v.grid().h();
    let lhs = jacobian_forward(v).frobenius_sq_sum();
    let rhs = 8.0 / (h * h) * v.norm_sq().sum();
    (lhs, rhs)
}

/// Sum over all grid edges of `δa·δb / h²`, plus `(2/h²)Σ g·a·b` with `g` the
/// number of ghost neighbours of each node.
fn edge_form(a: &VectorField<f64>, b: &VectorField<f64>) -> f64 {
    let g = *a.grid();
    let k = g.cells();
    let h2 = g.h() * g.h();
    let mut edges = 0.0;
    let mut boundary = 0.0;
    for (ca, cb) in a.components().iter().zip(b.components()) {
        for (i, j) in g.nodes() {
            let here = g.index(i, j);
            if i < k {
                let r = g.index(i + 1, j);
                edges +=
                    (ca.values()[r] - ca.values()[here]) * (cb.values()[r] - cb.values()[here]);
            }
            if g.dim() == Dim::Two && j < k {
                let t = g.index(i, j + 1);
                edges +=
                    (ca.values()[t] - ca.values()[here]) * (cb.values()[t] - cb.values()[here]);
            }
            let mut ghosts = usize::from(i == 0) + usize::from(i == k);
            if g.dim() == Dim::Two {
                ghosts += usize::from(j == 0) + usize::from(j == k);
            }
            boundary += ghosts as f64 * ca.values()[here] * cb.values()[here];
        }
    }
    edges / h2 + 2.0 * boundary / h2
}

/// `(−Σ Δ_h a · b, edge form)` for the antisymmetric vector Laplacian.
pub fn sbp_sides(a: &VectorField<f64>, b: &VectorField<f64>) -> (f64, f64) {
    let lhs = -vector_laplacian(a, Parity::Antisymmetric).dot(b);
    (lhs, edge_form(a, b))
}

/// `(−Σ Δ_h a · b, Σ_{i,j=0}^{K-1} D_h a : D_h b + (2/h²) Σ_{∂Ω} a·b)`, i.e. the
/// textbook form with forward differences on `{0..K-1}^d` and every boundary
/// node counted once. Exact in 1D; in 2D it drops the edges along `i = K` and
/// `j = K` and undercounts the corners, so the two sides differ.
pub fn textbook_sbp_sides(a: &VectorField<f64>, b: &VectorField<f64>) -> (f64, f64) {
    let lhs = -vector_laplacian(a, Parity::Antisymmetric).dot(b);
    let g = *a.grid();
    let k = g.cells();
    let h2 = g.h() * g.h();
    let two_d = g.dim() == Dim::Two;
    let mut interior = 0.0;
    let mut boundary = 0.0;
    for (ca, cb) in a.components().iter().zip(b.components()) {
        let (va, vb) = (ca.values(), cb.values());
        for (i, j) in g.nodes() {
            let here = g.index(i, j);
            if i < k && (!two_d || j < k) {
                let r = g.index(i + 1, j);
                interior += (va[r] - va[here]) * (vb[r] - vb[here]);
                if two_d {
                    let t = g.index(i, j + 1);
                    interior += (va[t] - va[here]) * (vb[t] - vb[here]);
                }
            }
            let on_boundary = i == 0 || i == k || (two_d && (j == 0 || j == k));
            if on_boundary {
                boundary += va[here] * vb[here];
            }
        }
    }
    (lhs, interior / h2 + 2.0 * boundary / h2)
}

/// `(Σ div_h F, Σ|F|/h)`.
pub fn telescoping_sides(f: &VectorField<f64>) -> (f64, f64) {
    let total = div_centered(f, Parity::Antisymmetric).sum();
    let scale = f
        .components()
        .iter()
        .flat_map(|c| c.values())
        .map(|x| x.abs())
        .sum::<f64>()
        / f.grid().h();
    (total, scale)
}

/// Runs `cases_per_config` random cases for every `K ∈ {4, 8, 16}` and `d ∈ {1, 2}`.
pub fn run_identity_checks(seed: u64, cases_per_config: usize) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = [0.0f64; 5];
    let mut cases = 0;
    for dim in [Dim::One, Dim::Two] {
        for &k in &CHECK_CELLS {
            for _ in 0..cases_per_config {
                let (rho, v) = random_case(&mut rng, dim, k);
                let (_, w) = random_case(&mut rng, dim, k);
                let (a, b) = compatibility_sides(&rho, &v);
                worst[0] = worst[0].max(relative_defect(a, b));
                let (a, b) = inverse_inequality_sides(&v);
                worst[1] = worst[1].max(a / b);
                let (a, b) = sbp_sides(&v, &v);
                worst[2] = worst[2].max(relative_defect(a, b));
                let (a, b) = sbp_sides(&v, &w);
                worst[3] = worst[3].max(relative_defect(a, b));
                let (t, scale) = telescoping_sides(&v.scale_by(&rho));
                worst[4] = worst[4].max(t.abs() / scale);
                cases += 1;
            }
        }
    }
    let mk = |name, worst: f64, tolerance: f64| CheckResult {
        name,
        cases,
        worst,
        tolerance,
        passed: worst <= tolerance,
    };
    CheckReport {
        seed,
        results: vec![
            mk("advection_compatibility", worst[0], IDENTITY_TOLERANCE),
            mk("inverse_inequality", worst[1], 1.0),
            mk("sbp_quadratic", worst[2], IDENTITY_TOLERANCE),
            mk("sbp_bilinear", worst[3], IDENTITY_TOLERANCE),
            mk("telescoping", worst[4], IDENTITY_TOLERANCE),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes() {
        let r = run_identity_checks(7, 5);
        assert!(r.all_passed(), "{r:?}");
        assert_eq!(r.results[0].cases, 30);
    }
}
