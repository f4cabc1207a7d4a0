//! Assembly of `H(n) = -Δ + Σ_j V(x_j) + U` restricted to a cube.
//!
//! The restriction keeps the full diagonal `2dn` at every site and drops the
//! hopping terms that leave the cube, so `-Δ_Λ` stays positive semidefinite.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{sample_field, FieldSample, FieldSpec, Region};
use crate::lattice::{Cube, ParticleConfig};

/// Pair interaction `Φ` of range `r0`, tabulated on distances `0..=r0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    pub r0: u64,
    pub phi: Vec<f64>,
}

impl InteractionSpec {
    /// `Φ ≡ u` on `[0, r0]`.
    pub fn constant(r0: u64, u: f64) -> Self {
        Self { r0, phi: vec![u; r0 as usize + 1] }
    }

    /// No interaction.
    pub fn none() -> Self {
        Self::constant(0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phi.len() != self.r0 as usize + 1 {
            return Err(Error::Parameter(format!(
                "interaction table has {} entries, expected r0 + 1 = {}",
                self.phi.len(),
                self.r0 + 1
            )));
        }
        if self.phi.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Parameter("interaction values must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn phi(&self, r: u64) -> f64 {
        if r > self.r0 {
            0.0
        } else {
            self.phi[r as usize]
        }
    }

    pub fn phi_max(&self) -> f64 {
        self.phi.iter().copied().fold(0.0, f64::max)
    }
}

/// `U(x) = Σ_{i<j} Φ(|x_i - x_j|)` with the max-norm on ℤ^d.
pub fn interaction_energy(x: &ParticleConfig, spec: &InteractionSpec) -> f64 {
    pair_energy(x.coords(), x.n(), x.d(), spec)
}

fn pair_energy(coords: &[i64], n: usize, d: usize, spec: &InteractionSpec) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let r = (0..d).map(|k| coords[i * d + k].abs_diff(coords[j * d + k])).max().unwrap_or(0);
            total += spec.phi(r);
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub n: usize,
    pub d: usize,
    pub field: FieldSpec,
    pub interaction: InteractionSpec,
}

impl HamiltonianSpec {
    pub fn new(n: usize, d: usize, field: FieldSpec, interaction: InteractionSpec) -> Result<Self> {
        let spec = Self { n, d, field, interaction };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 {
            return Err(Error::Parameter("n and d must be positive".into()));
        }
        if self.field.d != self.d {
            return Err(Error::Parameter(format!(
                "field dimension {} differs from particle dimension {}",
                self.field.d, self.d
            )));
        }
        self.field.validate()?;
        self.interaction.validate()
    }

    /// Same model with `n` particles.
    pub fn with_particles(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    /// Upper end of the Gershgorin envelope `4dn + n·V_max + U_max`.
    pub fn spectral_upper_bound(&self) -> f64 {
        let pairs = (self.n * (self.n.saturating_sub(1)) / 2) as f64;
        (4 * self.d * self.n) as f64 + self.n as f64 * self.field.v_max() + pairs * self.interaction.phi_max()
    }

    /// Samples the field on the particle hull of `cube` and assembles.
    pub fn assemble_trial(&self, cube: &Cube, trial: u64) -> Result<AssembledOperator> {
        let (lo, hi) = cube.particle_hull();
        let sample = sample_field(&self.field, &Region::new(lo, hi)?, trial)?;
        assemble(self, cube, &sample)
    }
}

/// Sparse symmetric matrix of a restricted operator, rows in cube order.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledOperator {
    cube: Cube,
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl AssembledOperator {
    /// `-Δ_Λ + W` on `cube` for an arbitrary potential `W`.
    pub fn with_potential(cube: &Cube, mut potential: impl FnMut(&[i64]) -> f64) -> Result<Self> {
        let dim = cube.dim()?;
        let nu = cube.nu();
        let lap_diag = 2.0 * nu as f64;
        let mut diag = Vec::with_capacity(dim);
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::with_capacity(dim * 2 * nu);
        let mut x = vec![0; nu];
        let mut nb = Vec::with_capacity(2 * nu);
        row_ptr.push(0);
        for i in 0..dim {
            cube.coords_at(i, &mut x);
            diag.push(lap_diag + potential(&x));
            cube.neighbor_indices(i, &mut nb);
            nb.sort_unstable();
            cols.extend_from_slice(&nb);
            row_ptr.push(cols.len());
        }
        let vals = vec![-1.0; cols.len()];
        Ok(Self { cube: cube.clone(), diag, row_ptr, cols, vals })
    }

    pub fn cube(&self) -> &Cube {
        &self.cube
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Off-diagonal `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// Stored off-diagonal entries (each unordered pair counted twice).
    pub fn nnz_offdiag(&self) -> usize {
        self.cols.len()
    }

    pub fn bandwidth(&self) -> usize {
        (0..self.dim()).flat_map(|i| self.row(i).map(move |(j, _)| i.abs_diff(j))).max().unwrap_or(0)
    }

    pub fn apply(&self, psi: &[f64]) -> Result<Vec<f64>> {
        if psi.len() != self.dim() {
            return Err(Error::invalid(format!(
                "vector of length {} for an operator of dimension {}",
                psi.len(),
                self.dim()
            )));
        }
        let mut out = vec![0.0; psi.len()];
        self.apply_into(psi, &mut out);
        Ok(out)
    }

    /// `out = A·psi`; lengths must equal `dim`.
    pub fn apply_into(&self, psi: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = self.diag[i] * psi[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * psi[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diag));
        for i in 0..n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Gershgorin enclosure `[min_i (a_ii - r_i), max_i (a_ii + r_i)]`.
    pub fn gershgorin(&self) -> (f64, f64) {
        (0..self.dim()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            let r: f64 = self.row(i).map(|(_, v)| v.abs()).sum();
            (lo.min(self.diag[i] - r), hi.max(self.diag[i] + r))
        })
    }

    /// Upper bound on the operator norm.
    pub fn norm_bound(&self) -> f64 {
        let (lo, hi) = self.gershgorin();
        lo.abs().max(hi.abs())
    }

    /// Debug export: `row col value` per stored entry, 0-based, diagonal first in each row.
    pub fn write_coo<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.dim() {
            writeln!(w, "{i} {i} {}", self.diag[i])?;
            for (j, v) in self.row(i) {
                writeln!(w, "{i} {j} {v}")?;
            }
        }
        Ok(())
    }
}

/// Assembles `H(n)` on `cube` from a realised field.
pub fn assemble(spec: &HamiltonianSpec, cube: &Cube, sample: &FieldSample) -> Result<AssembledOperator> {
    spec.validate()?;
    if cube.n() != spec.n || cube.d() != spec.d {
        return Err(Error::invalid(format!(
            "cube has n={}, d={} but the model has n={}, d={}",
            cube.n(),
            cube.d(),
            spec.n,
            spec.d
        )));
    }
    let (lo, hi) = cube.particle_hull();
    for corner in [&lo, &hi] {
        if !sample.region().contains(corner) {
            return Err(Error::Coverage { site: corner.clone() });
        }
    }
    let (n, d) = (spec.n, spec.d);
    AssembledOperator::with_potential(cube, |x| {
        let v: f64 = x.chunks_exact(d).map(|p| sample.get(p).expect("hull is covered")).sum();
        v + pair_energy(x, n, d, &spec.interaction)
    })
}

/// `A·psi`, see [`AssembledOperator::apply`].
pub fn apply(op: &AssembledOperator, psi: &[f64]) -> Result<Vec<f64>> {
    op.apply(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BaseLaw;
    use crate::seed;

    fn free(n: usize, d: usize) -> HamiltonianSpec {
        HamiltonianSpec::new(n, d, FieldSpec::constant(d, 0.0).unwrap(), InteractionSpec::none()).unwrap()
    }

    fn sample_1d(values: &[f64], lo: i64) -> FieldSample {
        let r = Region::new(vec![lo], vec![lo + values.len() as i64 - 1]).unwrap();
        FieldSample::from_values(r, values.to_vec()).unwrap()
    }

    #[test]
    fn interaction_examples() {
        let phi = InteractionSpec::constant(2, 1.0);
        let x = ParticleConfig::new(2, 1, vec![0, 3]).unwrap();
        assert_eq!(interaction_energy(&x, &phi), 0.0);
        let u = InteractionSpec::constant(2, 0.7);
        let x = ParticleConfig::new(2, 1, vec![0, 1]).unwrap();
        assert_eq!(interaction_energy(&x, &u), 0.7);
        let x = ParticleConfig::new(3, 1, vec![0, 1, 2]).unwrap();
        assert_eq!(interaction_energy(&x, &phi), 3.0);
        let x = ParticleConfig::new(1, 2, vec![0, 1]).unwrap();
        assert_eq!(interaction_energy(&x, &phi), 0.0);
        assert!(InteractionSpec { r0: 2, phi: vec![1.0] }.validate().is_err());
    }

    #[test]
    fn free_three_site_laplacian() {
        let cube = Cube::centered(1, 1, 1).unwrap();
        let op = free(1, 1).assemble_trial(&cube, 0).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        assert_eq!(op.to_dense(), expected);
        assert_eq!(op.apply(&[0.0, 1.0, 0.0]).unwrap(), vec![-1.0, 2.0, -1.0]);
        assert_eq!(op.apply(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(op.apply(&[1.0; 4]).is_err());
    }

    #[test]
    fn two_particle_on_site_interaction() {
        let spec = HamiltonianSpec::new(2, 1, FieldSpec::constant(1, 0.0).unwrap(), InteractionSpec::constant(0, 5.0))
            .unwrap();
        let cube = Cube::centered(2, 1, 1).unwrap();
        let op = spec.assemble_trial(&cube, 0).unwrap();
        assert_eq!(op.dim(), 9);
        for (i, p) in cube.points().unwrap().iter().enumerate() {
            let c = p.coords();
            let want = if c[0] == c[1] { 9.0 } else { 4.0 };
            assert_eq!(op.diagonal()[i], want, "at {c:?}");
        }
    }

    #[test]
    fn additive_potential() {
        let cube = Cube::centered(1, 1, 1).unwrap();
        let op = assemble(&free(1, 1), &cube, &sample_1d(&[0.3, 0.7, 0.2], -1)).unwrap();
        assert_eq!(op.diagonal(), &[2.3, 2.7, 2.2]);
    }

    #[test]
    fn coverage_is_checked() {
        let cube = Cube::centered(2, 1, 2).unwrap();
        let err = assemble(&free(2, 1), &cube, &sample_1d(&[0.0; 3], -1)).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
        let wrong = Cube::centered(1, 1, 1).unwrap();
        assert!(assemble(&free(2, 1), &wrong, &sample_1d(&[0.0; 3], -1)).is_err());
    }

    #[test]
    fn apply_matches_dense_multiply() {
        let spec = HamiltonianSpec::new(
            1,
            1,
            FieldSpec::iid(1, BaseLaw::Uniform { a: 3.0 }, 17).unwrap(),
            InteractionSpec::none(),
        )
        .unwrap();
        let cube = Cube::centered(1, 1, 2).unwrap();
        let op = spec.assemble_trial(&cube, 3).unwrap();
        let psi: Vec<f64> = (0..5).map(|i| seed::uniform(seed::mix(9, i)) - 0.5).collect();
        let dense = op.to_dense() * nalgebra::DVector::from_column_slice(&psi);
        for (a, b) in op.apply(&psi).unwrap().iter().zip(dense.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sparsity_counts_neighbor_pairs() {
        let cube = Cube::centered(2, 2, 1).unwrap();
        let op = free(2, 2).assemble_trial(&cube, 0).unwrap();
        // pairs along each of nu axes: side^{nu-1}·(side-1)
        let pairs = 4 * 3usize.pow(3) * 2;
        assert_eq!(op.nnz_offdiag(), 2 * pairs);
        assert_eq!(op.to_dense(), op.to_dense().transpose());
        assert_eq!(op.bandwidth(), cube.bandwidth());
    }

    #[test]
    fn coo_export() {
        let cube = Cube::centered(1, 1, 1).unwrap();
        let op = free(1, 1).assemble_trial(&cube, 0).unwrap();
        let mut buf = Vec::new();
        op.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3 + 4);
        assert!(text.starts_with("0 0 2\n0 1 -1\n"));
    }
}
