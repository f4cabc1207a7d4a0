//! Index arithmetic on ℤ^{nd} ≅ (ℤ^d)^n.
//!
//! Every matrix in this crate is indexed by the lexicographic enumeration of
//! [`Cube::points`]: the first coordinate varies slowest, the last fastest.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Max-norm `|x| = max_i |x_i|`.
pub fn max_norm(x: &[i64]) -> Result<u64> {
    if x.is_empty() {
        return Err(Error::invalid("max_norm of an empty vector"));
    }
    Ok(x.iter().map(|c| c.unsigned_abs()).max().unwrap_or(0))
}

/// Sum-norm `|x|_1 = Σ_i |x_i|`.
pub fn sum_norm(x: &[i64]) -> Result<u64> {
    if x.is_empty() {
        return Err(Error::invalid("sum_norm of an empty vector"));
    }
    Ok(x.iter().map(|c| c.unsigned_abs()).sum())
}

fn max_dist(a: &[i64], b: &[i64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap_or(0)
}

/// A point of ℤ^{nd}, read as `n` particle positions in ℤ^d.
///
/// Particle `j` (0-based) occupies `coords[j*d .. (j+1)*d]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParticleConfig {
    n: usize,
    d: usize,
    coords: Vec<i64>,
}

impl ParticleConfig {
    pub fn new(n: usize, d: usize, coords: Vec<i64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid("particle count and dimension must be positive"));
        }
        if coords.len() != n * d {
            return Err(Error::invalid(format!(
                "expected {} coordinates for n={n}, d={d}, got {}",
                n * d,
                coords.len()
            )));
        }
        Ok(Self { n, d, coords })
    }

    /// The configuration with all particles at the origin.
    pub fn origin(n: usize, d: usize) -> Result<Self> {
        Self::new(n, d, vec![0; n * d])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords
    }

    /// Position of particle `j` in ℤ^d.
    pub fn particle(&self, j: usize) -> &[i64] {
        &self.coords[j * self.d..(j + 1) * self.d]
    }

    pub fn particles(&self) -> impl Iterator<Item = &[i64]> {
        self.coords.chunks_exact(self.d)
    }

    pub fn max_norm(&self) -> u64 {
        max_norm(&self.coords).expect("coords are non-empty by construction")
    }

    /// Max-norm distance between two configurations of the same shape.
    pub fn distance(&self, other: &ParticleConfig) -> u64 {
        max_dist(&self.coords, &other.coords)
    }

    fn same_shape(&self, other: &ParticleConfig) -> bool {
        self.n == other.n && self.d == other.d
    }
}

/// `C^{(n)}_L(u) = { y ∈ ℤ^{nd} : |y - u| ≤ L }` in the max-norm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cube {
    center: ParticleConfig,
    radius: usize,
}

impl Cube {
    pub fn new(center: ParticleConfig, radius: usize) -> Self {
        Self { center, radius }
    }

    /// Cube of radius `radius` centred at the origin of ℤ^{nd}.
    pub fn centered(n: usize, d: usize, radius: usize) -> Result<Self> {
        Ok(Self::new(ParticleConfig::origin(n, d)?, radius))
    }

    pub fn center(&self) -> &ParticleConfig {
        &self.center
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn n(&self) -> usize {
        self.center.n
    }

    pub fn d(&self) -> usize {
        self.center.d
    }

    /// Total lattice dimension `nd`.
    pub fn nu(&self) -> usize {
        self.center.n * self.center.d
    }

    /// Points per coordinate axis, `2L + 1`.
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    /// Cardinality `(2L+1)^{nd}`, or a size-limit error on overflow.
    pub fn dim(&self) -> Result<usize> {
        let side = self.side();
        (0..self.nu()).try_fold(1usize, |acc, _| acc.checked_mul(side)).ok_or_else(|| {
            Error::SizeLimit(format!("cube with side {side} in dimension {} overflows usize", self.nu()))
        })
    }

    pub fn contains(&self, x: &ParticleConfig) -> bool {
        x.same_shape(&self.center) && x.distance(&self.center) <= self.radius as u64
    }

    pub fn contains_coords(&self, x: &[i64]) -> bool {
        x.len() == self.nu() && max_dist(x, &self.center.coords) <= self.radius as u64
    }

    /// Matrix index of `x` in the lexicographic ordering, if `x` lies in the cube.
    pub fn index_of(&self, x: &[i64]) -> Option<usize> {
        if !self.contains_coords(x) {
            return None;
        }
        let side = self.side() as i64;
        let r = self.radius as i64;
        let idx = x.iter().zip(&self.center.coords).fold(0i64, |acc, (xi, ci)| acc * side + (xi - ci + r));
        Some(idx as usize)
    }

    /// Writes the coordinates of the point with matrix index `index` into `out`.
    pub fn coords_at(&self, index: usize, out: &mut [i64]) {
        let side = self.side();
        let r = self.radius as i64;
        let mut rem = index;
        for k in (0..self.nu()).rev() {
            out[k] = (rem % side) as i64 - r + self.center.coords[k];
            rem /= side;
        }
    }

    pub fn point_at(&self, index: usize) -> ParticleConfig {
        let mut coords = vec![0; self.nu()];
        self.coords_at(index, &mut coords);
        ParticleConfig { n: self.n(), d: self.d(), coords }
    }

    /// All points in lexicographic order; the position in this list is the
    /// matrix index used by every operator on the cube.
    pub fn points(&self) -> Result<Vec<ParticleConfig>> {
        let dim = self.dim()?;
        Ok((0..dim).map(|i| self.point_at(i)).collect())
    }

    /// Points at max-norm distance exactly `L` from the centre.
    pub fn inner_boundary(&self) -> Result<Vec<ParticleConfig>> {
        Ok(self.inner_boundary_indices()?.into_iter().map(|i| self.point_at(i)).collect())
    }

    /// Matrix indices of [`Cube::inner_boundary`].
    pub fn inner_boundary_indices(&self) -> Result<Vec<usize>> {
        if self.radius == 0 {
            return Err(Error::EmptyBoundary);
        }
        let dim = self.dim()?;
        let side = self.side();
        let last = side - 1;
        Ok((0..dim)
            .filter(|&i| {
                let mut rem = i;
                (0..self.nu()).any(|_| {
                    let digit = rem % side;
                    rem /= side;
                    digit == 0 || digit == last
                })
            })
            .collect())
    }

    /// Lattice points of the cube at sum-norm distance 1 from `x`.
    pub fn nearest_neighbors(&self, x: &ParticleConfig) -> Result<Vec<ParticleConfig>> {
        if !self.contains(x) {
            return Err(Error::invalid(format!("{:?} lies outside the cube", x.coords)));
        }
        let mut out = Vec::with_capacity(2 * self.nu());
        for k in 0..self.nu() {
            for step in [-1i64, 1] {
                let mut y = x.clone();
                y.coords[k] += step;
                if self.contains(&y) {
                    out.push(y);
                }
            }
        }
        Ok(out)
    }

    /// Matrix-index neighbours of the point with index `index`; the offset
    /// of coordinate `k` is `(2L+1)^{nd-1-k}`.
    pub(crate) fn neighbor_indices(&self, index: usize, out: &mut Vec<usize>) {
        out.clear();
        let side = self.side();
        let mut stride = 1usize;
        let mut rem = index;
        for _ in 0..self.nu() {
            let digit = rem % side;
            rem /= side;
            if digit > 0 {
                out.push(index - stride);
            }
            if digit + 1 < side {
                out.push(index + stride);
            }
            stride *= side;
        }
    }

    /// Half-bandwidth of the lexicographically ordered nearest-neighbour matrix.
    pub fn bandwidth(&self) -> usize {
        if self.radius == 0 {
            0
        } else {
            self.side().pow(self.nu() as u32 - 1)
        }
    }

    /// Per-axis bounding box in ℤ^d of all particle projections.
    pub fn particle_hull(&self) -> (Vec<i64>, Vec<i64>) {
        let d = self.d();
        let r = self.radius as i64;
        let mut lo = vec![i64::MAX; d];
        let mut hi = vec![i64::MIN; d];
        for p in self.center.particles() {
            for k in 0..d {
                lo[k] = lo[k].min(p[k] - r);
                hi[k] = hi[k].max(p[k] + r);
            }
        }
        (lo, hi)
    }
}

/// Lexicographic enumeration of the cube, see [`Cube::points`].
pub fn cube_points(c: &Cube) -> Result<Vec<ParticleConfig>> {
    c.points()
}

pub fn inner_boundary(c: &Cube) -> Result<Vec<ParticleConfig>> {
    c.inner_boundary()
}

pub fn nearest_neighbors(x: &ParticleConfig, c: &Cube) -> Result<Vec<ParticleConfig>> {
    c.nearest_neighbors(x)
}

/// `min_{i≠j} |x_i - x_j|` over particle pairs.
pub fn min_separation(x: &ParticleConfig) -> Result<u64> {
    if x.n < 2 {
        return Err(Error::invalid("min_separation needs at least two particles"));
    }
    let mut best = u64::MAX;
    for i in 0..x.n {
        for j in i + 1..x.n {
            best = best.min(max_dist(x.particle(i), x.particle(j)));
        }
    }
    Ok(best)
}

/// `x^{k,m} = C_{k,m}·(1, 2, ..., nd)` with `C_{k,m} = r0 + 2km + 1`.
///
/// The result lies in `B_{k,m} = { x : min_{i≠j}|x_i - x_j| > r0 + 2km }`.
pub fn separated_config(n: usize, d: usize, r0: u64, k: u64, m: u64) -> Result<ParticleConfig> {
    if k == 0 || m == 0 {
        return Err(Error::Precondition("separated_config needs k >= 1 and m >= 1".into()));
    }
    let scale = r0
        .checked_add(2u64.checked_mul(k).and_then(|v| v.checked_mul(m)).unwrap_or(u64::MAX))
        .and_then(|v| v.checked_add(1))
        .filter(|&v| v <= i64::MAX as u64)
        .ok_or_else(|| Error::SizeLimit("separation constant overflows".into()))?;
    let coords = (1..=(n * d) as i64)
        .map(|i| i.checked_mul(scale as i64))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::SizeLimit("separated configuration overflows".into()))?;
    ParticleConfig::new(n, d, coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pc(n: usize, d: usize, c: &[i64]) -> ParticleConfig {
        ParticleConfig::new(n, d, c.to_vec()).unwrap()
    }

    #[test]
    fn norms() {
        assert_eq!(max_norm(&[3, -5, 1]).unwrap(), 5);
        assert_eq!(max_norm(&[0, 0]).unwrap(), 0);
        assert_eq!(max_norm(&[-7]).unwrap(), 7);
        assert_eq!(sum_norm(&[3, -5, 1]).unwrap(), 9);
        assert_eq!(sum_norm(&[0, 0, 0]).unwrap(), 0);
        assert_eq!(sum_norm(&[1, 1]).unwrap(), 2);
        assert!(matches!(max_norm(&[]), Err(Error::InvalidInput(_))));
        assert!(matches!(sum_norm(&[]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn config_shape_is_checked() {
        assert!(ParticleConfig::new(2, 1, vec![1]).is_err());
        assert!(ParticleConfig::new(0, 1, vec![]).is_err());
        let x = pc(2, 2, &[1, 2, 3, 4]);
        assert_eq!(x.particle(1), &[3, 4]);
    }

    #[test]
    fn cube_enumeration() {
        let c = Cube::centered(1, 1, 1).unwrap();
        let pts: Vec<_> = c.points().unwrap().iter().map(|p| p.coords()[0]).collect();
        assert_eq!(pts, vec![-1, 0, 1]);

        let c = Cube::centered(2, 1, 1).unwrap();
        let pts = cube_points(&c).unwrap();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0].coords(), &[-1, -1]);
        assert_eq!(pts[8].coords(), &[1, 1]);

        assert_eq!(Cube::centered(1, 2, 2).unwrap().points().unwrap().len(), 25);
    }

    #[test]
    fn cube_dim_overflow() {
        let c = Cube::centered(8, 3, 1000).unwrap();
        assert!(matches!(c.dim(), Err(Error::SizeLimit(_))));
    }

    #[test]
    fn boundary_examples() {
        let c = Cube::centered(1, 1, 2).unwrap();
        let b: Vec<_> = inner_boundary(&c).unwrap().iter().map(|p| p.coords()[0]).collect();
        assert_eq!(b, vec![-2, 2]);
        assert_eq!(Cube::centered(1, 2, 1).unwrap().inner_boundary().unwrap().len(), 8);
        assert_eq!(Cube::centered(2, 1, 1).unwrap().inner_boundary().unwrap().len(), 8);
        assert_eq!(Cube::centered(1, 1, 0).unwrap().inner_boundary(), Err(Error::EmptyBoundary));
    }

    #[test]
    fn neighbor_examples() {
        let c = Cube::centered(1, 1, 2).unwrap();
        let nn = |x: i64| -> Vec<i64> {
            nearest_neighbors(&pc(1, 1, &[x]), &c).unwrap().iter().map(|p| p.coords()[0]).collect()
        };
        assert_eq!(nn(0), vec![-1, 1]);
        assert_eq!(nn(2), vec![1]);
        assert!(nearest_neighbors(&pc(1, 1, &[3]), &c).is_err());

        let c2 = Cube::centered(2, 1, 1).unwrap();
        let mut got: Vec<Vec<i64>> =
            c2.nearest_neighbors(&pc(2, 1, &[0, 0])).unwrap().into_iter().map(|p| p.coords().to_vec()).collect();
        got.sort();
        assert_eq!(got, vec![vec![-1, 0], vec![0, -1], vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn separation_examples() {
        assert_eq!(min_separation(&pc(2, 1, &[0, 5])).unwrap(), 5);
        assert_eq!(min_separation(&pc(3, 2, &[0, 0, 3, 1, 10, 10])).unwrap(), 3);
        assert_eq!(min_separation(&pc(2, 1, &[4, 4])).unwrap(), 0);
        assert!(min_separation(&pc(1, 1, &[4])).is_err());

        let x = separated_config(2, 1, 2, 1, 3).unwrap();
        assert_eq!(x.coords(), &[9, 18]);
        assert_eq!(min_separation(&x).unwrap(), 9);
        assert_eq!(separated_config(2, 1, 0, 1, 1).unwrap().coords(), &[3, 6]);
        assert_eq!(separated_config(3, 1, 1, 1, 1).unwrap().coords(), &[4, 8, 12]);
        assert!(separated_config(2, 1, 0, 0, 1).is_err());
    }

    #[test]
    fn index_roundtrip_and_bandwidth() {
        let c = Cube::new(pc(2, 1, &[3, -2]), 2);
        let mut nb = Vec::new();
        let mut max_gap = 0;
        for (i, p) in c.points().unwrap().iter().enumerate() {
            assert_eq!(c.index_of(p.coords()), Some(i));
            c.neighbor_indices(i, &mut nb);
            for &j in &nb {
                max_gap = max_gap.max(i.abs_diff(j));
                assert_eq!(c.point_at(j).distance(p), 1);
            }
        }
        assert_eq!(max_gap, c.bandwidth());
    }

    fn small_cube() -> impl Strategy<Value = Cube> {
        (1usize..=3, 1usize..=2, 0usize..=2, -3i64..=3).prop_filter_map("keep cubes small", |(n, d, l, shift)| {
            if (2 * l + 1).pow((n * d) as u32) > 800 {
                return None;
            }
            let coords = (0..n * d).map(|k| shift * (k as i64 % 2)).collect();
            Some(Cube::new(ParticleConfig::new(n, d, coords).unwrap(), l))
        })
    }

    proptest! {
        #[test]
        fn cube_cardinality(c in small_cube()) {
            let expected = (2 * c.radius() + 1).pow(c.nu() as u32);
            prop_assert_eq!(c.points().unwrap().len(), expected);
        }

        #[test]
        fn boundary_is_the_outer_shell(c in small_cube()) {
            prop_assume!(c.radius() >= 1);
            for y in c.inner_boundary().unwrap() {
                prop_assert!(c.contains(&y));
                prop_assert_eq!(y.distance(c.center()), c.radius() as u64);
            }
        }

        #[test]
        fn neighbors_are_symmetric(c in small_cube()) {
            let pts = c.points().unwrap();
            for x in &pts {
                let nx = c.nearest_neighbors(x).unwrap();
                let interior = x.distance(c.center()) < c.radius() as u64;
                if interior {
                    prop_assert_eq!(nx.len(), 2 * c.nu());
                }
                for y in &nx {
                    prop_assert!(c.nearest_neighbors(y).unwrap().contains(x));
                }
            }
        }

        #[test]
        fn separated_configs_lie_in_b_km(n in 2usize..=4, d in 1usize..=3, r0 in 0u64..5, k in 1u64..4, m in 1u64..6) {
            let x = separated_config(n, d, r0, k, m).unwrap();
            prop_assert!(min_separation(&x).unwrap() > r0 + 2 * k * m);
        }
    }
}
