//! Lattice basis reduction and box bases for lattices of small rank.

use serde::Serialize;

use crate::error::{Error, Result};

/// Largest rank handled.
pub const MAX_DIM: usize = 6;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn gram_schmidt(b: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
    let k = b.len();
    let mut star: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut mu = vec![vec![0.0; k]; k];
    let mut sq = vec![0.0; k];
    for i in 0..k {
        let mut v = b[i].clone();
        for j in 0..i {
            mu[i][j] = dot(&b[i], &star[j]) / sq[j];
            for (x, y) in v.iter_mut().zip(&star[j]) {
                *x -= mu[i][j] * y;
            }
        }
        sq[i] = dot(&v, &v);
        star.push(v);
    }
    (star, mu, sq)
}

/// LLL with parameter `delta` on the rows of `basis`. Returns the integer
/// unimodular `T` with `reduced = T · basis`.
pub fn lll(basis: &[Vec<f64>], delta: f64) -> (Vec<Vec<f64>>, Vec<Vec<i64>>) {
    let k = basis.len();
    let mut b = basis.to_vec();
    let mut t: Vec<Vec<i64>> = (0..k)
        .map(|i| (0..k).map(|j| i64::from(i == j)).collect())
        .collect();
    if k == 0 {
        return (b, t);
    }
    let mut i = 1;
    let mut guard = 0usize;
    while i < k {
        guard += 1;
        if guard > 100_000 {
            break;
        }
        for j in (0..i).rev() {
            let (_, mu, _) = gram_schmidt(&b);
            let q = mu[i][j].round();
            if q != 0.0 {
                let qi = q as i64;
                let bj = b[j].clone();
                for (x, y) in b[i].iter_mut().zip(&bj) {
                    *x -= q * y;
                }
                let tj = t[j].clone();
                for (x, y) in t[i].iter_mut().zip(&tj) {
                    *x -= qi * y;
                }
            }
        }
        let (_, mu, sq) = gram_schmidt(&b);
        if sq[i] >= (delta - mu[i][i - 1] * mu[i][i - 1]) * sq[i - 1] {
            i += 1;
        } else {
            b.swap(i, i - 1);
            t.swap(i, i - 1);
            i = (i - 1).max(1);
        }
    }
    (b, t)
}

/// `LLL` on an integer basis, returning exact reduced rows.
pub fn lll_integer(basis: &[Vec<i64>], delta: f64) -> (Vec<Vec<i64>>, Vec<Vec<i64>>) {
    let fb: Vec<Vec<f64>> = basis
        .iter()
        .map(|r| r.iter().map(|&x| x as f64).collect())
        .collect();
    let (_, t) = lll(&fb, delta);
    let reduced = mat_mul_int(&t, basis);
    (reduced, t)
}

pub(crate) fn mat_mul_int(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| row.iter().zip(b).map(|(x, r)| x * r[j]).sum())
                .collect()
        })
        .collect()
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a = m.to_vec();
    let mut d = 1.0;
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        if a[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            a.swap(piv, c);
            d = -d;
        }
        d *= a[c][c];
        let (top, rest) = a.split_at_mut(c + 1);
        let pivot = &top[c];
        for row in rest.iter_mut() {
            let f = row[c] / pivot[c];
            for (x, y) in row[c..n].iter_mut().zip(&pivot[c..n]) {
                *x -= f * y;
            }
        }
    }
    d
}

/// Inverse of a square matrix; `None` if singular.
pub fn inverse(m: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| f64::from(u8::from(i == j))));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n).max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))?;
        if a[piv][c].abs() < 1e-300 {
            return None;
        }
        a.swap(piv, c);
        let d = a[c][c];
        a[c].iter_mut().for_each(|x| *x /= d);
        for r in 0..n {
            if r != c {
                let f = a[r][c];
                if f != 0.0 {
                    let rc = a[c].clone();
                    for (x, y) in a[r].iter_mut().zip(&rc) {
                        *x -= f * y;
                    }
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// `1 / max_σ |Σ σᵢ uᵢ|` over sign vectors, `uᵢ` the unit generator directions.
/// With `Nᵢ = c/|vᵢ|` the box `{Σ nᵢvᵢ : |nᵢ| < tNᵢ}` lies in the open ball of radius `t`.
pub fn box_constant(gens: &[Vec<f64>]) -> f64 {
    let k = gens.len();
    if k == 0 {
        return 1.0;
    }
    let units: Vec<Vec<f64>> = gens
        .iter()
        .map(|v| {
            let n = norm(v);
            v.iter().map(|x| x / n).collect()
        })
        .collect();
    let dim = gens[0].len();
    let mut worst = 0.0f64;
    // σ and −σ give the same norm, so fix σ₀ = +1.
    for mask in 0..(1usize << (k - 1)) {
        let mut s = vec![0.0; dim];
        for (i, u) in units.iter().enumerate() {
            let sign = if i > 0 && mask >> (i - 1) & 1 == 1 {
                -1.0
            } else {
                1.0
            };
            for (x, y) in s.iter_mut().zip(u) {
                *x += sign * y;
            }
        }
        worst = worst.max(norm(&s));
    }
    1.0 / worst
}

/// A reduced basis `v₁..v_d` with box sizes `N₁..N_d`.
#[derive(Clone, Debug, Serialize)]
pub struct BoxBasis {
    /// Reduced generators as rows.
    pub generators: Vec<Vec<f64>>,
    /// `generators = transform · input`.
    pub transform: Vec<Vec<i64>>,
    pub sizes: Vec<f64>,
    /// `c` with `Nᵢ = c/|vᵢ|`.
    pub outer_constant: f64,
    /// Certified `κ`: `Ball(κt) ∩ Γ ⊆ {Σ nᵢvᵢ : |nᵢ| < tNᵢ}` for every `t > 0`.
    pub inner_factor: f64,
    /// Smallest `|w|/max|nᵢ|/Nᵢ` over enumerated lattice vectors.
    pub inner_factor_enumerated: f64,
    pub enumeration_radius: f64,
    pub enumerated_vectors: u64,
    /// `|det Γ|`.
    pub covolume: f64,
    /// `|det Γ| · Π Nᵢ`.
    pub covolume_times_sizes: f64,
    /// Containment checks at sampled radii all passed.
    pub outer_verified: bool,
    pub inner_verified: bool,
}

impl BoxBasis {
    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    /// `Σ nᵢ vᵢ`.
    pub fn combine(&self, n: &[i64]) -> Vec<f64> {
        let dim = self.generators[0].len();
        let mut x = vec![0.0; dim];
        for (ni, v) in n.iter().zip(&self.generators) {
            for (a, b) in x.iter_mut().zip(v) {
                *a += *ni as f64 * b;
            }
        }
        x
    }
}

/// Reduced box basis of the full-rank lattice spanned by the rows of `gens`.
pub fn lattice_box_basis(gens: &[Vec<f64>]) -> Result<BoxBasis> {
    let d = gens.len();
    if d > MAX_DIM {
        return Err(Error::DimensionCapExceeded { d, cap: MAX_DIM });
    }
    if d == 0 || gens.iter().any(|r| r.len() != d) {
        return Err(Error::RankDeficient);
    }
    let covolume = det(gens).abs();
    let scale = gens.iter().map(|r| norm(r)).fold(0.0, f64::max);
    if covolume.is_nan() || covolume <= 1e-12 * scale.powi(d as i32) {
        return Err(Error::RankDeficient);
    }
    let (generators, transform) = lll(gens, 0.99);
    let c = box_constant(&generators);
    let sizes: Vec<f64> = generators.iter().map(|v| c / norm(v)).collect();
    // Rows of V⁻ᵀ give coordinates: n = x · V⁻¹ for x = n · V.
    let vinv = inverse(&generators).ok_or(Error::RankDeficient)?;
    let col_norms: Vec<f64> = (0..d)
        .map(|i| (0..d).map(|r| vinv[r][i] * vinv[r][i]).sum::<f64>().sqrt())
        .collect();
    let inner_factor = 1.0
        / col_norms
            .iter()
            .zip(&sizes)
            .map(|(cn, n)| cn / n)
            .fold(0.0, f64::max);
    let radius = 4.0 * sizes.iter().map(|n| 1.0 / n).fold(0.0, f64::max);
    let mut basis = BoxBasis {
        covolume_times_sizes: covolume * sizes.iter().product::<f64>(),
        generators,
        transform,
        sizes,
        outer_constant: c,
        inner_factor,
        inner_factor_enumerated: f64::INFINITY,
        enumeration_radius: radius,
        enumerated_vectors: 0,
        covolume,
        outer_verified: false,
        inner_verified: false,
    };
    certify(&mut basis, &col_norms);
    Ok(basis)
}

/// Every integer vector with `|Σ nᵢvᵢ| ≤ radius`, excluding zero.
pub fn short_vectors(b: &BoxBasis, col_norms: &[f64], radius: f64) -> Vec<(Vec<i64>, f64)> {
    let d = b.dim();
    let bounds: Vec<i64> = col_norms
        .iter()
        .map(|c| (radius * c).floor() as i64)
        .collect();
    let mut out = Vec::new();
    let mut n: Vec<i64> = bounds.iter().map(|&x| -x).collect();
    loop {
        if n.iter().any(|&x| x != 0) {
            let len = norm(&b.combine(&n));
            if len <= radius {
                out.push((n.clone(), len));
            }
        }
        let mut i = 0;
        loop {
            if i == d {
                return out;
            }
            if n[i] < bounds[i] {
                n[i] += 1;
                break;
            }
            n[i] = -bounds[i];
            i += 1;
        }
    }
}

fn certify(b: &mut BoxBasis, col_norms: &[f64]) {
    let vecs = short_vectors(b, col_norms, b.enumeration_radius);
    b.enumerated_vectors = vecs.len() as u64;
    let tau = |n: &[i64]| -> f64 {
        n.iter()
            .zip(&b.sizes)
            .map(|(x, s)| x.unsigned_abs() as f64 / s)
            .fold(0.0, f64::max)
    };
    let mut kappa = f64::INFINITY;
    let mut outer_ok = true;
    for (n, len) in &vecs {
        let t = tau(n);
        kappa = kappa.min(len / t);
        // Outer containment: the vector lies in every box of radius above τ, so
        // it must lie in the ball of that radius.
        if *len >= t * (1.0 + 1e-12) {
            outer_ok = false;
        }
    }
    b.inner_factor_enumerated = kappa;
    b.outer_verified = outer_ok;
    b.inner_verified = kappa >= b.inner_factor * (1.0 - 1e-9);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_lattice() {
        for d in 1..=4 {
            let id: Vec<Vec<f64>> = (0..d)
                .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            let b = lattice_box_basis(&id).unwrap();
            for v in &b.generators {
                assert!((norm(v) - 1.0).abs() < 1e-12);
            }
            let want = 1.0 / (d as f64).sqrt();
            assert!(b.sizes.iter().all(|n| (n - want).abs() < 1e-12));
            assert!(b.outer_verified && b.inner_verified);
        }
    }

    #[test]
    fn rectangular_lattice() {
        let b = lattice_box_basis(&[vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap();
        let mut lens: Vec<f64> = b.generators.iter().map(|v| norm(v)).collect();
        lens.sort_by(f64::total_cmp);
        assert_eq!(lens, vec![2.0, 3.0]);
        // Sizes proportional to (1/2, 1/3) with one common factor.
        let ratio: Vec<f64> = b
            .generators
            .iter()
            .zip(&b.sizes)
            .map(|(v, n)| n * norm(v))
            .collect();
        assert!((ratio[0] - ratio[1]).abs() < 1e-12);
        assert!(b.outer_verified && b.inner_verified);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            lattice_box_basis(&[vec![1.0, 2.0], vec![2.0, 4.0]]),
            Err(Error::RankDeficient)
        ));
        let big: Vec<Vec<f64>> = (0..7)
            .map(|i| (0..7).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        assert!(matches!(
            lattice_box_basis(&big),
            Err(Error::DimensionCapExceeded { d: 7, .. })
        ));
    }

    #[test]
    fn lll_transform_is_consistent() {
        let basis = vec![
            vec![1.0, 1.0, 1.0],
            vec![-1.0, 0.0, 2.0],
            vec![3.0, 5.0, 6.0],
        ];
        let (red, t) = lll(&basis, 0.99);
        for (r, row) in red.iter().zip(&t) {
            for k in 0..3 {
                let v: f64 = row.iter().zip(&basis).map(|(c, b)| *c as f64 * b[k]).sum();
                assert!((v - r[k]).abs() < 1e-9);
            }
        }
        let ft: Vec<Vec<f64>> = t
            .iter()
            .map(|r| r.iter().map(|&x| x as f64).collect())
            .collect();
        assert!((det(&ft).abs() - 1.0).abs() < 1e-9);
    }
}
