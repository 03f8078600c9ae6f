//! Dilated tori, their duals, complement subtori, lattice bases and local phases.

pub mod bohr_basis;
pub mod lattice;
pub mod phase;

use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{rational_to_f64, Rational};
use lattice::{box_constant, inverse, lll, norm};

pub use bohr_basis::{bohr_basis, BohrBasis};
pub use lattice::{lattice_box_basis, BoxBasis};
pub use phase::{
    second_difference, validate_ap_identity, validate_identity, validate_phase, Arity, Certificate,
    Identity, LocalPhase, PhaseRule, SampleBudget, SecondDifference,
};

/// `G = Π R/λᵢZ` with every `λᵢ ≥ 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DilatedTorus {
    lambdas: Vec<f64>,
}

impl DilatedTorus {
    pub fn new(lambdas: Vec<f64>) -> Result<Self> {
        if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 1.0)) {
            return Err(Error::invalid("lambdas", format!("period {l} is not >= 1")));
        }
        Ok(DilatedTorus { lambdas })
    }

    /// The zero-dimensional torus.
    pub fn point() -> Self {
        DilatedTorus { lambdas: vec![] }
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn volume(&self) -> f64 {
        self.lambdas.iter().product()
    }

    /// Reduces each coordinate into `[0, λᵢ)`.
    pub fn reduce(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok(x.iter()
            .zip(&self.lambdas)
            .map(|(v, l)| v.rem_euclid(*l))
            .collect())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Distance from `x` to the lattice `Π λᵢZ`.
pub fn torus_norm(g: &DilatedTorus, x: &[f64]) -> Result<f64> {
    g.check(x)?;
    Ok(x.iter()
        .zip(&g.lambdas)
        .map(|(v, l)| {
            let r = v.rem_euclid(*l);
            let d = r.min(l - r);
            d * d
        })
        .sum::<f64>()
        .sqrt())
}

/// `k = (mᵢ/λᵢ)ᵢ` in the dual lattice `Π (1/λᵢ)Z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualFrequency {
    pub torus: DilatedTorus,
    pub numerators: Vec<i64>,
}

impl DualFrequency {
    pub fn new(torus: DilatedTorus, numerators: Vec<i64>) -> Result<Self> {
        if numerators.len() != torus.dim() {
            return Err(Error::DimensionMismatch {
                expected: torus.dim(),
                found: numerators.len(),
            });
        }
        Ok(DualFrequency { torus, numerators })
    }

    pub fn components(&self) -> Vec<f64> {
        self.numerators
            .iter()
            .zip(self.torus.lambdas())
            .map(|(&m, l)| m as f64 / l)
            .collect()
    }

    /// `|k|`.
    pub fn magnitude(&self) -> f64 {
        norm(&self.components())
    }

    pub fn gcd(&self) -> i64 {
        self.numerators.iter().fold(0i64, |g, &m| g.gcd(&m))
    }

    pub fn is_zero(&self) -> bool {
        self.numerators.iter().all(|&m| m == 0)
    }

    /// Not of the form `n·k'` with `n ≥ 2`.
    pub fn is_irreducible(&self) -> bool {
        !self.is_zero() && self.gcd() == 1
    }

    /// `k · x` as a real number.
    pub fn pair(&self, x: &[f64]) -> f64 {
        self.components().iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// Integer kernel of `z ↦ Σ mᵢ zᵢ` via unimodular column operations.
/// Returns a basis of the kernel (rows) and the index of the surviving pivot.
pub fn integer_kernel(m: &[i64]) -> Result<Vec<Vec<i64>>> {
    let d = m.len();
    let mut r = m.to_vec();
    let mut u: Vec<Vec<i64>> = (0..d)
        .map(|i| (0..d).map(|j| i64::from(i == j)).collect())
        .collect();
    // Columns of u are tracked as rows here: u[j] is column j.
    loop {
        let nz: Vec<usize> = (0..d).filter(|&i| r[i] != 0).collect();
        if nz.len() <= 1 {
            let pivot = *nz.first().ok_or(Error::ZeroFrequency)?;
            return Ok((0..d)
                .filter(|&j| j != pivot)
                .map(|j| u[j].clone())
                .collect());
        }
        let i = *nz.iter().min_by_key(|&&i| r[i].abs()).unwrap();
        for &j in &nz {
            if j != i {
                let q = r[j].div_euclid(r[i]);
                r[j] -= q * r[i];
                let ui = u[i].clone();
                for (x, y) in u[j].iter_mut().zip(&ui) {
                    *x -= q * y;
                }
            }
        }
    }
}

/// The subtorus `k^⊥ ≅ G' = Π R/Nᵢ⁻¹Z` and the coordinate map between them.
#[derive(Clone, Debug, Serialize)]
pub struct ComplementTorus {
    pub torus: DilatedTorus,
    /// Integer kernel basis before reduction (rows, in `Z^d`).
    pub kernel_basis: Vec<Vec<i64>>,
    /// Reduced integer kernel basis: `reduced = transform · kernel_basis`.
    pub reduced_basis: Vec<Vec<i64>>,
    pub transform: Vec<Vec<i64>>,
    /// Generators `vᵢ = (λⱼ zᵢⱼ)ⱼ` of `Γ ∩ k^⊥`.
    pub generators: Vec<Vec<f64>>,
    pub sizes: Vec<f64>,
    /// `vol(G') / (|k| vol(G))`.
    pub volume_ratio: f64,
    #[serde(skip)]
    lambdas: Vec<f64>,
    #[serde(skip)]
    gram_inverse: Vec<Vec<f64>>,
    #[serde(skip)]
    transform_inv_t: Vec<Vec<Rational>>,
}

impl ComplementTorus {
    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    /// `ψ(x)` for `x ∈ k^⊥` in the ambient coordinates, reduced modulo the periods.
    pub fn psi(&self, x: &[f64]) -> Result<Vec<f64>> {
        let t = self.coords(x)?;
        Ok(t.iter()
            .zip(&self.sizes)
            .zip(self.torus.lambdas())
            .map(|((ti, n), l)| (ti / n).rem_euclid(*l))
            .collect())
    }

    /// Coordinates `t` with `x = Σ tᵢ vᵢ` (least squares onto the span).
    pub fn coords(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.lambdas.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lambdas.len(),
                found: x.len(),
            });
        }
        let b: Vec<f64> = self.generators.iter().map(|v| lattice::dot(v, x)).collect();
        Ok(self
            .gram_inverse
            .iter()
            .map(|row| lattice::dot(row, &b))
            .collect())
    }

    /// `ψ⁻¹(y) = Σ yᵢ Nᵢ vᵢ`, a lift of `y ∈ G'` to `k^⊥ ⊂ R^d`.
    pub fn psi_inv(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        let mut x = vec![0.0; self.lambdas.len()];
        for ((yi, n), v) in y.iter().zip(&self.sizes).zip(&self.generators) {
            for (a, b) in x.iter_mut().zip(v) {
                *a += yi * n * b;
            }
        }
        Ok(x)
    }

    /// `ψ` on the point `Σ qⱼ λ∘zⱼ` (`zⱼ` the unreduced kernel basis), as exact
    /// fractions of each period in `[0, 1)`.
    pub fn psi_rational(&self, q: &[Rational]) -> Result<Vec<Rational>> {
        if q.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: q.len(),
            });
        }
        Ok(self
            .transform_inv_t
            .iter()
            .map(|row| {
                let t = row
                    .iter()
                    .zip(q)
                    .fold(Rational::zero(), |acc, (a, b)| acc + a * b);
                t - t.floor()
            })
            .collect())
    }

    /// The ambient point `Σ qⱼ λ∘zⱼ`.
    pub fn point_from_rational(&self, q: &[Rational]) -> Vec<f64> {
        let mut x = vec![0.0; self.lambdas.len()];
        for (qj, z) in q.iter().zip(&self.kernel_basis) {
            let qf = rational_to_f64(qj);
            for ((a, zi), l) in x.iter_mut().zip(z).zip(&self.lambdas) {
                *a += qf * *zi as f64 * l;
            }
        }
        x
    }
}

/// Exact inverse of a unimodular integer matrix as rationals.
fn rational_inverse(m: &[Vec<i64>]) -> Vec<Vec<Rational>> {
    let n = m.len();
    let mut a: Vec<Vec<Rational>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row: Vec<Rational> = r.iter().map(|&x| Rational::from_integer(x)).collect();
            row.extend((0..n).map(|j| {
                if i == j {
                    Rational::one()
                } else {
                    Rational::zero()
                }
            }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .find(|&r| !a[r][c].is_zero())
            .expect("singular transform");
        a.swap(piv, c);
        let d = a[c][c];
        a[c].iter_mut().for_each(|x| *x /= d);
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c];
                let rc = a[c].clone();
                for (x, y) in a[r].iter_mut().zip(&rc) {
                    *x -= f * y;
                }
            }
        }
    }
    a.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// The complement torus of an irreducible dual frequency.
pub fn complement_torus(g: &DilatedTorus, k: &DualFrequency) -> Result<ComplementTorus> {
    if k.torus != *g {
        return Err(Error::invalid("k", "dual frequency of a different torus"));
    }
    if k.is_zero() {
        return Err(Error::ZeroFrequency);
    }
    let gcd = k.gcd();
    if gcd != 1 {
        return Err(Error::ReducibleFrequency { gcd });
    }
    let lambdas = g.lambdas().to_vec();
    let kernel_basis = integer_kernel(&k.numerators)?;
    let scaled: Vec<Vec<f64>> = kernel_basis
        .iter()
        .map(|z| {
            z.iter()
                .zip(&lambdas)
                .map(|(&zi, l)| zi as f64 * l)
                .collect()
        })
        .collect();
    let (generators, transform) = lll(&scaled, 0.99);
    let reduced_basis = lattice::mat_mul_int(&transform, &kernel_basis);
    let c = box_constant(&generators);
    let sizes: Vec<f64> = generators.iter().map(|v| c / norm(v)).collect();
    let gram: Vec<Vec<f64>> = generators
        .iter()
        .map(|a| generators.iter().map(|b| lattice::dot(a, b)).collect())
        .collect();
    let gram_inverse = if generators.is_empty() {
        vec![]
    } else {
        inverse(&gram).ok_or(Error::RankDeficient)?
    };
    let vol_new: f64 = sizes.iter().map(|n| 1.0 / n).product();
    let volume_ratio = vol_new / (k.magnitude() * g.volume());
    let t_inv = if transform.is_empty() {
        vec![]
    } else {
        rational_inverse(&transform)
    };
    // x = Σ qⱼ uⱼ = Σ tᵢ vᵢ with v = T u, so q = Tᵀ t and t = (Tᵀ)⁻¹ q = (T⁻¹)ᵀ q.
    let n = t_inv.len();
    let transform_inv_t: Vec<Vec<Rational>> = (0..n)
        .map(|i| (0..n).map(|j| t_inv[j][i]).collect())
        .collect();
    // Each |vᵢ| ≥ min λ ≥ 1 and c ≤ 1, so every period Nᵢ⁻¹ is at least one.
    let torus = DilatedTorus::new(sizes.iter().map(|n| 1.0 / n).collect())?;
    Ok(ComplementTorus {
        torus,
        kernel_basis,
        reduced_basis,
        transform,
        generators,
        sizes,
        volume_ratio,
        lambdas,
        gram_inverse,
        transform_inv_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(l: &[f64]) -> DilatedTorus {
        DilatedTorus::new(l.to_vec()).unwrap()
    }

    #[test]
    fn norms() {
        assert_eq!(torus_norm(&t(&[2.0]), &[0.0]).unwrap(), 0.0);
        assert!((torus_norm(&t(&[2.0]), &[1.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!((torus_norm(&t(&[2.0]), &[-1.5]).unwrap() - 0.5).abs() < 1e-15);
        assert!(torus_norm(&t(&[2.0]), &[1.0, 2.0]).is_err());
        assert!(DilatedTorus::new(vec![0.5]).is_err());
        assert_eq!(t(&[2.0, 3.0]).volume(), 6.0);
    }

    #[test]
    fn irreducibility() {
        let g = t(&[1.0, 2.0, 3.0]);
        assert!(DualFrequency::new(g.clone(), vec![2, 3, 0])
            .unwrap()
            .is_irreducible());
        assert!(!DualFrequency::new(g.clone(), vec![2, 4, 0])
            .unwrap()
            .is_irreducible());
        assert!(!DualFrequency::new(g, vec![0, 0, 0])
            .unwrap()
            .is_irreducible());
    }

    #[test]
    fn kernel_examples() {
        let k = integer_kernel(&[3, 5, 7]).unwrap();
        assert_eq!(k.len(), 2);
        for z in &k {
            assert_eq!(3 * z[0] + 5 * z[1] + 7 * z[2], 0);
        }
        assert!(matches!(integer_kernel(&[0, 0]), Err(Error::ZeroFrequency)));
    }

    #[test]
    fn coordinate_subtorus() {
        let g = t(&[1.0, 1.0]);
        let k = DualFrequency::new(g.clone(), vec![0, 1]).unwrap();
        let c = complement_torus(&g, &k).unwrap();
        assert_eq!(c.dim(), 1);
        assert!((c.torus.volume() - 1.0).abs() < 1e-12);
        assert!((c.volume_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_subtorus() {
        let g = t(&[1.0, 1.0]);
        let k = DualFrequency::new(g.clone(), vec![1, 1]).unwrap();
        let c = complement_torus(&g, &k).unwrap();
        let z = &c.reduced_basis[0];
        assert_eq!(z[0], -z[1]);
        assert_eq!(z[0].abs(), 1);
        assert!((c.torus.volume() - 2f64.sqrt()).abs() < 1e-12);
        assert!((c.volume_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_is_a_point() {
        let g = t(&[3.0]);
        let k = DualFrequency::new(g.clone(), vec![1]).unwrap();
        let c = complement_torus(&g, &k).unwrap();
        assert_eq!(c.dim(), 0);
        assert_eq!(c.torus.volume(), 1.0);
        assert!((c.volume_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let g = t(&[1.0, 2.0]);
        assert!(matches!(
            complement_torus(&g, &DualFrequency::new(g.clone(), vec![2, 4]).unwrap()),
            Err(Error::ReducibleFrequency { gcd: 2 })
        ));
        assert!(matches!(
            complement_torus(&g, &DualFrequency::new(g.clone(), vec![0, 0]).unwrap()),
            Err(Error::ZeroFrequency)
        ));
    }
}
