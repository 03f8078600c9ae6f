//! Box bases of Bohr sets: `a₁..a_d` and `N₁..N_d` with every residue a short
//! combination `Σ nᵢ aᵢ`.

use serde::Serialize;

use crate::bohr::{FrequencySet, DEFAULT_ENUM_CAP};
use crate::error::{Error, Result};
use crate::group::PrimeGroup;
use crate::torus::lattice::{box_constant, inverse, lll_integer, norm};

/// Largest `|S|` accepted.
pub const MAX_RANK: usize = 4;

#[derive(Clone, Debug, Serialize)]
pub struct BohrBasis {
    pub p: u64,
    #[serde(rename = "S")]
    pub s: Vec<u64>,
    pub elements: Vec<u64>,
    pub sizes: Vec<f64>,
    /// Rows `wᵢ = p·vᵢ ∈ Z^S` of the reduced basis of `pΓ`.
    pub scaled_generators: Vec<Vec<i64>>,
    /// `‖aᵢ‖_{S⊥} ≤ Nᵢ⁻¹` holds for every `i` (checked through the exact bound
    /// `‖aᵢ‖_{S⊥} ≤ ‖vᵢ‖_∞ ≤ |vᵢ| ≤ Nᵢ⁻¹`).
    pub ain_holds: bool,
    /// `max_{a≠0, i} |nᵢ(a)| / (Nᵢ ‖a‖_{S⊥})` over the canonical representations.
    pub representation_factor: f64,
    /// Every residue was represented and the representation reproduced `a`.
    pub representations_verified: bool,
    /// `Σ nᵢaᵢ` is injective on `|nᵢ| < Nᵢ/2`.
    pub unique: bool,
    pub uniqueness_tuples: u64,
    /// `Π Nᵢ / p`.
    pub size_product_over_p: f64,
}

impl BohrBasis {
    /// Coefficients `n` of the canonical representation of `a`.
    pub fn represent(&self, a: u64, freqs: &FrequencySet) -> Vec<i64> {
        let g = freqs.group();
        let x: Vec<i64> = freqs
            .as_slice()
            .iter()
            .map(|&s| g.centered(g.mul(a, s)))
            .collect();
        solve_integer(&float_inverse(&self.scaled_generators), &x)
    }
}

fn float_inverse(w: &[Vec<i64>]) -> Vec<Vec<f64>> {
    let wf: Vec<Vec<f64>> = w
        .iter()
        .map(|r| r.iter().map(|&v| v as f64).collect())
        .collect();
    inverse(&wf).expect("basis is invertible")
}

/// `n` with `Σ nᵢ wᵢ = x`, rounded from a float solve against `inv = w⁻¹`.
fn solve_integer(inv: &[Vec<f64>], x: &[i64]) -> Vec<i64> {
    let d = inv.len();
    (0..d)
        .map(|i| (0..d).map(|r| x[r] as f64 * inv[r][i]).sum::<f64>().round() as i64)
        .collect()
}

/// Box basis of the Bohr geometry of `S` in Z/pZ.
pub fn bohr_basis(freqs: &FrequencySet) -> Result<BohrBasis> {
    let g = freqs.group();
    let s = freqs.as_slice();
    let d = s.len();
    if d > MAX_RANK {
        return Err(Error::DimensionCapExceeded { d, cap: MAX_RANK });
    }
    if g.p() > DEFAULT_ENUM_CAP {
        return Err(Error::EnumerationCapExceeded {
            size: g.p(),
            cap: DEFAULT_ENUM_CAP,
        });
    }
    let p = g.p() as i64;
    // pΓ = pZ^S + Z·s, with basis {s_j⁻¹ s mod p} ∪ {p eᵢ : i ≠ j}.
    let j = s
        .iter()
        .position(|&x| x != 0)
        .ok_or(Error::DegenerateFrequencySet)?;
    let sj_inv = g.inv(s[j]).expect("non-zero residue");
    let mut basis = vec![s
        .iter()
        .map(|&x| g.mul(x, sj_inv) as i64)
        .collect::<Vec<_>>()];
    for i in (0..d).filter(|&i| i != j) {
        basis.push((0..d).map(|k| if k == i { p } else { 0 }).collect());
    }
    let (w, _) = lll_integer(&basis, 0.99);
    let v: Vec<Vec<f64>> = w
        .iter()
        .map(|r| r.iter().map(|&x| x as f64 / p as f64).collect())
        .collect();
    let c = box_constant(&v);
    let sizes: Vec<f64> = v.iter().map(|r| c / norm(r)).collect();
    // wᵢ ≡ mᵢ u (mod p) with u_j = 1, so wᵢ ≡ (w_{ij} s_j⁻¹) s.
    let elements: Vec<u64> = w.iter().map(|r| g.mul(g.reduce(r[j]), sj_inv)).collect();

    let mut ain_holds = true;
    for (i, &a) in elements.iter().enumerate() {
        let linf = w[i].iter().map(|x| x.unsigned_abs()).max().unwrap_or(0);
        // ‖a s/p‖ ≤ |wᵢₛ|/p coordinatewise because wᵢ/p is a lift of (a s/p)ₛ.
        if freqs.dual_num(a) > linf {
            ain_holds = false;
        }
        let lhs = freqs.dual_num(a) as f64 / p as f64;
        if lhs > 1.0 / sizes[i] * (1.0 + 1e-12) {
            ain_holds = false;
        }
    }

    let mut factor = 0.0f64;
    let mut reps_ok = true;
    let basis_out = BohrBasis {
        p: g.p(),
        s: s.to_vec(),
        elements: elements.clone(),
        sizes: sizes.clone(),
        scaled_generators: w.clone(),
        ain_holds,
        representation_factor: 0.0,
        representations_verified: false,
        unique: false,
        uniqueness_tuples: 0,
        size_product_over_p: sizes.iter().product::<f64>() / p as f64,
    };
    let inv = float_inverse(&w);
    for a in 1..g.p() {
        let x: Vec<i64> = s.iter().map(|&si| g.centered(g.mul(a, si))).collect();
        let n = solve_integer(&inv, &x);
        let back = n
            .iter()
            .zip(&elements)
            .fold(0u64, |acc, (&ni, &ai)| g.add(acc, g.mul(g.reduce(ni), ai)));
        if back != a {
            reps_ok = false;
        }
        let dual = freqs.dual_num(a) as f64 / p as f64;
        for (ni, nsz) in n.iter().zip(&sizes) {
            factor = factor.max(ni.unsigned_abs() as f64 / (nsz * dual));
        }
    }
    let (unique, tuples) = check_uniqueness(g, &elements, &sizes);
    Ok(BohrBasis {
        representation_factor: factor,
        representations_verified: reps_ok,
        unique,
        uniqueness_tuples: tuples,
        ..basis_out
    })
}

/// Whether `n ↦ Σ nᵢaᵢ mod p` is injective on `|nᵢ| < Nᵢ/2`.
fn check_uniqueness(g: PrimeGroup, a: &[u64], sizes: &[f64]) -> (bool, u64) {
    let bounds: Vec<i64> = sizes
        .iter()
        .map(|n| {
            // Largest integer strictly below N/2.
            let h = n / 2.0;
            let f = h.floor() as i64;
            if (f as f64) < h {
                f
            } else {
                f - 1
            }
        })
        .collect();
    let total: u64 = bounds.iter().map(|b| (2 * b + 1) as u64).product();
    if total > g.p() {
        return (false, total);
    }
    let mut seen = vec![false; g.order()];
    let d = a.len();
    let mut n: Vec<i64> = bounds.iter().map(|b| -b).collect();
    let mut count = 0u64;
    loop {
        let x = n
            .iter()
            .zip(a)
            .fold(0u64, |acc, (&ni, &ai)| g.add(acc, g.mul(g.reduce(ni), ai)));
        count += 1;
        if seen[x as usize] {
            return (false, count);
        }
        seen[x as usize] = true;
        let mut i = 0;
        loop {
            if i == d {
                return (true, count);
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
