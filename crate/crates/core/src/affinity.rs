//! Generalized complex affinities from boundary and figural probabilities.
//!
//! Each pixel pair `(p, q)` carries three competing forces: a binding force on
//! the positive real axis (same region), a figure-transition force at angle
//! `+φ` (`q` in front of `p`) and a ground-transition force at `-φ`. Their
//! confidences decay exponentially in the probability of the corresponding
//! transition being wrong.
//!
//! # Operator orientation
//!
//! The eigenproblem reads `z(p) ≈ Σ_q Ŵ(p, q) z(q) / d(p)`, so a positive
//! angle on `Ŵ(p, q)` pushes `p` ahead of `q`. The pair affinity `W(p, q)`
//! uses the opposite orientation (positive angle means `q` is figure), so the
//! assembled operator stores it transposed: `Ŵ(q, p) = W(p, q)`. With this
//! layout a larger embedding angle always means "more figural".

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sparse::{DegreeVector, SparseHermitianMatrix};
use crate::stencil::{boundary_prob, neighbor_of, GridDomain, RelationMap, Stencil};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffinityParams {
    /// Confidence scale of the binding force.
    pub sigma_b: f64,
    /// Confidence scale shared by the figure and ground forces.
    pub sigma_fg: f64,
    /// Rotation angle of a figure/ground transition, in `(0, π/2]`.
    pub phi: f64,
    /// Rescale all angles so their total magnitude is `π/2`.
    pub wedge_rescale: bool,
}

impl Default for AffinityParams {
    fn default() -> Self {
        Self {
            sigma_b: 0.1,
            sigma_fg: 0.05,
            phi: std::f64::consts::FRAC_PI_4,
            wedge_rescale: true,
        }
    }
}

impl AffinityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_b > 0.0 && self.sigma_b.is_finite()) {
            return Err(Error::Config(format!("sigma_b must be positive, got {}", self.sigma_b)));
        }
        if !(self.sigma_fg > 0.0 && self.sigma_fg.is_finite()) {
            return Err(Error::Config(format!("sigma_fg must be positive, got {}", self.sigma_fg)));
        }
        if !(self.phi > 0.0 && self.phi <= FRAC_PI_2) {
            return Err(Error::Config(format!("phi must lie in (0, pi/2], got {}", self.phi)));
        }
        Ok(())
    }
}

/// Probabilities of erroneously binding, transitioning to figure and
/// transitioning to ground.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairEnergies {
    pub binding: f64,
    pub figure: f64,
    pub ground: f64,
}

pub fn pair_energies(b: f64, f: f64, e_p: f64, e_q: f64) -> PairEnergies {
    debug_assert!(
        [b, f, e_p, e_q].iter().all(|v| (0.0..=1.0).contains(v)),
        "probabilities out of range: b={b} f={f} e_p={e_p} e_q={e_q}"
    );
    // probability of a boundary between p and q with neither on a boundary
    let clean = (1.0 - e_p) * b * (1.0 - e_q);
    PairEnergies {
        binding: b,
        figure: 1.0 - clean * f,
        ground: 1.0 - clean * (1.0 - f),
    }
}

/// Complex affinity `W(p, q) = C_B + C_F e^{iφ} + C_G e^{-iφ}`.
pub fn pair_affinity(b: f64, f: f64, e_p: f64, e_q: f64, params: &AffinityParams) -> Complex64 {
    let en = pair_energies(b, f, e_p, e_q);
    let c_b = (-en.binding / params.sigma_b).exp();
    let c_f = (-en.figure / params.sigma_fg).exp();
    let c_g = (-en.ground / params.sigma_fg).exp();
    Complex64::new(c_b, 0.0)
        + Complex64::from_polar(c_f, params.phi)
        + Complex64::from_polar(c_g, -params.phi)
}

/// Builds the Hermitian operator from directed pair affinities.
///
/// `pair(p, k, q)` returns `W(p, q)` for stencil offset `k` taking `p` to `q`
/// (or `None` for no relation). The result is the Hermitian part of the
/// transposed directed matrix; see the module docs.
pub(crate) fn hermitian_operator<F>(
    domain: GridDomain,
    stencil: &Stencil,
    pair: F,
) -> Result<SparseHermitianMatrix>
where
    F: Fn(usize, usize, usize) -> Option<Complex64> + Sync,
{
    let offsets = stencil.offsets();
    let neg = stencil.negation_table();
    let rows: Vec<Vec<(u32, Complex64)>> = (0..domain.len())
        .into_par_iter()
        .map(|p| {
            let mut row = Vec::with_capacity(offsets.len());
            for (k, &o) in offsets.iter().enumerate() {
                let Some(q) = neighbor_of(domain, p, o) else { continue };
                let forward = pair(p, k, q).unwrap_or_default();
                let backward = pair(q, neg[k], p).unwrap_or_default();
                // Ŵ(p, q) = (W(q, p) + conj W(p, q)) / 2
                let w = (backward + forward.conj()) * 0.5;
                if w != Complex64::new(0.0, 0.0) {
                    row.push((q as u32, w));
                }
            }
            row
        })
        .collect();
    if rows.iter().all(Vec::is_empty) {
        return Err(Error::EmptyAffinity);
    }
    SparseHermitianMatrix::from_rows(rows)
}

/// Assembles the affinity operator `W` and degree vector `D` from a relation
/// map.
///
/// The matrix is symmetrized first and then, when requested, wedge-rescaled,
/// so the `π/2` angular budget holds exactly on the operator handed to the
/// solver.
pub fn assemble(
    rel: &RelationMap,
    params: &AffinityParams,
) -> Result<(SparseHermitianMatrix, DegreeVector)> {
    params.validate()?;
    let e = boundary_prob(rel)?;
    let w = hermitian_operator(rel.domain(), rel.stencil(), |p, k, q| {
        Some(pair_affinity(rel.b(k, p), rel.f(k, p), e[p], e[q], params))
    })?;
    Ok(finish(w, params.wedge_rescale))
}

pub(crate) fn finish(w: SparseHermitianMatrix, wedge: bool) -> (SparseHermitianMatrix, DegreeVector) {
    let w = if wedge { rescale_theta(&w) } else { w };
    let d = w.degrees();
    (w, d)
}

/// Scales every entry angle by `(π/2) / Σ|Θ|`, keeping magnitudes.
///
/// Returns the input unchanged when all entries are real and nonnegative.
pub fn rescale_theta(w: &SparseHermitianMatrix) -> SparseHermitianMatrix {
    let total: f64 = w.values().iter().map(|v| v.arg().abs()).sum();
    if total == 0.0 {
        return w.clone();
    }
    let scale = FRAC_PI_2 / total;
    w.map_hermitian(|v| Complex64::from_polar(v.norm(), v.arg() * scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stencil::{default_stencil, Offset};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_4;

    fn arg_sum(w: &SparseHermitianMatrix) -> f64 {
        w.values().iter().map(|v| v.arg().abs()).sum()
    }

    #[test]
    fn energies_examples() {
        let e = pair_energies(0.0, 0.5, 0.0, 0.0);
        assert_eq!((e.binding, e.figure, e.ground), (0.0, 1.0, 1.0));
        let e = pair_energies(1.0, 1.0, 0.0, 0.0);
        assert_eq!((e.binding, e.figure, e.ground), (1.0, 0.0, 1.0));
        let e = pair_energies(1.0, 0.5, 0.5, 0.0);
        assert_eq!((e.binding, e.figure, e.ground), (1.0, 0.75, 0.75));
    }

    #[test]
    fn affinity_binding_only() {
        let p = AffinityParams::default();
        let w = pair_affinity(0.0, 0.8, 0.0, 0.0, &p);
        // C_F and C_G are both exp(-20)
        let cg = (-20.0f64).exp();
        assert!((w.re - (1.0 + 2.0 * cg * FRAC_PI_4.cos())).abs() < 1e-15);
        assert_eq!(w.im, 0.0);
        assert_eq!(w.arg(), 0.0);
    }

    #[test]
    fn affinity_figure_corner() {
        // Reference computed with 50-digit arithmetic (mpmath) from the closed forms.
        let w = pair_affinity(1.0, 1.0, 0.0, 0.0, &AffinityParams::default());
        assert!((w.re - 0.70715218257376571).abs() < 1e-15, "{}", w.re);
        assert!((w.im - 0.70710677972909182).abs() < 1e-15, "{}", w.im);
        assert!((w.arg() - FRAC_PI_4).abs() < 1e-3);
    }

    #[test]
    fn affinity_ambiguous_boundary_is_real() {
        let w = pair_affinity(1.0, 0.5, 0.0, 0.0, &AffinityParams::default());
        assert_eq!(w.im, 0.0);
    }

    #[test]
    fn params_validation() {
        let mut p = AffinityParams::default();
        assert!(p.validate().is_ok());
        p.phi = 2.0;
        assert!(p.validate().is_err());
        p = AffinityParams { sigma_b: 0.0, ..Default::default() };
        assert!(p.validate().is_err());
        p = AffinityParams { sigma_fg: -1.0, ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn assemble_two_pixels() {
        let d = GridDomain::new(1, 2).unwrap();
        let s = Stencil::new(vec![Offset::new(0, 1), Offset::new(0, -1)]).unwrap();
        let rel = RelationMap::constant(d, s, 0.0, 0.5).unwrap();
        // e(p) is not defined without the full radius-1 ring
        assert!(assemble(&rel, &AffinityParams::default()).is_err());

        let s = Stencil::with_radii(&[1]).unwrap();
        let rel = RelationMap::constant(d, s, 0.0, 0.5).unwrap();
        let (w, deg) = assemble(&rel, &AffinityParams::default()).unwrap();
        let expected = pair_affinity(0.0, 0.5, 0.0, 0.0, &AffinityParams::default());
        assert_eq!(w.dim(), 2);
        assert_eq!(w.nnz(), 2);
        assert_eq!(w.get(0, 1).unwrap(), expected);
        assert!((w.get(0, 1).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        assert_eq!(deg.0, vec![expected.re, expected.re]);
    }

    #[test]
    fn assemble_single_pixel_is_empty() {
        let d = GridDomain::new(1, 1).unwrap();
        let rel = RelationMap::constant(d, default_stencil(), 0.0, 0.5).unwrap();
        assert!(matches!(assemble(&rel, &AffinityParams::default()), Err(Error::EmptyAffinity)));
    }

    #[test]
    fn operator_orientation_puts_figure_ahead() {
        // f(p, q) = 1 for p = centre, q = its right neighbor: q is figure, so
        // the operator entry at (q, p) carries the positive angle.
        let d = GridDomain::new(3, 3).unwrap();
        let s = Stencil::with_radii(&[1]).unwrap();
        let n = d.len();
        let mut b = vec![0.0f32; s.len() * n];
        let mut f = vec![0.5f32; s.len() * n];
        let right = s.position(Offset::new(0, 1)).unwrap();
        let left = s.position(Offset::new(0, -1)).unwrap();
        b[right * n + 4] = 1.0;
        f[right * n + 4] = 1.0;
        b[left * n + 5] = 1.0;
        f[left * n + 5] = 0.0;
        let rel = RelationMap::new(d, s, b, f).unwrap();
        let params = AffinityParams { wedge_rescale: false, ..Default::default() };
        let (w, _) = assemble(&rel, &params).unwrap();
        assert!(w.get(5, 4).unwrap().arg() > 0.1);
        assert!(w.get(4, 5).unwrap().arg() < -0.1);
    }

    #[test]
    fn rescale_examples() {
        let phi = 0.3;
        let rows = vec![
            vec![(1, Complex64::from_polar(2.0, phi))],
            vec![(0, Complex64::from_polar(2.0, -phi))],
        ];
        let w = SparseHermitianMatrix::from_rows(rows).unwrap();
        let r = rescale_theta(&w);
        assert!((r.get(0, 1).unwrap().arg() - FRAC_PI_4).abs() < 1e-15);
        assert!((r.get(1, 0).unwrap().arg() + FRAC_PI_4).abs() < 1e-15);

        let real = SparseHermitianMatrix::from_rows(vec![
            vec![(1, Complex64::new(0.5, 0.0))],
            vec![(0, Complex64::new(0.5, 0.0))],
        ])
        .unwrap();
        assert_eq!(rescale_theta(&real), real);
    }

    fn random_relation_map(h: usize, w: usize, vals: &[f32]) -> RelationMap {
        let d = GridDomain::new(h, w).unwrap();
        let s = Stencil::with_radii(&[1, 2]).unwrap();
        let len = d.len() * s.len();
        let b = vals.iter().cycle().take(len).copied().collect();
        let f = vals.iter().rev().cycle().take(len).copied().collect();
        RelationMap::new(d, s, b, f).unwrap()
    }

    /// Relation maps where f(q, p) = 1 - f(p, q) and b is symmetric.
    fn consistent_relation_map(h: usize, w: usize, vals: &[f32]) -> RelationMap {
        let d = GridDomain::new(h, w).unwrap();
        let s = Stencil::with_radii(&[1, 2]).unwrap();
        let n = d.len();
        let neg = s.negation_table();
        let mut b = vec![0.0f32; n * s.len()];
        let mut f = vec![0.5f32; n * s.len()];
        let mut it = vals.iter().cycle();
        for p in 0..n {
            for (k, &o) in s.offsets().iter().enumerate() {
                if let Some(q) = neighbor_of(d, p, o) {
                    if q > p {
                        let bv = *it.next().unwrap();
                        let fv = *it.next().unwrap();
                        b[k * n + p] = bv;
                        b[neg[k] * n + q] = bv;
                        f[k * n + p] = fv;
                        f[neg[k] * n + q] = 1.0 - fv;
                    }
                }
            }
        }
        RelationMap::new(d, s, b, f).unwrap()
    }

    /// Rescale-then-symmetrize, the other admissible ordering, as a dense matrix.
    fn rescale_before_symmetrize(rel: &RelationMap, params: &AffinityParams) -> Vec<Complex64> {
        let e = boundary_prob(rel).unwrap();
        let d = rel.domain();
        let n = d.len();
        let mut directed = vec![Complex64::new(0.0, 0.0); n * n];
        for p in 0..n {
            for (k, &o) in rel.stencil().offsets().iter().enumerate() {
                if let Some(q) = neighbor_of(d, p, o) {
                    directed[q * n + p] = pair_affinity(rel.b(k, p), rel.f(k, p), e[p], e[q], params);
                }
            }
        }
        let total: f64 = directed.iter().map(|w| w.arg().abs()).sum();
        let scale = FRAC_PI_2 / total;
        let rescaled: Vec<Complex64> =
            directed.iter().map(|w| Complex64::from_polar(w.norm(), w.arg() * scale)).collect();
        (0..n * n)
            .map(|i| (rescaled[i] + rescaled[(i % n) * n + i / n].conj()) * 0.5)
            .collect()
    }

    #[test]
    fn rescale_order_is_immaterial_for_consistent_maps() {
        let vals: Vec<f32> = (0..97).map(|i| ((i * 37) % 101) as f32 / 100.0).collect();
        let rel = consistent_relation_map(5, 6, &vals);
        let params = AffinityParams::default();
        let (w, _) = assemble(&rel, &params).unwrap();
        let other = rescale_before_symmetrize(&rel, &params);
        let dense = w.to_dense();
        for (a, b) in dense.iter().zip(&other) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn exchange_conjugates(b in 0.0..=1.0f64, f in 0.0..=1.0f64, ep in 0.0..=1.0f64, eq in 0.0..=1.0f64) {
            let p = AffinityParams::default();
            let w = pair_affinity(b, f, ep, eq, &p);
            let v = pair_affinity(b, 1.0 - f, ep, eq, &p);
            prop_assert!((w - v.conj()).norm() <= 1e-12);
            prop_assert!(w.norm() <= 3.0);
            let en = pair_energies(b, f, ep, eq);
            let c_f = (-en.figure / p.sigma_fg).exp();
            let c_g = (-en.ground / p.sigma_fg).exp();
            prop_assert!((w.im - (c_f - c_g) * p.phi.sin()).abs() < 1e-14);
            prop_assert!((en.figure + en.ground - (2.0 - (1.0 - ep) * b * (1.0 - eq))).abs() < 1e-14);
        }

        #[test]
        fn figure_angle_monotone_in_b(b1 in 0.0..=1.0f64, b2 in 0.0..=1.0f64) {
            let p = AffinityParams::default();
            let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
            prop_assert!(pair_affinity(lo, 1.0, 0.0, 0.0, &p).im <= pair_affinity(hi, 1.0, 0.0, 0.0, &p).im);
        }

        #[test]
        fn assembled_matrix_invariants(h in 1usize..6, w in 2usize..6, vals in proptest::collection::vec(0.0f32..=1.0, 1..64)) {
            let rel = random_relation_map(h, w, &vals);
            let (m, d) = assemble(&rel, &AffinityParams::default()).unwrap();
            for (p, q, v) in m.entries() {
                prop_assert_eq!(m.get(q, p), Some(v.conj()));
            }
            prop_assert!(d.0.iter().all(|&x| x >= 0.0));
            let s = arg_sum(&m);
            prop_assert!(s == 0.0 || (s - FRAC_PI_2).abs() < 1e-9);
        }

        #[test]
        fn rescale_keeps_magnitude_and_sign(h in 1usize..5, w in 2usize..5, vals in proptest::collection::vec(0.0f32..=1.0, 1..64)) {
            let rel = random_relation_map(h, w, &vals);
            let params = AffinityParams { wedge_rescale: false, ..Default::default() };
            let (m, _) = assemble(&rel, &params).unwrap();
            let r = rescale_theta(&m);
            for ((_, _, a), b) in m.entries().zip(r.values()) {
                prop_assert!((a.norm() - b.norm()).abs() <= 4.0 * f64::EPSILON * a.norm());
                prop_assert_eq!(a.arg().signum() * (a.arg() != 0.0) as i32 as f64, b.arg().signum() * (b.arg() != 0.0) as i32 as f64);
            }
        }
    }
}
