//! Pilot-indexed local combining vectors: MR, local ZF and projected MR.
//!
//! All UEs on pilot `i` at AP `m` share the vector built for that pilot.
//! Normalizations use expectations so that `E{||v||^2} = 1`:
//!
//! * MR: `G_bar e_i / sqrt(A theta_i)`
//! * local ZF: `G_bar E (E^H G_bar^H G_bar E)^{-1} eps_j * sqrt((A - L_S) theta_i)`
//! * projected MR: `B G_bar e_i / sqrt((A - L_S) theta_i)`, `B` the projector onto the
//!   orthogonal complement of the strong columns.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grouping::GroupingMatrix;
use crate::realization::ChannelRealization;
use crate::scheme::Family;

/// Gram matrices with a larger condition number are treated as singular.
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinerKind {
    Mr,
    Lzf,
    Pmr,
}

/// Strong-pilot columns of `G_bar` and the inverse of their Gram matrix.
#[derive(Debug, Clone)]
pub struct StrongBasis {
    pub strong: Vec<usize>,
    /// `G_bar E_S`, `A x L_S`.
    pub columns: DMatrix<Complex64>,
    /// `(E_S^H G_bar^H G_bar E_S)^{-1}`.
    pub gram_inv: DMatrix<Complex64>,
}

impl StrongBasis {
    /// Selects the strong columns and inverts their Gram matrix.
    pub fn new(gbar: &DMatrix<Complex64>, strong: &[usize], ap: usize) -> Result<Self> {
        let a = gbar.nrows();
        let l = strong.len();
        if l >= a {
            return Err(Error::InfeasibleGrouping(format!(
                "AP {ap} has {l} strong pilots but only {a} antennas"
            )));
        }
        let mut columns = DMatrix::zeros(a, l);
        for (j, &i) in strong.iter().enumerate() {
            columns.set_column(j, &gbar.column(i));
        }
        if l == 0 {
            return Ok(Self {
                strong: Vec::new(),
                columns,
                gram_inv: DMatrix::zeros(0, 0),
            });
        }
        let gram = columns.adjoint() * &columns;
        let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
        let hi = eig.max();
        let lo = eig.min();
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if condition > MAX_GRAM_CONDITION {
            return Err(Error::SingularGram { ap, condition });
        }
        let chol = Cholesky::new(gram).ok_or(Error::SingularGram { ap, condition })?;
        Ok(Self {
            strong: strong.to_vec(),
            columns,
            gram_inv: chol.inverse(),
        })
    }

    pub fn len(&self) -> usize {
        self.strong.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strong.is_empty()
    }

    /// Position `j` of pilot `i` inside the strong selection.
    pub fn position(&self, pilot: usize) -> Option<usize> {
        self.strong.iter().position(|&s| s == pilot)
    }

    /// Unnormalized ZF direction `G_bar E X^{-1} eps_j`.
    pub fn zf_direction(&self, j: usize) -> DVector<Complex64> {
        &self.columns * self.gram_inv.column(j)
    }

    /// `B = I - G_bar E X^{-1} E^H G_bar^H`.
    pub fn projection(&self, a: usize) -> DMatrix<Complex64> {
        let mut b = DMatrix::identity(a, a);
        if !self.is_empty() {
            b -= &self.columns * &self.gram_inv * self.columns.adjoint();
        }
        b
    }
}

/// MR combining vector for pilot `i`.
pub fn build_mr(gbar: &DMatrix<Complex64>, theta: f64, pilot: usize) -> DVector<Complex64> {
    let a = gbar.nrows() as f64;
    gbar.column(pilot) / Complex64::from((a * theta).sqrt())
}

/// Local ZF combining vector for a strong pilot.
pub fn build_lzf(
    gbar: &DMatrix<Complex64>,
    strong: &[usize],
    theta: f64,
    pilot: usize,
) -> Result<DVector<Complex64>> {
    let basis = StrongBasis::new(gbar, strong, 0)?;
    let j = basis.position(pilot).ok_or_else(|| {
        Error::InfeasibleGrouping(format!("pilot {pilot} is not in the strong set {strong:?}"))
    })?;
    Ok(lzf_from_basis(&basis, gbar.nrows(), theta, j))
}

fn lzf_from_basis(basis: &StrongBasis, a: usize, theta: f64, j: usize) -> DVector<Complex64> {
    let scale = ((a - basis.len()) as f64 * theta).sqrt();
    basis.zf_direction(j) * Complex64::from(scale)
}

/// Projector onto the orthogonal complement of the strong columns.
pub fn build_projection(gbar: &DMatrix<Complex64>, strong: &[usize]) -> Result<DMatrix<Complex64>> {
    Ok(StrongBasis::new(gbar, strong, 0)?.projection(gbar.nrows()))
}

/// Projected MR vector for a weak pilot.
pub fn build_pmr(
    gbar: &DMatrix<Complex64>,
    projection: &DMatrix<Complex64>,
    strong_count: usize,
    theta: f64,
    pilot: usize,
) -> DVector<Complex64> {
    let a = gbar.nrows();
    let scale = ((a - strong_count) as f64 * theta).sqrt();
    projection * gbar.column(pilot) / Complex64::from(scale)
}

/// Combining vectors of one AP, indexed by pilot.
#[derive(Debug, Clone)]
pub struct ApCombiners {
    pub vectors: Vec<DVector<Complex64>>,
    pub kind: Vec<CombinerKind>,
    /// `strong_index[i] = Some(j)` when pilot `i` is the `j`-th strong pilot.
    pub strong_index: Vec<Option<usize>>,
}

impl ApCombiners {
    /// Builds every pilot's vector at one AP.
    pub fn build(
        gbar: &DMatrix<Complex64>,
        theta: &[f64],
        strong: &[usize],
        family: Family,
        ap: usize,
    ) -> Result<Self> {
        let a = gbar.nrows();
        let lp = gbar.ncols();
        let basis = StrongBasis::new(gbar, strong, ap)?;
        let projection = match family {
            Family::Pwpfzf if !basis.is_empty() => Some(basis.projection(a)),
            _ => None,
        };
        let mut vectors = Vec::with_capacity(lp);
        let mut kind = Vec::with_capacity(lp);
        let mut strong_index = Vec::with_capacity(lp);
        for i in 0..lp {
            match basis.position(i) {
                Some(j) => {
                    vectors.push(lzf_from_basis(&basis, a, theta[i], j));
                    kind.push(CombinerKind::Lzf);
                    strong_index.push(Some(j));
                }
                None => {
                    match &projection {
                        Some(b) => {
                            vectors.push(build_pmr(gbar, b, basis.len(), theta[i], i));
                            kind.push(CombinerKind::Pmr);
                        }
                        None => {
                            vectors.push(build_mr(gbar, theta[i], i));
                            kind.push(CombinerKind::Mr);
                        }
                    }
                    strong_index.push(None);
                }
            }
        }
        Ok(Self {
            vectors,
            kind,
            strong_index,
        })
    }
}

/// Combiners of every AP for one realization.
#[derive(Debug, Clone)]
pub struct CombinerSet {
    pub aps: Vec<ApCombiners>,
}

impl CombinerSet {
    pub fn build(
        real: &ChannelRealization,
        theta: &DMatrix<f64>,
        grouping: &GroupingMatrix,
        family: Family,
    ) -> Result<Self> {
        let aps = real
            .gbar
            .iter()
            .enumerate()
            .map(|(m, gbar)| {
                let th: Vec<f64> = theta.row(m).iter().copied().collect();
                ApCombiners::build(gbar, &th, &grouping.strong_set(m), family, m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { aps })
    }

    /// Vector used for a UE on pilot `i` at AP `m`.
    pub fn vector(&self, m: usize, pilot: usize) -> &DVector<Complex64> {
        &self.aps[m].vectors[pilot]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, stream_rng, Stream};

    fn random_gbar(a: usize, lp: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = stream_rng(seed, Stream::Channel, 0);
        DMatrix::from_fn(a, lp, |_, _| complex_normal(&mut rng))
    }

    #[test]
    fn projector_is_idempotent_and_nulls_strong_columns() {
        let gbar = random_gbar(8, 5, 1);
        let strong = [0, 2, 3];
        let b = build_projection(&gbar, &strong).unwrap();
        assert!((&b * &b - &b).norm() < 1e-9);
        assert!((b.adjoint() - &b).norm() < 1e-12);
        for &i in &strong {
            assert!((&b * gbar.column(i)).norm() < 1e-9 * gbar.column(i).norm());
        }
        let identity = build_projection(&gbar, &[]).unwrap();
        assert_eq!(identity, DMatrix::identity(8, 8));
    }

    #[test]
    fn lzf_nulls_other_strong_pilots() {
        let gbar = random_gbar(8, 5, 2);
        let strong = [1, 3, 4];
        let theta = 2.5;
        let v = build_lzf(&gbar, &strong, theta, 3).unwrap();
        for &i in &strong {
            let inner = v.dotc(&gbar.column(i));
            if i == 3 {
                // v^H G_bar e_i = sqrt((A - L_S) theta) exactly
                assert!((inner - Complex64::from((5.0 * theta).sqrt())).norm() < 1e-9);
            } else {
                assert!(inner.norm() < 1e-9 * v.norm() * gbar.column(i).norm());
            }
        }
        assert!(build_lzf(&gbar, &strong, theta, 0).is_err());
    }

    #[test]
    fn pmr_without_strong_pilots_is_mr() {
        let gbar = random_gbar(4, 3, 3);
        let b = build_projection(&gbar, &[]).unwrap();
        let pmr = build_pmr(&gbar, &b, 0, 1.7, 2);
        let mr = build_mr(&gbar, 1.7, 2);
        assert!((pmr - mr).norm() < 1e-14);
    }

    #[test]
    fn too_many_strong_pilots_is_infeasible() {
        let gbar = random_gbar(4, 5, 4);
        assert!(matches!(
            StrongBasis::new(&gbar, &[0, 1, 2, 3], 0),
            Err(Error::InfeasibleGrouping(_))
        ));
    }

    #[test]
    fn rank_deficient_gram_is_rejected() {
        let mut gbar = random_gbar(4, 3, 5);
        let col = gbar.column(0).clone_owned();
        gbar.set_column(1, &(col * Complex64::new(0.0, 2.0)));
        assert!(matches!(
            StrongBasis::new(&gbar, &[0, 1], 7),
            Err(Error::SingularGram { ap: 7, .. })
        ));
    }

    #[test]
    fn ap_combiners_tag_kinds_by_family() {
        let gbar = random_gbar(8, 4, 6);
        let theta = [1.0, 2.0, 3.0, 4.0];
        let pf = ApCombiners::build(&gbar, &theta, &[1], Family::Pfzf, 0).unwrap();
        assert_eq!(
            pf.kind,
            vec![
                CombinerKind::Mr,
                CombinerKind::Lzf,
                CombinerKind::Mr,
                CombinerKind::Mr
            ]
        );
        assert_eq!(pf.strong_index, vec![None, Some(0), None, None]);
        let pw = ApCombiners::build(&gbar, &theta, &[1], Family::Pwpfzf, 0).unwrap();
        assert_eq!(
            pw.kind,
            vec![
                CombinerKind::Pmr,
                CombinerKind::Lzf,
                CombinerKind::Pmr,
                CombinerKind::Pmr
            ]
        );
        // all strong: both families are full-pilot ZF
        let all = [0, 1, 2, 3];
        let a = ApCombiners::build(&gbar, &theta, &all, Family::Pfzf, 0).unwrap();
        let b = ApCombiners::build(&gbar, &theta, &all, Family::Pwpfzf, 0).unwrap();
        for i in 0..4 {
            assert_eq!(a.vectors[i], b.vectors[i]);
        }
    }
}
