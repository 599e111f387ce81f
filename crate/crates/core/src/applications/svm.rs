//! Soft-margin classification of objects given as point sets.
//!
//! Object `i` with label `y_i` is the convex hull of `t` points `x^{ik}`. The
//! dual is `max sum alpha - 0.5 |sum alpha_ik y_i x^{ik}|^2` subject to
//! `alpha >= 0, sum_k alpha_ik <= C`, one capped simplex per object. It is
//! solved here as the minimization of the negated objective, and the primal
//! normal is `w = sum alpha_ik y_i x^{ik}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::blockcore::{dot, BlockPartition, BlockTerm, BlockVector, CompositeProblem, SmoothFunction};
use crate::error::{Error, Result};
use crate::subsolvers::CappedSimplexBlock;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmObject {
    pub label: f64,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmDualSpec {
    pub objects: Vec<SvmObject>,
    pub penalty: f64,
}

impl SvmDualSpec {
    pub fn features(&self) -> usize {
        self.objects.first().and_then(|o| o.points.first()).map_or(0, Vec::len)
    }

    fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::DimensionMismatch("no objects".into()));
        }
        if !(self.penalty > 0.0 && self.penalty.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "penalty C = {} must be positive",
                self.penalty
            )));
        }
        let t = self.objects[0].points.len();
        let m = self.features();
        if t == 0 || m == 0 {
            return Err(Error::DimensionMismatch(
                "objects need at least one point with features".into(),
            ));
        }
        for (i, o) in self.objects.iter().enumerate() {
            if o.label != 1.0 && o.label != -1.0 {
                return Err(Error::InvalidParameter(format!(
                    "object {i} has label {}, expected -1 or +1",
                    o.label
                )));
            }
            if o.points.len() != t {
                return Err(Error::DimensionMismatch(format!(
                    "object {i} has {} points, expected {t}",
                    o.points.len()
                )));
            }
            if o.points.iter().any(|p| p.len() != m) {
                return Err(Error::DimensionMismatch(format!(
                    "object {i} has points without {m} features"
                )));
            }
        }
        Ok(())
    }
}

/// Label-signed points `y_i x^{ik}` in variable order.
#[derive(Debug, Clone)]
struct SignedPoints {
    features: usize,
    rows: Vec<Vec<f64>>,
}

impl SignedPoints {
    fn normal(&self, alpha: &[f64]) -> Vec<f64> {
        let mut w = vec![0.0; self.features];
        for (a, z) in alpha.iter().zip(&self.rows) {
            if *a != 0.0 {
                for (wj, zj) in w.iter_mut().zip(z) {
                    *wj += a * zj;
                }
            }
        }
        w
    }
}

struct NegatedDual {
    points: SignedPoints,
}

impl SmoothFunction for NegatedDual {
    fn value(&self, x: &BlockVector) -> f64 {
        let w = self.points.normal(x.as_slice());
        0.5 * dot(&w, &w) - x.as_slice().iter().sum::<f64>()
    }

    fn partial_gradient(&self, x: &BlockVector, block: usize) -> Vec<f64> {
        let w = self.points.normal(x.as_slice());
        self.points.rows[x.partition().range(block)]
            .iter()
            .map(|z| dot(&w, z) - 1.0)
            .collect()
    }
}

/// Maps dual solutions back to the classifier.
#[derive(Debug, Clone)]
pub struct SvmRecovery {
    points: SignedPoints,
    objects: Vec<SvmObject>,
}

impl SvmRecovery {
    /// `w = sum alpha_ik y_i x^{ik}`.
    pub fn recover_w(&self, alpha: &BlockVector) -> Vec<f64> {
        self.points.normal(alpha.as_slice())
    }

    /// The dual objective in its maximization form.
    pub fn dual_objective(&self, alpha: &BlockVector) -> f64 {
        let w = self.recover_w(alpha);
        alpha.as_slice().iter().sum::<f64>() - 0.5 * dot(&w, &w)
    }

    /// Per-object slack `max(0, max_k 1 - y_i <w, x^{ik}>)`.
    pub fn slacks(&self, w: &[f64]) -> Vec<f64> {
        self.objects
            .iter()
            .map(|o| o.points.iter().map(|p| 1.0 - o.label * dot(w, p)).fold(0.0, f64::max))
            .collect()
    }

    /// Smallest `y_i <w, x^{ik}>` over the points of each object.
    pub fn margins(&self, w: &[f64]) -> Vec<f64> {
        self.objects
            .iter()
            .map(|o| {
                o.points
                    .iter()
                    .map(|p| o.label * dot(w, p))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

pub fn build_svm_dual(spec: &SvmDualSpec) -> Result<(CompositeProblem, SvmRecovery)> {
    spec.validate()?;
    let t = spec.objects[0].points.len();
    let rows: Vec<Vec<f64>> = spec
        .objects
        .iter()
        .flat_map(|o| o.points.iter().map(move |p| p.iter().map(|v| o.label * v).collect()))
        .collect();
    let points = SignedPoints {
        features: spec.features(),
        rows,
    };
    let partition = Arc::new(BlockPartition::uniform(spec.objects.len(), t)?);
    // Hessian block of object i is its Gram matrix
    let lipschitz = (0..spec.objects.len())
        .map(|i| {
            let r = partition.range(i);
            let mut fro = 0.0;
            for a in r.clone() {
                for b in r.clone() {
                    fro += dot(&points.rows[a], &points.rows[b]).powi(2);
                }
            }
            fro.sqrt()
        })
        .collect();
    let terms: Vec<Box<dyn BlockTerm>> = (0..spec.objects.len())
        .map(|_| Box::new(CappedSimplexBlock::new(t, spec.penalty)) as _)
        .collect();
    let problem = CompositeProblem::new(partition, NegatedDual { points: points.clone() }, terms)?
        .with_lipschitz(lipschitz)?
        .declare_convex();
    Ok((
        problem,
        SvmRecovery {
            points,
            objects: spec.objects.clone(),
        },
    ))
}

/// Parses `object_id,label,feat1,...,featm` rows. A non-numeric first row is
/// taken as a header. Objects keep the order of their first appearance.
pub fn parse_svm_csv(text: &str) -> Result<Vec<SvmObject>> {
    let mut order: Vec<String> = Vec::new();
    let mut objects: BTreeMap<String, SvmObject> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::DimensionMismatch(format!(
                "line {}: expected id,label,features",
                lineno + 1
            )));
        }
        let label: f64 = match fields[1].parse() {
            Ok(v) => v,
            Err(_) if order.is_empty() && objects.is_empty() && lineno == 0 => continue,
            Err(_) => {
                return Err(Error::InvalidParameter(format!(
                    "line {}: bad label {:?}",
                    lineno + 1,
                    fields[1]
                )))
            }
        };
        if label != 1.0 && label != -1.0 {
            return Err(Error::InvalidParameter(format!(
                "line {}: label must be -1 or +1",
                lineno + 1
            )));
        }
        let feats = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::InvalidParameter(format!("line {}: {e}", lineno + 1)))?;
        let id = fields[0].to_string();
        match objects.get_mut(&id) {
            Some(o) => {
                if o.label != label {
                    return Err(Error::InvalidParameter(format!(
                        "line {}: object {id} mixes labels",
                        lineno + 1
                    )));
                }
                o.points.push(feats);
            }
            None => {
                order.push(id.clone());
                objects.insert(
                    id,
                    SvmObject {
                        label,
                        points: vec![feats],
                    },
                );
            }
        }
    }
    Ok(order.into_iter().map(|id| objects.remove(&id).unwrap()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SvmDualSpec {
        SvmDualSpec {
            objects: vec![
                SvmObject {
                    label: 1.0,
                    points: vec![vec![2.0, 1.0], vec![1.5, 2.0]],
                },
                SvmObject {
                    label: -1.0,
                    points: vec![vec![-1.0, -2.0], vec![-2.0, -0.5]],
                },
            ],
            penalty: 1.0,
        }
    }

    #[test]
    fn zero_alpha_gives_zero() {
        let (pb, rec) = build_svm_dual(&toy()).unwrap();
        let a = pb.vector(vec![0.0; 4]).unwrap();
        assert_eq!(rec.dual_objective(&a), 0.0);
        assert_eq!(rec.recover_w(&a), vec![0.0, 0.0]);
        assert_eq!(pb.mu_value(&a).unwrap(), 0.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (pb, _) = build_svm_dual(&toy()).unwrap();
        let a = pb.vector(vec![0.1, 0.3, 0.2, 0.05]).unwrap();
        let g = pb.oracle().full_gradient(&a);
        let h = 1e-6;
        for j in 0..4 {
            let mut up = a.clone();
            up.as_mut_slice()[j] += h;
            let mut dn = a.clone();
            dn.as_mut_slice()[j] -= h;
            let fd = (pb.mu_uncounted(&up) - pb.mu_uncounted(&dn)) / (2.0 * h);
            let gj = g.as_slice()[j];
            assert!((fd - gj).abs() <= 1e-5 * gj.abs().max(1.0), "{fd} vs {gj}");
        }
    }

    #[test]
    fn bad_labels_are_rejected() {
        let mut s = toy();
        s.objects[0].label = 0.5;
        assert!(matches!(build_svm_dual(&s), Err(Error::InvalidParameter(_))));
        assert!(parse_svm_csv("a,2,1.0\n").is_err());
        assert!(parse_svm_csv("a,1,1.0\na,-1,2.0\n").is_err());
    }

    #[test]
    fn csv_groups_points_by_object() {
        let objs = parse_svm_csv("object_id,label,f1,f2\np,1,1,2\nq,-1,0,-1\np,1,3,4\nq,-1,-2,0\n").unwrap();
        assert_eq!(objs.len(), 2);
        assert_eq!(objs[0].points, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(objs[1].label, -1.0);
    }
}
