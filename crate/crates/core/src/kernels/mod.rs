//! Kernels over context-action space and the kernel ridge regression posterior.
//!
//! A point of the regression domain is the raw triple (own-action vector,
//! opponents-aggregate vector, context vector). Each base kernel reads a
//! projection of that triple, optionally rescaled, so that composite kernels
//! such as `k1(own) * k2((own + opponents) / context)` are plain data.

mod confidence;
mod posterior;

pub use confidence::{beta_schedule, ucb, BetaRule};
pub use posterior::{DataSet, PosteriorModel, PosteriorView};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("context entry {index} is {value}, must be strictly positive for load/context projection")]
    NonPositiveContext { index: usize, value: f64 },
    #[error("invalid kernel specification: {0}")]
    InvalidSpec(String),
    #[error("regularized Gram matrix is not positive definite at data size {size}")]
    Factorization { size: usize },
    #[error("regularization must be at least 1, got {0}")]
    Regularization(f64),
    #[error("confidence level must lie in (0, 1), got {0}")]
    Delta(f64),
}

/// A point of the regression domain, stored as the raw triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub own: Vec<f64>,
    pub opponents: Vec<f64>,
    pub context: Vec<f64>,
}

impl Point {
    pub fn new(own: Vec<f64>, opponents: Vec<f64>, context: Vec<f64>) -> Self {
        Self {
            own,
            opponents,
            context,
        }
    }
}

/// Which part of the raw triple a base kernel reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Projection {
    Own,
    Opponents,
    Context,
    /// `own + opponents`, elementwise.
    Load,
    /// `(own + opponents) / context`, elementwise.
    LoadOverContext,
    /// `own | context`, concatenated.
    OwnContext,
    /// `own | opponents | context`, concatenated.
    #[default]
    Joint,
}

/// Rescaling applied to a projected vector before it enters a base kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Normalization {
    /// Inputs are assumed admissible already.
    #[default]
    None,
    /// Divide by the L2 norm (the zero vector is left as is).
    UnitNorm,
    /// Divide by `factor`, then project onto the unit ball if the norm still exceeds 1.
    Scale { factor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct InputMap {
    #[serde(default)]
    pub projection: Projection,
    #[serde(default)]
    pub normalization: Normalization,
}

impl InputMap {
    pub fn new(projection: Projection, normalization: Normalization) -> Self {
        Self {
            projection,
            normalization,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaternNu {
    #[serde(rename = "1/2")]
    Half,
    #[serde(rename = "3/2")]
    ThreeHalves,
    #[serde(rename = "5/2")]
    FiveHalves,
}

/// Declarative description of a (possibly composite) kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KernelSpec {
    Linear {
        #[serde(default)]
        input: InputMap,
    },
    /// `((<u, v> + offset) / (1 + offset))^degree`.
    Polynomial {
        degree: u32,
        offset: f64,
        #[serde(default)]
        input: InputMap,
    },
    /// One lengthscale means isotropic; otherwise one per input dimension.
    SquaredExponential {
        lengthscales: Vec<f64>,
        #[serde(default)]
        input: InputMap,
    },
    Matern {
        nu: MaternNu,
        lengthscale: f64,
        #[serde(default)]
        input: InputMap,
    },
    Product {
        factors: Vec<KernelSpec>,
    },
}

/// Pre-projected, pre-scaled inputs of every base kernel of a spec, in
/// depth-first order. Computing these once per point keeps Gram-row
/// evaluation to a handful of dot products.
#[derive(Debug, Clone, PartialEq)]
pub struct Features(Vec<Vec<f64>>);

impl Features {
    pub fn leaves(&self) -> &[Vec<f64>] {
        &self.0
    }
}

impl KernelSpec {
    pub fn linear(input: InputMap) -> Self {
        KernelSpec::Linear { input }
    }

    pub fn polynomial(degree: u32, offset: f64, input: InputMap) -> Self {
        KernelSpec::Polynomial {
            degree,
            offset,
            input,
        }
    }

    pub fn squared_exponential(lengthscale: f64, input: InputMap) -> Self {
        KernelSpec::SquaredExponential {
            lengthscales: vec![lengthscale],
            input,
        }
    }

    pub fn product(factors: Vec<KernelSpec>) -> Self {
        KernelSpec::Product { factors }
    }

    /// Checks hyperparameters (positive lengthscales, non-negative offsets,
    /// positive scale factors).
    pub fn validate(&self) -> Result<(), KernelError> {
        let check_input = |input: &InputMap| match input.normalization {
            Normalization::Scale { factor } if !(factor > 0.0 && factor.is_finite()) => Err(
                KernelError::InvalidSpec(format!("scale factor must be positive, got {factor}")),
            ),
            _ => Ok(()),
        };
        match self {
            KernelSpec::Linear { input } => check_input(input),
            KernelSpec::Polynomial {
                degree,
                offset,
                input,
            } => {
                if *degree == 0 {
                    return Err(KernelError::InvalidSpec("polynomial degree must be positive".into()));
                }
                if !(*offset >= 0.0) {
                    return Err(KernelError::InvalidSpec(format!(
                        "polynomial offset must be non-negative, got {offset}"
                    )));
                }
                check_input(input)
            }
            KernelSpec::SquaredExponential {
                lengthscales,
                input,
            } => {
                if lengthscales.is_empty() || lengthscales.iter().any(|l| !(*l > 0.0)) {
                    return Err(KernelError::InvalidSpec(
                        "squared-exponential lengthscales must be positive".into(),
                    ));
                }
                check_input(input)
            }
            KernelSpec::Matern {
                lengthscale, input, ..
            } => {
                if !(*lengthscale > 0.0) {
                    return Err(KernelError::InvalidSpec("matern lengthscale must be positive".into()));
                }
                check_input(input)
            }
            KernelSpec::Product { factors } => factors.iter().try_for_each(KernelSpec::validate),
        }
    }

    /// True when no base kernel reads the context coordinates.
    pub fn ignores_context(&self) -> bool {
        match self {
            KernelSpec::Product { factors } => factors.iter().all(KernelSpec::ignores_context),
            KernelSpec::Linear { input }
            | KernelSpec::Polynomial { input, .. }
            | KernelSpec::SquaredExponential { input, .. }
            | KernelSpec::Matern { input, .. } => matches!(
                input.projection,
                Projection::Own | Projection::Opponents | Projection::Load
            ),
        }
    }

    pub fn featurize(&self, point: &Point) -> Result<Features, KernelError> {
        let mut leaves = Vec::new();
        self.push_features(point, &mut leaves)?;
        Ok(Features(leaves))
    }

    fn push_features(&self, point: &Point, out: &mut Vec<Vec<f64>>) -> Result<(), KernelError> {
        match self {
            KernelSpec::Product { factors } => {
                for f in factors {
                    f.push_features(point, out)?;
                }
            }
            KernelSpec::Linear { input } | KernelSpec::Polynomial { input, .. } => {
                out.push(map_input(point, input)?);
            }
            KernelSpec::SquaredExponential {
                lengthscales,
                input,
            } => {
                let mut v = map_input(point, input)?;
                if lengthscales.len() == 1 {
                    let l = lengthscales[0];
                    v.iter_mut().for_each(|x| *x /= l);
                } else if lengthscales.len() == v.len() {
                    v.iter_mut().zip(lengthscales).for_each(|(x, l)| *x /= l);
                } else {
                    return Err(KernelError::Dimension {
                        what: "squared-exponential lengthscales",
                        expected: lengthscales.len(),
                        got: v.len(),
                    });
                }
                out.push(v);
            }
            KernelSpec::Matern {
                lengthscale, input, ..
            } => {
                let mut v = map_input(point, input)?;
                v.iter_mut().for_each(|x| *x /= lengthscale);
                out.push(v);
            }
        }
        Ok(())
    }

    /// Kernel value between two featurized points of this spec.
    pub fn eval_features(&self, a: &Features, b: &Features) -> f64 {
        let mut idx = 0;
        self.eval_leaves(&a.0, &b.0, &mut idx)
    }

    fn eval_leaves(&self, a: &[Vec<f64>], b: &[Vec<f64>], idx: &mut usize) -> f64 {
        match self {
            KernelSpec::Product { factors } => {
                let mut acc = 1.0;
                for f in factors {
                    acc *= f.eval_leaves(a, b, idx);
                }
                acc
            }
            leaf => {
                let (u, v) = (&a[*idx], &b[*idx]);
                *idx += 1;
                match leaf {
                    KernelSpec::Linear { .. } => dot(u, v),
                    KernelSpec::Polynomial { degree, offset, .. } => {
                        ((dot(u, v) + offset) / (1.0 + offset)).powi(*degree as i32)
                    }
                    KernelSpec::SquaredExponential { .. } => (-0.5 * sq_dist(u, v)).exp(),
                    KernelSpec::Matern { nu, .. } => {
                        let r = sq_dist(u, v).sqrt();
                        match nu {
                            MaternNu::Half => (-r).exp(),
                            MaternNu::ThreeHalves => {
                                let s = 3f64.sqrt() * r;
                                (1.0 + s) * (-s).exp()
                            }
                            MaternNu::FiveHalves => {
                                let s = 5f64.sqrt() * r;
                                (1.0 + s + s * s / 3.0) * (-s).exp()
                            }
                        }
                    }
                    KernelSpec::Product { .. } => unreachable!(),
                }
            }
        }
    }
}

/// Evaluates `k(x, x')` for two raw points.
pub fn kernel_eval(spec: &KernelSpec, x: &Point, y: &Point) -> Result<f64, KernelError> {
    let fx = spec.featurize(x)?;
    let fy = spec.featurize(y)?;
    for (u, v) in fx.0.iter().zip(&fy.0) {
        if u.len() != v.len() {
            return Err(KernelError::Dimension {
                what: "kernel input",
                expected: u.len(),
                got: v.len(),
            });
        }
    }
    Ok(spec.eval_features(&fx, &fy))
}

fn map_input(point: &Point, input: &InputMap) -> Result<Vec<f64>, KernelError> {
    let mut v = project(point, input.projection)?;
    match input.normalization {
        Normalization::None => {}
        Normalization::UnitNorm => {
            let n = norm(&v);
            if n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
            }
        }
        Normalization::Scale { factor } => {
            v.iter_mut().for_each(|x| *x /= factor);
            let n = norm(&v);
            if n > 1.0 {
                v.iter_mut().for_each(|x| *x /= n);
            }
        }
    }
    Ok(v)
}

fn project(point: &Point, projection: Projection) -> Result<Vec<f64>, KernelError> {
    let same_len = |what: &'static str, a: &[f64], b: &[f64]| {
        if a.len() != b.len() {
            Err(KernelError::Dimension {
                what,
                expected: a.len(),
                got: b.len(),
            })
        } else {
            Ok(())
        }
    };
    Ok(match projection {
        Projection::Own => point.own.clone(),
        Projection::Opponents => point.opponents.clone(),
        Projection::Context => point.context.clone(),
        Projection::Load => {
            same_len("opponents aggregate", &point.own, &point.opponents)?;
            point.own.iter().zip(&point.opponents).map(|(a, b)| a + b).collect()
        }
        Projection::LoadOverContext => {
            same_len("opponents aggregate", &point.own, &point.opponents)?;
            same_len("context", &point.own, &point.context)?;
            let mut out = Vec::with_capacity(point.own.len());
            for (i, ((a, b), z)) in point.own.iter().zip(&point.opponents).zip(&point.context).enumerate() {
                if !(*z > 0.0) {
                    return Err(KernelError::NonPositiveContext { index: i, value: *z });
                }
                out.push((a + b) / z);
            }
            out
        }
        Projection::OwnContext => point.own.iter().chain(&point.context).copied().collect(),
        Projection::Joint => point
            .own
            .iter()
            .chain(&point.opponents)
            .chain(&point.context)
            .copied()
            .collect(),
    })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(own: &[f64], opp: &[f64], ctx: &[f64]) -> Point {
        Point::new(own.to_vec(), opp.to_vec(), ctx.to_vec())
    }

    #[test]
    fn se_on_identical_inputs_is_one() {
        let k = KernelSpec::squared_exponential(0.7, InputMap::default());
        let x = pt(&[0.2], &[0.4, 0.1], &[0.9]);
        assert_eq!(kernel_eval(&k, &x, &x).unwrap(), 1.0);
    }

    #[test]
    fn linear_on_unit_identical_inputs_is_one() {
        let k = KernelSpec::linear(InputMap::new(Projection::Own, Normalization::UnitNorm));
        let x = pt(&[3.0, 4.0], &[], &[]);
        assert!((kernel_eval(&k, &x, &x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_is_product_of_factors() {
        let k1 = KernelSpec::linear(InputMap::new(Projection::Own, Normalization::UnitNorm));
        let k2 = KernelSpec::polynomial(
            4,
            1.0,
            InputMap::new(Projection::LoadOverContext, Normalization::Scale { factor: 5.0 }),
        );
        let k = KernelSpec::product(vec![k1.clone(), k2.clone()]);
        let x = pt(&[1.0, 0.0, 1.0], &[2.0, 3.0, 0.5], &[1.0, 2.0, 4.0]);
        let y = pt(&[1.0, 1.0, 0.0], &[0.5, 1.0, 2.0], &[2.0, 2.0, 1.0]);
        let prod = kernel_eval(&k1, &x, &y).unwrap() * kernel_eval(&k2, &x, &y).unwrap();
        assert!((kernel_eval(&k, &x, &y).unwrap() - prod).abs() < 1e-15);
    }

    #[test]
    fn matern_variants_are_one_at_zero_distance_and_decay() {
        for nu in [MaternNu::Half, MaternNu::ThreeHalves, MaternNu::FiveHalves] {
            let k = KernelSpec::Matern {
                nu,
                lengthscale: 0.5,
                input: InputMap::default(),
            };
            let x = pt(&[0.1], &[], &[0.3]);
            let y = pt(&[0.6], &[], &[0.3]);
            assert!((kernel_eval(&k, &x, &x).unwrap() - 1.0).abs() < 1e-15);
            let v = kernel_eval(&k, &x, &y).unwrap();
            assert!(v > 0.0 && v < 1.0);
        }
        // nu = 1/2 is the exponential kernel
        let k = KernelSpec::Matern {
            nu: MaternNu::Half,
            lengthscale: 2.0,
            input: InputMap::default(),
        };
        let v = kernel_eval(&k, &pt(&[0.0], &[], &[]), &pt(&[1.0], &[], &[])).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let k = KernelSpec::linear(InputMap::new(Projection::Own, Normalization::None));
        let err = kernel_eval(&k, &pt(&[1.0], &[], &[]), &pt(&[1.0, 0.0], &[], &[])).unwrap_err();
        assert!(matches!(err, KernelError::Dimension { .. }));
        let k = KernelSpec::linear(InputMap::new(Projection::Load, Normalization::None));
        assert!(k.featurize(&pt(&[1.0, 2.0], &[1.0], &[])).is_err());
        let k = KernelSpec::SquaredExponential {
            lengthscales: vec![1.0, 2.0],
            input: InputMap::default(),
        };
        assert!(k.featurize(&pt(&[1.0], &[], &[])).is_err());
    }

    #[test]
    fn load_over_context_rejects_zero_capacity() {
        let k = KernelSpec::linear(InputMap::new(Projection::LoadOverContext, Normalization::None));
        let err = k.featurize(&pt(&[1.0], &[1.0], &[0.0])).unwrap_err();
        assert!(matches!(err, KernelError::NonPositiveContext { index: 0, .. }));
    }

    #[test]
    fn scale_normalization_clips_into_unit_ball() {
        let k = KernelSpec::linear(InputMap::new(Projection::Own, Normalization::Scale { factor: 2.0 }));
        let f = k.featurize(&pt(&[10.0, 0.0], &[], &[])).unwrap();
        assert_eq!(f.leaves()[0], vec![1.0, 0.0]);
        let f = k.featurize(&pt(&[1.0, 0.0], &[], &[])).unwrap();
        assert_eq!(f.leaves()[0], vec![0.5, 0.0]);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let k = KernelSpec::product(vec![
            KernelSpec::linear(InputMap::new(Projection::Own, Normalization::UnitNorm)),
            KernelSpec::polynomial(
                4,
                1.0,
                InputMap::new(Projection::LoadOverContext, Normalization::Scale { factor: 3.0 }),
            ),
            KernelSpec::Matern {
                nu: MaternNu::FiveHalves,
                lengthscale: 0.3,
                input: InputMap::default(),
            },
        ]);
        let json = serde_json::to_string(&k).unwrap();
        let back: KernelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(k, back);
        let parsed: KernelSpec =
            serde_json::from_str(r#"{"kind":"squared-exponential","lengthscales":[0.5]}"#).unwrap();
        assert_eq!(parsed, KernelSpec::squared_exponential(0.5, InputMap::default()));
    }

    #[test]
    fn validate_rejects_bad_hyperparameters() {
        assert!(KernelSpec::polynomial(0, 1.0, InputMap::default()).validate().is_err());
        assert!(KernelSpec::polynomial(2, -1.0, InputMap::default()).validate().is_err());
        assert!(KernelSpec::squared_exponential(0.0, InputMap::default()).validate().is_err());
        assert!(KernelSpec::linear(InputMap::new(Projection::Own, Normalization::Scale { factor: 0.0 }))
            .validate()
            .is_err());
        assert!(KernelSpec::product(vec![]).validate().is_ok());
    }

    fn arb_spec() -> impl Strategy<Value = KernelSpec> {
        let lin = Just(KernelSpec::linear(InputMap::new(Projection::Joint, Normalization::UnitNorm)));
        let poly = (1u32..6, 0.0f64..3.0).prop_map(|(d, c)| {
            KernelSpec::polynomial(d, c, InputMap::new(Projection::Load, Normalization::Scale { factor: 2.0 }))
        });
        let se = (0.1f64..3.0).prop_map(|l| KernelSpec::squared_exponential(l, InputMap::default()));
        let leaf = prop_oneof![lin, poly, se];
        prop::collection::vec(leaf, 1..4).prop_map(KernelSpec::product)
    }

    fn arb_point() -> impl Strategy<Value = Point> {
        (
            prop::collection::vec(-2.0f64..2.0, 3),
            prop::collection::vec(-2.0f64..2.0, 3),
            prop::collection::vec(0.1f64..2.0, 2),
        )
            .prop_map(|(a, b, c)| Point::new(a, b, c))
    }

    proptest! {
        #[test]
        fn kernels_are_symmetric_and_bounded(spec in arb_spec(), x in arb_point(), y in arb_point()) {
            let kxy = kernel_eval(&spec, &x, &y).unwrap();
            let kyx = kernel_eval(&spec, &y, &x).unwrap();
            prop_assert_eq!(kxy, kyx);
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&kxy));
            prop_assert!(kernel_eval(&spec, &x, &x).unwrap() >= 0.0);
        }
    }
}
