use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{Features, KernelError, KernelSpec, Point};

/// Past game data: inputs and noisy rewards in round order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataSet {
    inputs: Vec<Point>,
    targets: Vec<f64>,
}

impl DataSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Point, f64)>) -> Self {
        let mut data = Self::new();
        for (x, y) in pairs {
            data.push(x, y);
        }
        data
    }

    pub fn push(&mut self, x: Point, y: f64) {
        self.inputs.push(x);
        self.targets.push(y);
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Point] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

/// Kernel ridge regression state.
///
/// The lower-triangular factor `L` of `K_t + λI` is stored packed by rows and
/// extended one row per observation, so an update costs `O(t^2)`. Because
/// rows are only ever appended, the leading `n x n` block of `L` factors the
/// Gram matrix of the first `n` points; [`PosteriorModel::prefix`] exposes
/// that as a read-only snapshot of the model after `n` observations.
#[derive(Debug)]
pub struct PosteriorModel {
    spec: KernelSpec,
    lambda: f64,
    budget: Option<usize>,
    data: DataSet,
    features: Vec<Features>,
    /// Row `i` occupies `factor[i(i+1)/2 .. (i+1)(i+2)/2]`.
    factor: Vec<f64>,
    /// `L^{-1} y`.
    whitened: Vec<f64>,
    log_diag_sum: f64,
    evicted: usize,
    clamps: AtomicU64,
}

impl Clone for PosteriorModel {
    fn clone(&self) -> Self {
        Self {
            spec: self.spec.clone(),
            lambda: self.lambda,
            budget: self.budget,
            data: self.data.clone(),
            features: self.features.clone(),
            factor: self.factor.clone(),
            whitened: self.whitened.clone(),
            log_diag_sum: self.log_diag_sum,
            evicted: self.evicted,
            clamps: AtomicU64::new(self.clamps.load(Ordering::Relaxed)),
        }
    }
}

impl PosteriorModel {
    /// An empty model (the prior).
    pub fn new(spec: KernelSpec, lambda: f64) -> Result<Self, KernelError> {
        if !(lambda >= 1.0) {
            return Err(KernelError::Regularization(lambda));
        }
        spec.validate()?;
        Ok(Self {
            spec,
            lambda,
            budget: None,
            data: DataSet::new(),
            features: Vec::new(),
            factor: Vec::new(),
            whitened: Vec::new(),
            log_diag_sum: 0.0,
            evicted: 0,
            clamps: AtomicU64::new(0),
        })
    }

    /// Fits the posterior on a whole data set.
    pub fn fit(spec: KernelSpec, data: &DataSet, lambda: f64) -> Result<Self, KernelError> {
        let mut model = Self::new(spec, lambda)?;
        for (x, y) in data.inputs.iter().zip(&data.targets) {
            model.append(x.clone(), *y)?;
        }
        Ok(model)
    }

    /// Caps the number of retained observations. When an update would exceed
    /// the cap, the oldest half of the window is dropped and the factor rebuilt.
    pub fn with_budget(mut self, budget: Option<usize>) -> Self {
        self.budget = budget.map(|b| b.max(2));
        self
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &DataSet {
        &self.data
    }

    /// Number of observations dropped by the data budget so far.
    pub fn evicted(&self) -> usize {
        self.evicted
    }

    /// How many times a numerically negative variance was clamped to zero.
    pub fn clamp_count(&self) -> u64 {
        self.clamps.load(Ordering::Relaxed)
    }

    /// True when the next [`update`](Self::update) will trigger an eviction.
    pub fn will_evict(&self) -> bool {
        matches!(self.budget, Some(cap) if self.len() >= cap)
    }

    /// Adds one observation. Returns the information-gain increment
    /// `0.5 log(1 + σ²(x)/λ)` evaluated on the model before the update.
    pub fn update(&mut self, x: Point, y: f64) -> Result<f64, KernelError> {
        if self.will_evict() {
            self.evict_oldest_half()?;
        }
        self.append(x, y)
    }

    fn append(&mut self, x: Point, y: f64) -> Result<f64, KernelError> {
        let f = self.spec.featurize(&x)?;
        self.check_dims(&f)?;
        let n = self.len();
        let mut row: Vec<f64> = self
            .features
            .iter()
            .map(|g| self.spec.eval_features(g, &f))
            .collect();
        forward_substitute(&self.factor, &mut row);
        let kxx = self.spec.eval_features(&f, &f);
        let pivot = kxx + self.lambda - row.iter().map(|v| v * v).sum::<f64>();
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(KernelError::Factorization { size: n + 1 });
        }
        let d = pivot.sqrt();
        let w = (y - super::dot(&row, &self.whitened)) / d;
        self.factor.extend_from_slice(&row);
        self.factor.push(d);
        self.whitened.push(w);
        self.log_diag_sum += d.ln();
        self.features.push(f);
        self.data.push(x, y);
        Ok(0.5 * (pivot / self.lambda).ln())
    }

    fn check_dims(&self, f: &Features) -> Result<(), KernelError> {
        if let Some(first) = self.features.first() {
            for (u, v) in first.leaves().iter().zip(f.leaves()) {
                if u.len() != v.len() {
                    return Err(KernelError::Dimension {
                        what: "kernel input",
                        expected: u.len(),
                        got: v.len(),
                    });
                }
            }
        }
        Ok(())
    }

    fn evict_oldest_half(&mut self) -> Result<(), KernelError> {
        let n = self.len();
        let drop = n / 2;
        let keep = DataSet {
            inputs: self.data.inputs[drop..].to_vec(),
            targets: self.data.targets[drop..].to_vec(),
        };
        let mut fresh = Self::fit(self.spec.clone(), &keep, self.lambda)?;
        fresh.budget = self.budget;
        fresh.evicted = self.evicted + drop;
        fresh.clamps = AtomicU64::new(self.clamp_count());
        *self = fresh;
        Ok(())
    }

    pub fn featurize(&self, x: &Point) -> Result<Features, KernelError> {
        let f = self.spec.featurize(x)?;
        self.check_dims(&f)?;
        Ok(f)
    }

    /// Snapshot of the model after its first `len` retained observations.
    pub fn prefix(&self, len: usize) -> PosteriorView<'_> {
        assert!(len <= self.len(), "prefix {len} exceeds model size {}", self.len());
        PosteriorView { model: self, len }
    }

    pub fn view(&self) -> PosteriorView<'_> {
        self.prefix(self.len())
    }

    /// Posterior mean and variance at `x`.
    pub fn posterior_mean_var(&self, x: &Point) -> Result<(f64, f64), KernelError> {
        let f = self.featurize(x)?;
        Ok(self.view().mean_var(&f))
    }

    /// `(μ, σ²)` at `f` under every prefix `0..=len` of the data, from a
    /// single forward pass. Entry `l` equals `prefix(l).mean_var(f)`.
    pub fn prefix_mean_vars(&self, f: &Features, len: usize) -> Vec<(f64, f64)> {
        assert!(len <= self.len(), "prefix {len} exceeds model size {}", self.len());
        let kxx = self.spec.eval_features(f, f);
        let mut v: Vec<f64> = self.features[..len]
            .iter()
            .map(|g| self.spec.eval_features(g, f))
            .collect();
        let mut out = Vec::with_capacity(len + 1);
        out.push((0.0, kxx));
        let (mut mean, mut sq) = (0.0, 0.0);
        let mut start = 0;
        for i in 0..len {
            let row = &self.factor[start..start + i + 1];
            let s = super::dot(&row[..i], &v[..i]);
            v[i] = (v[i] - s) / row[i];
            start += i + 1;
            mean += v[i] * self.whitened[i];
            sq += v[i] * v[i];
            let mut var = kxx - sq;
            if var < 0.0 {
                self.clamps.fetch_add(1, Ordering::Relaxed);
                var = 0.0;
            }
            out.push((mean, var));
        }
        out
    }

    /// `0.5 log det(I + K_t / λ)` on the retained observations.
    pub fn realized_information_gain(&self) -> f64 {
        (self.log_diag_sum - 0.5 * self.len() as f64 * self.lambda.ln()).max(0.0)
    }
}

/// Read-only posterior over the first `len` observations of a model.
#[derive(Debug, Clone, Copy)]
pub struct PosteriorView<'a> {
    model: &'a PosteriorModel,
    len: usize,
}

impl PosteriorView<'_> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `(μ(x), σ²(x))` for a featurized query, with σ² clamped at zero.
    pub fn mean_var(&self, f: &Features) -> (f64, f64) {
        let spec = &self.model.spec;
        let kxx = spec.eval_features(f, f);
        if self.len == 0 {
            return (0.0, kxx);
        }
        let mut v: Vec<f64> = self.model.features[..self.len]
            .iter()
            .map(|g| spec.eval_features(g, f))
            .collect();
        let packed = &self.model.factor[..self.len * (self.len + 1) / 2];
        forward_substitute(packed, &mut v);
        let mean = super::dot(&v, &self.model.whitened[..self.len]);
        let mut var = kxx - v.iter().map(|x| x * x).sum::<f64>();
        if var < 0.0 {
            self.model.clamps.fetch_add(1, Ordering::Relaxed);
            var = 0.0;
        }
        (mean, var)
    }

    /// `min{μ(x) + β σ(x), 1}`.
    pub fn ucb(&self, f: &Features, beta: f64) -> f64 {
        let (m, v) = self.mean_var(f);
        (m + beta * v.sqrt()).min(1.0)
    }
}

/// Solves `L v = b` in place, where `L` is packed row-wise and has at least
/// `b.len()` rows.
fn forward_substitute(packed: &[f64], b: &mut [f64]) {
    let mut start = 0;
    for i in 0..b.len() {
        let row = &packed[start..start + i + 1];
        let s = super::dot(&row[..i], &b[..i]);
        b[i] = (b[i] - s) / row[i];
        start += i + 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{InputMap, Normalization, Projection};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn se() -> KernelSpec {
        KernelSpec::squared_exponential(0.4, InputMap::default())
    }

    fn random_point(rng: &mut ChaCha8Rng) -> Point {
        Point::new(
            vec![rng.gen()],
            vec![rng.gen(), rng.gen()],
            vec![rng.gen()],
        )
    }

    /// Dense evaluation of the ridge-regression posterior by explicit inversion.
    fn dense(spec: &KernelSpec, data: &DataSet, lambda: f64, x: &Point) -> (f64, f64) {
        let n = data.len();
        let k = |a: &Point, b: &Point| crate::kernels::kernel_eval(spec, a, b).unwrap();
        let gram = DMatrix::from_fn(n, n, |i, j| {
            k(&data.inputs()[i], &data.inputs()[j]) + if i == j { lambda } else { 0.0 }
        });
        let inv = gram.try_inverse().unwrap();
        let kx = DVector::from_fn(n, |i, _| k(&data.inputs()[i], x));
        let y = DVector::from_column_slice(data.targets());
        let mean = (kx.transpose() * &inv * y)[0];
        let var = k(x, x) - (kx.transpose() * &inv * &kx)[0];
        (mean, var)
    }

    #[test]
    fn empty_model_is_the_prior() {
        let m = PosteriorModel::new(se(), 1.0).unwrap();
        let x = Point::new(vec![0.3], vec![0.1, 0.2], vec![0.5]);
        assert_eq!(m.posterior_mean_var(&x).unwrap(), (0.0, 1.0));
        assert_eq!(m.realized_information_gain(), 0.0);
    }

    #[test]
    fn single_observation_hand_values() {
        let x = Point::new(vec![0.3], vec![0.1, 0.2], vec![0.5]);
        let data = DataSet::from_pairs([(x.clone(), 0.8)]);
        let m = PosteriorModel::fit(se(), &data, 1.0).unwrap();
        let (mu, var) = m.posterior_mean_var(&x).unwrap();
        assert!((mu - 0.4).abs() < 1e-15);
        assert!((var - 0.5).abs() < 1e-15);
        assert!((m.realized_information_gain() - 0.5 * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn regularization_below_one_is_rejected() {
        assert_eq!(
            PosteriorModel::new(se(), 0.5).unwrap_err(),
            KernelError::Regularization(0.5)
        );
    }

    #[test]
    fn matches_dense_inversion_on_random_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data = DataSet::from_pairs((0..20).map(|_| {
            let x = random_point(&mut rng);
            (x, rng.gen_range(-1.0..1.0))
        }));
        let m = PosteriorModel::fit(se(), &data, 1.0).unwrap();
        for _ in 0..20 {
            let q = random_point(&mut rng);
            let (mu, var) = m.posterior_mean_var(&q).unwrap();
            let (dm, dv) = dense(&se(), &data, 1.0, &q);
            assert!((mu - dm).abs() < 1e-8, "{mu} vs {dm}");
            assert!((var - dv).abs() < 1e-8, "{var} vs {dv}");
        }
        assert_eq!(m.clamp_count(), 0);
    }

    #[test]
    fn sequential_updates_equal_batch_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs: Vec<_> = (0..10)
            .map(|_| (random_point(&mut rng), rng.gen_range(0.0..1.0)))
            .collect();
        let batch = PosteriorModel::fit(se(), &DataSet::from_pairs(pairs.clone()), 2.0).unwrap();
        let mut inc = PosteriorModel::new(se(), 2.0).unwrap();
        for (x, y) in pairs {
            inc.update(x, y).unwrap();
        }
        for _ in 0..10 {
            let q = random_point(&mut rng);
            let (a, b) = (batch.posterior_mean_var(&q).unwrap(), inc.posterior_mean_var(&q).unwrap());
            assert!((a.0 - b.0).abs() < 1e-8 && (a.1 - b.1).abs() < 1e-8);
        }
    }

    #[test]
    fn information_gain_of_repeated_input() {
        // k(x,x) = 1, λ = 1: det(I + 11ᵀ) = 1 + t.
        let x = Point::new(vec![0.5], vec![], vec![]);
        let mut m = PosteriorModel::new(se(), 1.0).unwrap();
        for t in 1..=8 {
            let before = m.posterior_mean_var(&x).unwrap().1;
            let inc = m.update(x.clone(), 0.3).unwrap();
            assert!((inc - 0.5 * (1.0 + before).ln()).abs() < 1e-12);
            assert!((m.realized_information_gain() - 0.5 * (1.0 + t as f64).ln()).abs() < 1e-10);
        }
    }

    #[test]
    fn variance_is_non_increasing_over_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_point(&mut rng);
        let mut m = PosteriorModel::new(se(), 1.0).unwrap();
        let mut last = m.posterior_mean_var(&q).unwrap().1;
        for _ in 0..50 {
            m.update(random_point(&mut rng), rng.gen()).unwrap();
            let v = m.posterior_mean_var(&q).unwrap().1;
            assert!(v >= 0.0 && v <= last + 1e-12, "{v} > {last}");
            last = v;
        }
    }

    #[test]
    fn prefix_view_matches_smaller_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs: Vec<_> = (0..12).map(|_| (random_point(&mut rng), rng.gen())).collect();
        let full = PosteriorModel::fit(se(), &DataSet::from_pairs(pairs.clone()), 1.0).unwrap();
        let small = PosteriorModel::fit(se(), &DataSet::from_pairs(pairs[..5].to_vec()), 1.0).unwrap();
        let q = random_point(&mut rng);
        let f = full.featurize(&q).unwrap();
        assert_eq!(full.prefix(5).mean_var(&f), small.view().mean_var(&f));
    }

    #[test]
    fn single_pass_prefixes_match_prefix_views() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let pairs: Vec<_> = (0..25).map(|_| (random_point(&mut rng), rng.gen())).collect();
        let m = PosteriorModel::fit(se(), &DataSet::from_pairs(pairs), 1.0).unwrap();
        let f = m.featurize(&random_point(&mut rng)).unwrap();
        let all = m.prefix_mean_vars(&f, 20);
        assert_eq!(all.len(), 21);
        for (l, got) in all.iter().enumerate() {
            assert_eq!(*got, m.prefix(l).mean_var(&f));
        }
    }

    #[test]
    fn ucb_truncates_at_one_only() {
        let x = Point::new(vec![0.5], vec![], vec![]);
        let m = PosteriorModel::new(se(), 1.0).unwrap();
        let f = m.featurize(&x).unwrap();
        assert_eq!(m.view().ucb(&f, 2.0), 1.0);
        let data = DataSet::from_pairs([(x.clone(), -3.0)]);
        let m = PosteriorModel::fit(se(), &data, 1.0).unwrap();
        // μ = -1.5, σ² = 0.5 -> no lower truncation
        let got = m.view().ucb(&f, 0.0);
        assert!((got + 1.5).abs() < 1e-15);
    }

    #[test]
    fn budget_drops_oldest_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = PosteriorModel::new(se(), 1.0).unwrap().with_budget(Some(6));
        let pairs: Vec<_> = (0..7).map(|_| (random_point(&mut rng), rng.gen())).collect();
        for (x, y) in pairs.clone() {
            m.update(x, y).unwrap();
        }
        assert_eq!(m.len(), 4);
        assert_eq!(m.evicted(), 3);
        let oracle = PosteriorModel::fit(se(), &DataSet::from_pairs(pairs[3..].to_vec()), 1.0).unwrap();
        let q = random_point(&mut rng);
        let (a, b) = (m.posterior_mean_var(&q).unwrap(), oracle.posterior_mean_var(&q).unwrap());
        assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_against_training_data() {
        let k = KernelSpec::linear(InputMap::new(Projection::Own, Normalization::UnitNorm));
        let mut m = PosteriorModel::new(k, 1.0).unwrap();
        m.update(Point::new(vec![1.0, 0.0], vec![], vec![]), 1.0).unwrap();
        let err = m.posterior_mean_var(&Point::new(vec![1.0], vec![], vec![])).unwrap_err();
        assert!(matches!(err, KernelError::Dimension { .. }));
    }

    #[test]
    fn duplicate_linear_inputs_stay_factorizable() {
        // rank-deficient K is fine once λ I is added
        let k = KernelSpec::linear(InputMap::new(Projection::Own, Normalization::UnitNorm));
        let x = Point::new(vec![1.0, 0.0], vec![], vec![]);
        let data = DataSet::from_pairs((0..30).map(|_| (x.clone(), 1.0)));
        let m = PosteriorModel::fit(k, &data, 1.0).unwrap();
        let (mu, var) = m.posterior_mean_var(&x).unwrap();
        assert!((mu - 30.0 / 31.0).abs() < 1e-12);
        assert!((var - 1.0 / 31.0).abs() < 1e-12);
    }
}
