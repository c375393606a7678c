//! Multivariate partial least squares regression.
//!
//! Components are extracted by the two-block iteration: alternating weight
//! and score updates between the predictor and response blocks, with rank-one
//! deflation of both after each component. The outer relations decompose X
//! and Y; the inner relation regresses the Y-scores on the X-scores, one
//! coefficient per component. A composed coefficient matrix gives direct
//! prediction; a sequential score recursion reproduces it and exposes
//! per-component partial predictions for cross-validation.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trees::{model_from_json, model_to_json};

/// Relative squared-norm floor below which a residual block counts as
/// exhausted (rank reached).
const RANK_EPS: f64 = 1e-24;

#[derive(Debug, Clone, Copy)]
pub struct PlsrOptions {
    /// Scale predictor columns to unit variance before extraction.
    pub autoscale: bool,
    /// Relative change in the X-score vector that counts as converged.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PlsrOptions {
    fn default() -> Self {
        PlsrOptions {
            autoscale: true,
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

/// A fitted model mapping a predictor block to a multi-column response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlsrModel {
    x_mean: Array1<f64>,
    x_scale: Array1<f64>,
    y_mean: Array1<f64>,
    /// X-weights, one column per component (over kept predictors).
    weights: Array2<f64>,
    /// X-loadings (outer relation of X).
    x_loadings: Array2<f64>,
    /// Y-loadings (outer relation of Y).
    y_loadings: Array2<f64>,
    /// Inner-relation coefficients linking X-scores to Y-scores.
    inner_coeffs: Array1<f64>,
    /// Composed coefficients for direct prediction on centered/scaled data.
    coef: Array2<f64>,
    /// Indices of predictor columns kept after the zero-variance drop.
    kept_columns: Vec<usize>,
    n_features_in: usize,
    n_components: usize,
    /// Fitted training values, recorded at fit time. Not serialized.
    #[serde(skip)]
    training_fitted: Option<Array2<f64>>,
    /// Training X-scores. Not serialized.
    #[serde(skip)]
    training_scores: Option<Array2<f64>>,
}

/// Cross-validated choice of the component count.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSelection {
    pub candidates: Vec<usize>,
    /// Pooled held-out mean squared error per candidate.
    pub cv_error: Vec<f64>,
    pub chosen: usize,
    /// Set when the requested maximum had to be capped at the attainable
    /// rank.
    pub capped_from: Option<usize>,
}

impl PlsrModel {
    /// Fit with exactly `components`; errors if the data cannot support that
    /// many, naming the attainable maximum.
    pub fn fit(x: ArrayView2<f64>, y: ArrayView2<f64>, components: usize) -> Result<Self> {
        Self::fit_with(x, y, components, &PlsrOptions::default())
    }

    pub fn fit_with(
        x: ArrayView2<f64>,
        y: ArrayView2<f64>,
        components: usize,
        opts: &PlsrOptions,
    ) -> Result<Self> {
        let model = fit_core(x, y, components, opts)?;
        if model.n_components < components {
            return Err(Error::RankExceeded {
                requested: components,
                attainable: model.n_components,
            });
        }
        Ok(model)
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn n_features_in(&self) -> usize {
        self.n_features_in
    }

    pub fn n_targets(&self) -> usize {
        self.y_mean.len()
    }

    pub fn kept_columns(&self) -> &[usize] {
        &self.kept_columns
    }

    /// Fitted training values recorded when the model was fit (absent on a
    /// deserialized model).
    pub fn training_fitted(&self) -> Option<&Array2<f64>> {
        self.training_fitted.as_ref()
    }

    /// Training X-scores recorded when the model was fit.
    pub fn training_scores(&self) -> Option<&Array2<f64>> {
        self.training_scores.as_ref()
    }

    fn center_scale(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features_in {
            return Err(Error::SchemaMismatch {
                expected: self.n_features_in,
                got: x.ncols(),
            });
        }
        let mut xs = Array2::<f64>::zeros((x.nrows(), self.kept_columns.len()));
        for (out_col, &in_col) in self.kept_columns.iter().enumerate() {
            let mean = self.x_mean[out_col];
            let scale = self.x_scale[out_col];
            for (r, v) in x.column(in_col).iter().enumerate() {
                xs[[r, out_col]] = (v - mean) / scale;
            }
        }
        Ok(xs)
    }

    /// Predict via the composed coefficient matrix.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let xs = self.center_scale(x)?;
        let mut out = xs.dot(&self.coef);
        out += &self.y_mean.view().insert_axis(Axis(0));
        Ok(out)
    }

    /// Predict via the sequential score recursion: extract each component's
    /// score from the deflated row, accumulate its response contribution.
    /// Agrees with [`Self::predict`] to within numerical noise.
    pub fn predict_sequential(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let per = self.predict_cumulative(x)?;
        Ok(per
            .into_iter()
            .next_back()
            .expect("at least the zero-component prediction"))
    }

    /// Predictions after 0, 1, .., A components; entry `a` uses the first
    /// `a` components.
    pub fn predict_cumulative(&self, x: ArrayView2<f64>) -> Result<Vec<Array2<f64>>> {
        let mut xs = self.center_scale(x)?;
        let n = xs.nrows();
        let q = self.n_targets();
        let mut yhat = Array2::<f64>::zeros((n, q));
        yhat += &self.y_mean.view().insert_axis(Axis(0));
        let mut out = Vec::with_capacity(self.n_components + 1);
        out.push(yhat.clone());
        for a in 0..self.n_components {
            let w = self.weights.column(a);
            let p = self.x_loadings.column(a);
            let qv = self.y_loadings.column(a);
            let b = self.inner_coeffs[a];
            let scores = xs.dot(&w);
            for r in 0..n {
                let t = scores[r];
                for c in 0..xs.ncols() {
                    xs[[r, c]] -= t * p[c];
                }
                for c in 0..q {
                    yhat[[r, c]] += b * t * qv[c];
                }
            }
            out.push(yhat.clone());
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        model_to_json("plsr", self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        model_from_json("plsr", text)
    }
}

/// Extract up to `max_components`, stopping early when either block's
/// residual is exhausted. Never errors on rank; the caller decides whether a
/// shortfall matters.
fn fit_core(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    max_components: usize,
    opts: &PlsrOptions,
) -> Result<PlsrModel> {
    let n = x.nrows();
    if n == 0 || y.nrows() != n {
        return Err(Error::Validation(format!(
            "predictor and response blocks need equal, nonzero row counts (got {n} and {})",
            y.nrows()
        )));
    }
    if n < 2 {
        return Err(Error::Validation("need at least two rows".into()));
    }
    if max_components >= n {
        return Err(Error::Validation(format!(
            "{max_components} components need more than {max_components} rows, got {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("data contains non-finite values".into()));
    }

    // Drop constant predictor columns, recording the mask.
    let kept_columns: Vec<usize> = (0..x.ncols())
        .filter(|&c| {
            let col = x.column(c);
            let first = col[0];
            col.iter().any(|&v| v != first)
        })
        .collect();
    if kept_columns.is_empty() {
        return Err(Error::Validation(
            "every predictor column is constant".into(),
        ));
    }
    let pk = kept_columns.len();

    let mut x_mean = Array1::<f64>::zeros(pk);
    let mut x_scale = Array1::<f64>::ones(pk);
    let mut xc = Array2::<f64>::zeros((n, pk));
    for (out_col, &in_col) in kept_columns.iter().enumerate() {
        let col = x.column(in_col);
        let mean = col.sum() / n as f64;
        x_mean[out_col] = mean;
        if opts.autoscale {
            let var = col.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            x_scale[out_col] = var.sqrt();
        }
        for (r, &v) in col.iter().enumerate() {
            xc[[r, out_col]] = (v - mean) / x_scale[out_col];
        }
    }

    let q = y.ncols();
    let y_mean = y.sum_axis(Axis(0)) / n as f64;
    let mut yc = y.to_owned();
    yc -= &y_mean.view().insert_axis(Axis(0));

    let x_ss0: f64 = xc.iter().map(|v| v * v).sum();
    let y_ss0: f64 = yc.iter().map(|v| v * v).sum();

    let mut weights: Vec<Array1<f64>> = Vec::new();
    let mut x_loadings: Vec<Array1<f64>> = Vec::new();
    let mut y_loadings: Vec<Array1<f64>> = Vec::new();
    let mut inner_coeffs: Vec<f64> = Vec::new();
    let mut scores: Vec<Array1<f64>> = Vec::new();
    let mut fitted = Array2::<f64>::zeros((n, q));
    fitted += &y_mean.view().insert_axis(Axis(0));

    for component in 0..max_components {
        let x_ss: f64 = xc.iter().map(|v| v * v).sum();
        let y_ss: f64 = yc.iter().map(|v| v * v).sum();
        if x_ss <= RANK_EPS * x_ss0 || (y_ss0 > 0.0 && y_ss <= RANK_EPS * y_ss0) || y_ss0 == 0.0 {
            break;
        }

        // Start u from the strongest remaining response column.
        let u_col = (0..q)
            .max_by(|&a, &b| {
                let sa: f64 = yc.column(a).iter().map(|v| v * v).sum();
                let sb: f64 = yc.column(b).iter().map(|v| v * v).sum();
                sa.partial_cmp(&sb).unwrap()
            })
            .unwrap();
        let mut u = yc.column(u_col).to_owned();

        let mut t = Array1::<f64>::zeros(n);
        let mut w = Array1::<f64>::zeros(pk);
        let mut qv = Array1::<f64>::zeros(q);
        let mut converged = false;
        let mut exhausted = false;
        for _ in 0..opts.max_iter {
            w = xc.t().dot(&u);
            let wn = w.dot(&w).sqrt();
            if wn <= f64::MIN_POSITIVE {
                exhausted = true;
                break;
            }
            w /= wn;
            // A deterministic sign keeps the iteration from oscillating
            // between t and -t.
            fix_sign(&mut w);
            let t_new = xc.dot(&w);
            qv = yc.t().dot(&t_new);
            let qn = qv.dot(&qv).sqrt();
            if qn <= f64::MIN_POSITIVE {
                exhausted = true;
                break;
            }
            qv /= qn;
            u = yc.dot(&qv);
            let diff = (&t_new - &t).dot(&(&t_new - &t)).sqrt();
            let scale = t_new.dot(&t_new).sqrt();
            t = t_new;
            if diff <= opts.tol * scale.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
        if exhausted {
            break;
        }
        if !converged {
            return Err(Error::NonConvergence {
                component: component + 1,
            });
        }
        let tt = t.dot(&t);
        if tt <= RANK_EPS * x_ss0 / pk as f64 {
            break;
        }
        let p = xc.t().dot(&t) / tt;
        let b = u.dot(&t) / tt;

        // Deflate both blocks by this component.
        for r in 0..n {
            let tr = t[r];
            for c in 0..pk {
                xc[[r, c]] -= tr * p[c];
            }
            for c in 0..q {
                let contribution = b * tr * qv[c];
                yc[[r, c]] -= contribution;
                fitted[[r, c]] += contribution;
            }
        }

        weights.push(w);
        x_loadings.push(p);
        y_loadings.push(qv);
        inner_coeffs.push(b);
        scores.push(t);
    }

    let a = weights.len();
    let weights = columns_to_matrix(pk, &weights);
    let x_loadings = columns_to_matrix(pk, &x_loadings);
    let y_loadings = columns_to_matrix(q, &y_loadings);
    let inner_coeffs = Array1::from_vec(inner_coeffs);
    let score_matrix = columns_to_matrix(n, &scores);

    // B = W (PᵀW)⁻¹ diag(b) Qᵀ, so that X·B reproduces the recursion.
    let coef = if a == 0 {
        Array2::<f64>::zeros((pk, q))
    } else {
        let ptw = x_loadings.t().dot(&weights);
        let inv = invert_small(&ptw)?;
        let rotation = weights.dot(&inv);
        let mut scaled = y_loadings.t().to_owned();
        for (i, mut row) in scaled.rows_mut().into_iter().enumerate() {
            row *= inner_coeffs[i];
        }
        rotation.dot(&scaled)
    };

    Ok(PlsrModel {
        x_mean,
        x_scale,
        y_mean,
        weights,
        x_loadings,
        y_loadings,
        inner_coeffs,
        coef,
        kept_columns,
        n_features_in: x.ncols(),
        n_components: a,
        training_fitted: Some(fitted),
        training_scores: Some(score_matrix),
    })
}

/// Flip a weight vector so its largest-magnitude entry is positive.
fn fix_sign(w: &mut Array1<f64>) {
    let mut best = 0;
    for (i, v) in w.iter().enumerate() {
        if v.abs() > w[best].abs() {
            best = i;
        }
    }
    if w[best] < 0.0 {
        w.mapv_inplace(|v| -v);
    }
}

fn columns_to_matrix(rows: usize, cols: &[Array1<f64>]) -> Array2<f64> {
    let mut m = Array2::<f64>::zeros((rows, cols.len()));
    for (j, col) in cols.iter().enumerate() {
        m.column_mut(j).assign(col);
    }
    m
}

/// Gauss-Jordan inverse with partial pivoting; the inputs here are tiny
/// (A×A for A components).
fn invert_small(m: &Array2<f64>) -> Result<Array2<f64>> {
    let n = m.nrows();
    let mut a = m.to_owned();
    let mut inv = Array2::<f64>::eye(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[[i, col]].abs().partial_cmp(&a[[j, col]].abs()).unwrap())
            .unwrap();
        if a[[pivot, col]].abs() <= f64::MIN_POSITIVE {
            return Err(Error::Validation(
                "singular loading-weight product during coefficient composition".into(),
            ));
        }
        if pivot != col {
            for j in 0..n {
                a.swap([pivot, j], [col, j]);
                inv.swap([pivot, j], [col, j]);
            }
        }
        let d = a[[col, col]];
        for j in 0..n {
            a[[col, j]] /= d;
            inv[[col, j]] /= d;
        }
        for i in 0..n {
            if i != col {
                let factor = a[[i, col]];
                for j in 0..n {
                    a[[i, j]] -= factor * a[[col, j]];
                    inv[[i, j]] -= factor * inv[[col, j]];
                }
            }
        }
    }
    Ok(inv)
}

/// Choose a component count by contiguous-block cross-validation: block `f`
/// is held out, the model is fit on the remainder, and pooled held-out
/// squared error is tracked per component count. Ties go to the smaller
/// count. A `max_components` beyond the attainable rank is capped.
pub fn select_components(
    x: ArrayView2<f64>,
    y: ArrayView2<f64>,
    folds: usize,
    max_components: usize,
    opts: &PlsrOptions,
) -> Result<ComponentSelection> {
    let n = x.nrows();
    if folds < 2 {
        return Err(Error::Validation("need at least two folds".into()));
    }
    if n < 2 * folds {
        return Err(Error::Validation(format!(
            "{n} rows are too few for {folds} folds"
        )));
    }
    if max_components == 0 {
        return Err(Error::Validation("max_components must be positive".into()));
    }

    let bounds: Vec<(usize, usize)> = (0..folds)
        .map(|f| (f * n / folds, (f + 1) * n / folds))
        .collect();
    let mut cap = usize::MAX;
    let mut pooled_sse: Vec<f64> = Vec::new();
    let mut pooled_count = 0usize;
    let mut per_fold: Vec<(Vec<Array2<f64>>, Array2<f64>)> = Vec::new();

    for &(lo, hi) in &bounds {
        let train_rows: Vec<usize> = (0..n).filter(|r| *r < lo || *r >= hi).collect();
        let test_rows: Vec<usize> = (lo..hi).collect();
        let xt = x.select(Axis(0), &train_rows);
        let yt = y.select(Axis(0), &train_rows);
        let xv = x.select(Axis(0), &test_rows);
        let yv = y.select(Axis(0), &test_rows);
        let requested = max_components.min(xt.nrows().saturating_sub(1)).max(1);
        let model = fit_core(xt.view(), yt.view(), requested, opts)?;
        if model.n_components() == 0 {
            return Err(Error::Validation(
                "no components attainable on a training fold".into(),
            ));
        }
        cap = cap.min(model.n_components());
        let cumulative = model.predict_cumulative(xv.view())?;
        per_fold.push((cumulative, yv));
    }
    cap = cap.min(max_components);

    for (cumulative, yv) in &per_fold {
        pooled_count += yv.len();
        for a in 1..=cap {
            let pred = &cumulative[a];
            let sse: f64 = pred
                .iter()
                .zip(yv.iter())
                .map(|(p, t)| (p - t).powi(2))
                .sum();
            if pooled_sse.len() < a {
                pooled_sse.push(0.0);
            }
            pooled_sse[a - 1] += sse;
        }
    }

    let cv_error: Vec<f64> = pooled_sse
        .iter()
        .map(|s| s / pooled_count as f64)
        .collect();
    let mut chosen = 1;
    for a in 2..=cap {
        if cv_error[a - 1] < cv_error[chosen - 1] {
            chosen = a;
        }
    }
    Ok(ComponentSelection {
        candidates: (1..=cap).collect(),
        cv_error,
        chosen,
        capped_from: (cap < max_components).then_some(max_components),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, arr2, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_matrix(rng: &mut ChaCha12Rng, n: usize, p: usize) -> Array2<f64> {
        let mut m = Array2::<f64>::zeros((n, p));
        m.mapv_inplace(|_| rng.random::<f64>() * 2.0 - 1.0);
        m
    }

    /// Test-side least-squares oracle: solve the normal equations on
    /// centered data with naive Gaussian elimination.
    fn ols_fitted(x: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
        let n = x.nrows();
        let p = x.ncols();
        let q = y.ncols();
        let xm: Vec<f64> = (0..p).map(|c| x.column(c).sum() / n as f64).collect();
        let ym: Vec<f64> = (0..q).map(|c| y.column(c).sum() / n as f64).collect();
        let mut xc = x.clone();
        for c in 0..p {
            xc.column_mut(c).mapv_inplace(|v| v - xm[c]);
        }
        let mut yc = y.clone();
        for c in 0..q {
            yc.column_mut(c).mapv_inplace(|v| v - ym[c]);
        }
        // ata * b = aty, solved per response column.
        let ata = xc.t().dot(&xc);
        let aty = xc.t().dot(&yc);
        let mut b = Array2::<f64>::zeros((p, q));
        for col in 0..q {
            let mut a = ata.clone();
            let mut rhs: Vec<f64> = aty.column(col).to_vec();
            for piv in 0..p {
                let best = (piv..p)
                    .max_by(|&i, &j| a[[i, piv]].abs().partial_cmp(&a[[j, piv]].abs()).unwrap())
                    .unwrap();
                for j in 0..p {
                    a.swap([piv, j], [best, j]);
                }
                rhs.swap(piv, best);
                for i in (piv + 1)..p {
                    let f = a[[i, piv]] / a[[piv, piv]];
                    for j in piv..p {
                        a[[i, j]] -= f * a[[piv, j]];
                    }
                    rhs[i] -= f * rhs[piv];
                }
            }
            for i in (0..p).rev() {
                let mut v = rhs[i];
                for j in (i + 1)..p {
                    v -= a[[i, j]] * b[[j, col]];
                }
                b[[i, col]] = v / a[[i, i]];
            }
        }
        let mut fitted = xc.dot(&b);
        for c in 0..q {
            fitted.column_mut(c).mapv_inplace(|v| v + ym[c]);
        }
        fitted
    }

    #[test]
    fn noiseless_linear_relation_is_recovered_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let x = random_matrix(&mut rng, 20, 4);
        let b = random_matrix(&mut rng, 4, 2);
        let y = x.dot(&b);
        let model = PlsrModel::fit(x.view(), y.view(), 4).unwrap();
        let fitted = model.predict(x.view()).unwrap();
        let err: f64 = fitted
            .iter()
            .zip(y.iter())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-8, "residual norm {err}");
    }

    #[test]
    fn first_weight_is_collinear_with_covariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let x = random_matrix(&mut rng, 40, 5);
        let y = random_matrix(&mut rng, 40, 1);
        let opts = PlsrOptions {
            autoscale: false,
            ..Default::default()
        };
        let model = PlsrModel::fit_with(x.view(), y.view(), 1, &opts).unwrap();
        // Covariance direction on centered data.
        let n = x.nrows() as f64;
        let xm = x.sum_axis(Axis(0)) / n;
        let ym = y.column(0).sum() / n;
        let mut cov = Array1::<f64>::zeros(5);
        for r in 0..x.nrows() {
            for c in 0..5 {
                cov[c] += (x[[r, c]] - xm[c]) * (y[[r, 0]] - ym);
            }
        }
        let w = model.weights.column(0);
        let cosine = w.dot(&cov) / (w.dot(&w).sqrt() * cov.dot(&cov).sqrt());
        assert!(
            (cosine.abs() - 1.0).abs() <= 1e-8,
            "cosine with covariance direction: {cosine}"
        );
    }

    #[test]
    fn full_component_fit_matches_least_squares_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let x = random_matrix(&mut rng, 30, 6);
        let mut y = random_matrix(&mut rng, 30, 2);
        // Add linear structure so the comparison is not pure noise.
        let b = random_matrix(&mut rng, 6, 2);
        y += &x.dot(&b);
        let model = PlsrModel::fit(x.view(), y.view(), 6).unwrap();
        let got = model.predict(x.view()).unwrap();
        let want = ols_fitted(&x, &y);
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).abs() <= 1e-6 * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn row_at_x_mean_predicts_y_mean() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let x = random_matrix(&mut rng, 25, 3);
        let y = random_matrix(&mut rng, 25, 2);
        let model = PlsrModel::fit(x.view(), y.view(), 2).unwrap();
        let n = x.nrows() as f64;
        let xm = x.sum_axis(Axis(0)) / n;
        let probe = xm.insert_axis(Axis(0));
        let got = model.predict(probe.view()).unwrap();
        let ym = y.sum_axis(Axis(0)) / n;
        for c in 0..2 {
            assert!((got[[0, c]] - ym[c]).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_component_model_predicts_y_mean() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let x = random_matrix(&mut rng, 15, 3);
        let y = random_matrix(&mut rng, 15, 2);
        let model = PlsrModel::fit(x.view(), y.view(), 0).unwrap();
        assert_eq!(model.n_components(), 0);
        let got = model.predict(x.view()).unwrap();
        let ym = y.sum_axis(Axis(0)) / 15.0;
        for r in 0..15 {
            for c in 0..2 {
                assert!((got[[r, c]] - ym[c]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn training_rows_reproduce_recorded_fitted_values() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let x = random_matrix(&mut rng, 30, 4);
        let y = random_matrix(&mut rng, 30, 2);
        let model = PlsrModel::fit(x.view(), y.view(), 3).unwrap();
        let got = model.predict(x.view()).unwrap();
        let recorded = model.training_fitted().unwrap();
        for (g, r) in got.iter().zip(recorded.iter()) {
            assert!((g - r).abs() <= 1e-9 * r.abs().max(1.0), "{g} vs {r}");
        }
    }

    #[test]
    fn x_scores_are_mutually_orthogonal() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let x = random_matrix(&mut rng, 40, 6);
        let y = random_matrix(&mut rng, 40, 3);
        let model = PlsrModel::fit(x.view(), y.view(), 5).unwrap();
        let t = model.training_scores().unwrap();
        for a in 0..5 {
            for b in (a + 1)..5 {
                let ta = t.column(a);
                let tb = t.column(b);
                let dot = ta.dot(&tb).abs();
                let bound = 1e-8 * ta.dot(&ta).sqrt() * tb.dot(&tb).sqrt();
                assert!(dot <= bound, "scores {a},{b}: {dot} > {bound}");
            }
        }
    }

    #[test]
    fn deflation_leaves_residual_orthogonal_to_scores() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let x = random_matrix(&mut rng, 30, 5);
        let y = random_matrix(&mut rng, 30, 2);
        let a = 3;
        let model = PlsrModel::fit(x.view(), y.view(), a).unwrap();
        // Rebuild the scaled X block and subtract T Pᵀ.
        let mut xs = Array2::<f64>::zeros((30, model.kept_columns().len()));
        for (oc, &ic) in model.kept_columns().iter().enumerate() {
            for r in 0..30 {
                xs[[r, oc]] = (x[[r, ic]] - model.x_mean[oc]) / model.x_scale[oc];
            }
        }
        let t = model.training_scores().unwrap();
        let residual = &xs - &t.dot(&model.x_loadings.t());
        for comp in 0..a {
            let tc = t.column(comp);
            for col in residual.columns() {
                let dot = tc.dot(&col).abs();
                let bound = 1e-8 * tc.dot(&tc).sqrt() * col.dot(&col).sqrt().max(1.0);
                assert!(dot <= bound);
            }
        }
    }

    #[test]
    fn duplicated_column_leaves_full_rank_predictions_unchanged() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let x = random_matrix(&mut rng, 30, 4);
        let y = random_matrix(&mut rng, 30, 2);
        let model = PlsrModel::fit(x.view(), y.view(), 4).unwrap();
        let base = model.predict(x.view()).unwrap();

        let mut dup = Array2::<f64>::zeros((30, 5));
        dup.slice_mut(ndarray::s![.., 0..4]).assign(&x);
        dup.column_mut(4).assign(&x.column(2));
        let model_dup = PlsrModel::fit(dup.view(), y.view(), 4).unwrap();
        let with_dup = model_dup.predict(dup.view()).unwrap();
        for (a, b) in base.iter().zip(with_dup.iter()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn rescaling_a_column_folds_into_the_scale() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let x = random_matrix(&mut rng, 30, 4);
        let y = random_matrix(&mut rng, 30, 2);
        let model = PlsrModel::fit(x.view(), y.view(), 3).unwrap();
        let base = model.predict(x.view()).unwrap();
        let mut scaled = x.clone();
        scaled.column_mut(1).mapv_inplace(|v| v * 1000.0);
        let model_scaled = PlsrModel::fit(scaled.view(), y.view(), 3).unwrap();
        let got = model_scaled.predict(scaled.view()).unwrap();
        for (a, b) in base.iter().zip(got.iter()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn coefficient_path_matches_sequential_recursion() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let x = random_matrix(&mut rng, 35, 5);
        let y = random_matrix(&mut rng, 35, 2);
        let model = PlsrModel::fit(x.view(), y.view(), 4).unwrap();
        let probe = random_matrix(&mut rng, 10, 5);
        let direct = model.predict(probe.view()).unwrap();
        let sequential = model.predict_sequential(probe.view()).unwrap();
        for (a, b) in direct.iter().zip(sequential.iter()) {
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0));
        }
    }

    #[test]
    fn rank_excess_names_the_attainable_maximum() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        // X with exact rank 2.
        let t = random_matrix(&mut rng, 20, 2);
        let p = random_matrix(&mut rng, 6, 2);
        let x = t.dot(&p.t());
        let y = random_matrix(&mut rng, 20, 2);
        match PlsrModel::fit(x.view(), y.view(), 5) {
            Err(Error::RankExceeded {
                requested,
                attainable,
            }) => {
                assert_eq!(requested, 5);
                assert_eq!(attainable, 2);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn constant_columns_are_masked_out() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let x = random_matrix(&mut rng, 25, 3);
        let y = random_matrix(&mut rng, 25, 1);
        let mut with_const = Array2::<f64>::zeros((25, 4));
        with_const.slice_mut(ndarray::s![.., 0..3]).assign(&x);
        with_const.column_mut(3).fill(7.0);
        let plain = PlsrModel::fit(x.view(), y.view(), 2).unwrap();
        let masked = PlsrModel::fit(with_const.view(), y.view(), 2).unwrap();
        assert_eq!(masked.kept_columns(), &[0, 1, 2]);
        let (a, b) = (
            plain.predict(x.view()).unwrap(),
            masked.predict(with_const.view()).unwrap(),
        );
        for (u, v) in a.iter().zip(b.iter()) {
            assert!((u - v).abs() <= 1e-10);
        }
    }

    #[test]
    fn selection_finds_the_true_component_count() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        // Noiseless two-factor model: X = T Pᵀ, Y = T C.
        let t = random_matrix(&mut rng, 40, 2);
        let p = random_matrix(&mut rng, 6, 2);
        let c = random_matrix(&mut rng, 2, 2);
        let x = t.dot(&p.t());
        let y = t.dot(&c);
        let sel =
            select_components(x.view(), y.view(), 5, 5, &PlsrOptions::default()).unwrap();
        assert_eq!(sel.chosen, 2);
        assert_eq!(sel.capped_from, Some(5));
        assert_eq!(sel.candidates, vec![1, 2]);
    }

    #[test]
    fn single_candidate_is_chosen_trivially() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        let x = random_matrix(&mut rng, 30, 4);
        let y = random_matrix(&mut rng, 30, 1);
        let sel =
            select_components(x.view(), y.view(), 3, 1, &PlsrOptions::default()).unwrap();
        assert_eq!(sel.chosen, 1);
        assert_eq!(sel.candidates, vec![1]);
    }

    #[test]
    fn pure_noise_prefers_one_component() {
        let mut wins = 0;
        for trial in 0..50 {
            let mut rng = ChaCha12Rng::seed_from_u64(100 + trial);
            let x = random_matrix(&mut rng, 30, 5);
            let y = random_matrix(&mut rng, 30, 1);
            let sel =
                select_components(x.view(), y.view(), 5, 4, &PlsrOptions::default()).unwrap();
            if sel.chosen == 1 {
                wins += 1;
            }
        }
        assert!(wins > 25, "one component chosen only {wins}/50 times");
    }

    #[test]
    fn json_roundtrip_preserves_predictions_bitwise() {
        let mut rng = ChaCha12Rng::seed_from_u64(16);
        let x = random_matrix(&mut rng, 30, 4);
        let y = random_matrix(&mut rng, 30, 2);
        let model = PlsrModel::fit(x.view(), y.view(), 3).unwrap();
        let restored = PlsrModel::from_json(&model.to_json()).unwrap();
        let (a, b) = (
            model.predict(x.view()).unwrap(),
            restored.predict(x.view()).unwrap(),
        );
        for (u, v) in a.iter().zip(b.iter()) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let x = arr2(&[[1.0, 2.0], [f64::INFINITY, 0.0], [0.5, 1.5]]);
        let y = arr2(&[[1.0], [2.0], [3.0]]);
        assert!(PlsrModel::fit(x.view(), y.view(), 1).is_err());
        let _ = arr1(&[0.0]);
    }
}
