//! Held-out NLL reporting and anomaly-detection evaluation. Instances are
//! ranked ascending by log-likelihood (lowest density = most anomalous);
//! precision/recall over the bottom-r sets give the PR curve, average
//! precision Σ precision_r·(recall_r − recall_{r−1}), and binary-gain nDCG.
//! A paired two-sided t-test compares per-instance NLL vectors.

use crate::data::Dataset;
use crate::error::{RedError, Result};
use crate::model::RedModel;
use crate::numerics::Matrix;
use serde::{Deserialize, Serialize};

/// Per-instance log-likelihood scores with their anomaly ranking.
/// `order[0]` is the most anomalous instance; ties keep original index
/// order (stable sort) for reproducibility.
#[derive(Debug, Clone)]
pub struct RankedScores {
    pub scores: Vec<f64>,
    pub labels: Option<Vec<bool>>,
    pub order: Vec<usize>,
}

impl RankedScores {
    pub fn new(scores: Vec<f64>, labels: Option<Vec<bool>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != scores.len() {
                return Err(RedError::shape(
                    format!("{} labels", scores.len()),
                    format!("{}", l.len()),
                    "RankedScores",
                ));
            }
        }
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
        Ok(RankedScores {
            scores,
            labels,
            order,
        })
    }

    fn labels_or_err(&self) -> Result<&[bool]> {
        self.labels
            .as_deref()
            .ok_or_else(|| RedError::Contract("ranking metrics need anomaly labels".into()))
    }

    fn positive_count(&self) -> Result<usize> {
        let labels = self.labels_or_err()?;
        let pos = labels.iter().filter(|&&b| b).count();
        if pos == 0 {
            return Err(RedError::DegenerateTest(
                "no positive labels: recall is undefined".into(),
            ));
        }
        Ok(pos)
    }
}

/// Score every row by log-likelihood and rank ascending.
pub fn anomaly_scores(
    model: &RedModel,
    x: &Matrix,
    labels: Option<&[bool]>,
) -> Result<RankedScores> {
    let mut scores = Vec::with_capacity(x.nrows());
    for row in x.rows() {
        scores.push(model.log_prob(&row.to_owned())?);
    }
    RankedScores::new(scores, labels.map(|l| l.to_vec()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrCurve {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

/// Precision and recall of the bottom-r likelihood sets, r = 1..N.
pub fn pr_curve(rs: &RankedScores) -> Result<PrCurve> {
    let pos = rs.positive_count()? as f64;
    let labels = rs.labels_or_err()?;
    let n = rs.order.len();
    let mut precision = Vec::with_capacity(n);
    let mut recall = Vec::with_capacity(n);
    let mut tp = 0usize;
    for (r, &idx) in rs.order.iter().enumerate() {
        if labels[idx] {
            tp += 1;
        }
        precision.push(tp as f64 / (r + 1) as f64);
        recall.push(tp as f64 / pos);
    }
    Ok(PrCurve { precision, recall })
}

/// Σ_r precision_r · (recall_r − recall_{r−1}) with recall₀ = 0.
pub fn average_precision(rs: &RankedScores) -> Result<f64> {
    let curve = pr_curve(rs)?;
    Ok(ap_from_curve(&curve))
}

/// The same sum evaluated from already-computed curve arrays.
pub fn ap_from_curve(curve: &PrCurve) -> f64 {
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in curve.precision.iter().zip(curve.recall.iter()) {
        ap += p * (r - prev_recall);
        prev_recall = *r;
    }
    ap
}

pub fn mean_average_precision(aps: &[f64]) -> Result<f64> {
    if aps.is_empty() {
        return Err(RedError::Contract("MAP of an empty list".into()));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

/// Binary-gain nDCG over the full ranking: DCG = Σ 1/log₂(rank+1) over
/// anomalous positions, normalized by the ideal (all anomalies first).
pub fn ndcg(rs: &RankedScores) -> Result<f64> {
    let pos = rs.positive_count()?;
    let labels = rs.labels_or_err()?;
    let mut dcg = 0.0;
    for (r, &idx) in rs.order.iter().enumerate() {
        if labels[idx] {
            dcg += 1.0 / ((r + 2) as f64).log2();
        }
    }
    let mut ideal = 0.0;
    for r in 0..pos {
        ideal += 1.0 / ((r + 2) as f64).log2();
    }
    Ok(dcg / ideal)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub p_two_sided: f64,
    pub dof: usize,
}

/// Paired two-sided t-test: t = mean(a−b) / (sd(a−b)/√n) with the sample
/// (n−1) standard deviation; p from the Student-t CDF via the regularized
/// incomplete beta.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(RedError::shape(
            format!("{}", a.len()),
            format!("{}", b.len()),
            "paired_t_test",
        ));
    }
    let n = a.len();
    if n < 2 {
        return Err(RedError::Contract("paired t-test needs n >= 2".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    if var == 0.0 {
        return Err(RedError::DegenerateTest(
            "zero variance in paired differences".into(),
        ));
    }
    let t = mean / (var.sqrt() / (n as f64).sqrt());
    let dof = n - 1;
    // P(|T_ν| > t) = I_{ν/(ν+t²)}(ν/2, 1/2).
    let nu = dof as f64;
    let p = regularized_incomplete_beta(nu / 2.0, 0.5, nu / (nu + t * t));
    Ok(TTestResult {
        t,
        p_two_sided: p,
        dof,
    })
}

/// Lanczos log-gamma (g = 7, n = 9), |rel err| < 1e-13 on the positive axis.
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection formula.
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (Lentz's method).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Mean held-out NLL with anomalies excluded when labels exist.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NllReport {
    pub n_total: usize,
    pub n_scored: usize,
    pub mean_nll: f64,
}

pub fn test_nll_report(model: &RedModel, test: &Dataset) -> Result<NllReport> {
    let keep: Vec<usize> = match &test.labels {
        Some(labels) => (0..test.n()).filter(|&i| !labels[i]).collect(),
        None => (0..test.n()).collect(),
    };
    if keep.is_empty() {
        return Err(RedError::Dataset(
            "no non-anomalous rows to score".into(),
        ));
    }
    let mut total = 0.0;
    for &i in &keep {
        total += -model.log_prob(&test.x.row(i).to_owned())?;
    }
    Ok(NllReport {
        n_total: test.n(),
        n_scored: keep.len(),
        mean_nll: total / keep.len() as f64,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalySection {
    pub anomaly_count: usize,
    pub average_precision: f64,
    pub ndcg: f64,
    pub pr_curve: PrCurve,
}

/// Full evaluation payload: NLL section always, anomaly metrics when the
/// dataset carries labels, and a t-test of the model's per-instance NLL
/// against the standard-normal baseline on the same (standardized) rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub nll: NllReport,
    pub anomaly: Option<AnomalySection>,
    pub baseline_nll: f64,
    pub vs_baseline_t_test: Option<TTestResult>,
}

pub fn evaluate(model: &RedModel, test: &Dataset) -> Result<EvalReport> {
    let nll = test_nll_report(model, test)?;

    let keep: Vec<usize> = match &test.labels {
        Some(labels) => (0..test.n()).filter(|&i| !labels[i]).collect(),
        None => (0..test.n()).collect(),
    };
    // Standard-normal baseline on the same rows (data is standardized, so
    // this is the best independent-Gaussian reference).
    let mut model_nlls = Vec::with_capacity(keep.len());
    let mut base_nlls = Vec::with_capacity(keep.len());
    for &i in &keep {
        let row = test.x.row(i).to_owned();
        model_nlls.push(-model.log_prob(&row)?);
        let b: f64 = row
            .iter()
            .map(|&v| -crate::numerics::gaussian_logpdf(v, 0.0, 1.0).unwrap())
            .sum();
        base_nlls.push(b);
    }
    let baseline_nll = base_nlls.iter().sum::<f64>() / base_nlls.len() as f64;
    let vs_baseline_t_test = paired_t_test(&model_nlls, &base_nlls).ok();

    let anomaly = match &test.labels {
        Some(labels) if labels.iter().any(|&b| b) => {
            let rs = anomaly_scores(model, &test.x, Some(labels))?;
            let curve = pr_curve(&rs)?;
            Some(AnomalySection {
                anomaly_count: test.anomaly_count(),
                average_precision: ap_from_curve(&curve),
                ndcg: ndcg(&rs)?,
                pr_curve: curve,
            })
        }
        _ => None,
    };

    Ok(EvalReport {
        dataset: test.source.clone(),
        n: test.n(),
        d: test.d(),
        nll,
        anomaly,
        baseline_nll,
        vs_baseline_t_test,
    })
}

impl EvalReport {
    /// One-row CSV in held-out NLL table layout.
    pub fn nll_table_csv(&self) -> String {
        format!(
            "dataset,n,d,nll\n{},{},{},{}\n",
            self.dataset, self.n, self.d, self.nll.mean_nll
        )
    }

    /// One-row CSV in anomaly table layout (empty when unlabeled).
    pub fn anomaly_table_csv(&self) -> String {
        let mut out = String::from("dataset,anomaly_count,avg_prec,ndcg\n");
        if let Some(a) = &self.anomaly {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.dataset, a.anomaly_count, a.average_precision, a.ndcg
            ));
        }
        out
    }
}

pub fn pr_curve_csv(curve: &PrCurve) -> String {
    let mut out = String::from("r,precision,recall\n");
    for (i, (p, r)) in curve.precision.iter().zip(curve.recall.iter()).enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, p, r));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    /// [A, N, A, N] fixture ranked by ascending score.
    fn anan() -> RankedScores {
        RankedScores::new(
            vec![0.1, 0.2, 0.3, 0.4],
            Some(vec![true, false, true, false]),
        )
        .unwrap()
    }

    #[test]
    fn pr_curve_enumeration_oracle() {
        let curve = pr_curve(&anan()).unwrap();
        let expect_p = [1.0, 0.5, 2.0 / 3.0, 0.5];
        let expect_r = [0.5, 0.5, 1.0, 1.0];
        for i in 0..4 {
            assert!((curve.precision[i] - expect_p[i]).abs() < 1e-15);
            assert!((curve.recall[i] - expect_r[i]).abs() < 1e-15);
        }
    }

    #[test]
    fn all_anomalies_curve() {
        let rs = RankedScores::new(vec![1.0, 2.0, 3.0], Some(vec![true, true, true])).unwrap();
        let curve = pr_curve(&rs).unwrap();
        for (i, p) in curve.precision.iter().enumerate() {
            assert_eq!(*p, 1.0);
            assert!((curve.recall[i] - (i + 1) as f64 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn perfect_ranking_has_unit_precision_until_full_recall() {
        let rs = RankedScores::new(
            vec![0.0, 0.1, 5.0, 6.0, 7.0],
            Some(vec![true, true, false, false, false]),
        )
        .unwrap();
        let curve = pr_curve(&rs).unwrap();
        assert_eq!(curve.precision[0], 1.0);
        assert_eq!(curve.precision[1], 1.0);
        assert_eq!(curve.recall[1], 1.0);
        assert!((average_precision(&rs).unwrap() - 1.0).abs() < 1e-15);
        assert!((ndcg(&rs).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_positives_is_degenerate() {
        let rs = RankedScores::new(vec![1.0, 2.0], Some(vec![false, false])).unwrap();
        assert!(matches!(pr_curve(&rs), Err(RedError::DegenerateTest(_))));
    }

    #[test]
    fn average_precision_enumeration_oracle() {
        let ap = average_precision(&anan()).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-15);
        assert!((ap - 0.8333333333333333).abs() < 1e-12);
    }

    #[test]
    fn ap_equals_area_under_step_curve() {
        let mut rng = Rng::seed_from_u64(40);
        for _ in 0..20 {
            let n = 30;
            let scores: Vec<f64> = (0..n).map(|_| rng.standard_normal()).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.3).collect();
            if !labels.iter().any(|&b| b) {
                continue;
            }
            let rs = RankedScores::new(scores, Some(labels)).unwrap();
            let direct = average_precision(&rs).unwrap();
            let from_curve = ap_from_curve(&pr_curve(&rs).unwrap());
            assert!((direct - from_curve).abs() < 1e-12);
        }
    }

    #[test]
    fn metrics_invariant_under_monotone_score_transforms() {
        let mut rng = Rng::seed_from_u64(41);
        let scores: Vec<f64> = (0..40).map(|_| rng.standard_normal()).collect();
        let labels: Vec<bool> = (0..40).map(|_| rng.uniform() < 0.25).collect();
        let rs = RankedScores::new(scores.clone(), Some(labels.clone())).unwrap();
        let warped: Vec<f64> = scores.iter().map(|s| (s * 0.3).exp() * 7.0 + 2.0).collect();
        let rs2 = RankedScores::new(warped, Some(labels)).unwrap();
        assert_eq!(
            average_precision(&rs).unwrap(),
            average_precision(&rs2).unwrap()
        );
        assert_eq!(ndcg(&rs).unwrap(), ndcg(&rs2).unwrap());
    }

    #[test]
    fn near_perfect_separation_gives_near_unit_ap() {
        // Clean separation echoing the strongest reported detection rows.
        let mut rng = Rng::seed_from_u64(42);
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..50 {
            scores.push(-20.0 + rng.standard_normal());
            labels.push(true);
        }
        for _ in 0..950 {
            scores.push(rng.standard_normal());
            labels.push(false);
        }
        let rs = RankedScores::new(scores, Some(labels)).unwrap();
        assert!(average_precision(&rs).unwrap() >= 0.999);
    }

    #[test]
    fn map_is_arithmetic_mean() {
        assert!((mean_average_precision(&[0.8, 0.6]).unwrap() - 0.7).abs() < 1e-15);
        assert!(mean_average_precision(&[]).is_err());
    }

    #[test]
    fn ndcg_hand_arithmetic() {
        // DCG = 1 + 1/log₂4 = 1.5; IDCG = 1 + 1/log₂3.
        let got = ndcg(&anan()).unwrap();
        let ideal = 1.0 + 1.0 / 3.0f64.log2();
        assert!((got - 1.5 / ideal).abs() < 1e-12);
        assert!((got - 0.9197207891481876).abs() < 1e-12);
    }

    #[test]
    fn random_ranking_ap_matches_exact_enumeration() {
        // Exact oracle: N = 8, 2 anomalies — average AP over all C(8,2)
        // placements equals the mean over uniformly random rankings.
        let n = 8;
        let mut exact = 0.0;
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let mut labels = vec![false; n];
                labels[i] = true;
                labels[j] = true;
                let scores: Vec<f64> = (0..n).map(|k| k as f64).collect();
                let rs = RankedScores::new(scores, Some(labels)).unwrap();
                exact += average_precision(&rs).unwrap();
                count += 1;
            }
        }
        exact /= count as f64;

        let mut rng = Rng::seed_from_u64(43);
        let trials = 4000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..trials {
            let scores: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            let mut labels = vec![false; n];
            let mut placed = 0;
            while placed < 2 {
                let k = rng.below(n);
                if !labels[k] {
                    labels[k] = true;
                    placed += 1;
                }
            }
            let ap = average_precision(&RankedScores::new(scores, Some(labels)).unwrap()).unwrap();
            sum += ap;
            sumsq += ap * ap;
        }
        let mean = sum / trials as f64;
        let se = ((sumsq / trials as f64 - mean * mean) / trials as f64).sqrt();
        assert!(
            (mean - exact).abs() < 3.0 * se,
            "mean {mean} vs exact {exact} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn random_ranking_ap_is_near_prevalence() {
        // E[AP] under a random ranking exceeds prevalence by O((1−p)/A),
        // so the proximity check needs a decent anomaly count.
        let (n, a) = (400usize, 40usize);
        let p = a as f64 / n as f64;
        let mut rng = Rng::seed_from_u64(47);
        let trials = 300;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..trials {
            let scores: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
            let mut labels = vec![false; n];
            let mut placed = 0;
            while placed < a {
                let k = rng.below(n);
                if !labels[k] {
                    labels[k] = true;
                    placed += 1;
                }
            }
            let ap = average_precision(&RankedScores::new(scores, Some(labels)).unwrap()).unwrap();
            sum += ap;
            sumsq += ap * ap;
        }
        let mean = sum / trials as f64;
        let se = ((sumsq / trials as f64 - mean * mean) / trials as f64).sqrt();
        let bias_allowance = (1.0 - p) / a as f64;
        assert!(
            (mean - p).abs() < bias_allowance + 3.0 * se,
            "mean {mean} vs prevalence {p} (allowance {})",
            bias_allowance + 3.0 * se
        );
    }

    #[test]
    fn recall_is_monotone_and_reaches_one() {
        let mut rng = Rng::seed_from_u64(44);
        let scores: Vec<f64> = (0..50).map(|_| rng.standard_normal()).collect();
        let labels: Vec<bool> = (0..50).map(|i| i % 7 == 0).collect();
        let rs = RankedScores::new(scores, Some(labels)).unwrap();
        let curve = pr_curve(&rs).unwrap();
        for w in curve.recall.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert_eq!(*curve.recall.last().unwrap(), 1.0);
    }

    #[test]
    fn t_test_reference_values() {
        // a = [1,2,3], b = [2,3,5]: t = −4, dof 2, p = 1 − 4/√18.
        let r = paired_t_test(&[1.0, 2.0, 3.0], &[2.0, 3.0, 5.0]).unwrap();
        assert!((r.t + 4.0).abs() < 1e-12);
        assert_eq!(r.dof, 2);
        let exact = 1.0 - 4.0 / 18.0f64.sqrt();
        assert!((r.p_two_sided - exact).abs() < 1e-10, "p = {}", r.p_two_sided);
        assert!((r.p_two_sided - 0.05719095841793653).abs() < 1e-9);

        let swapped = paired_t_test(&[2.0, 3.0, 5.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((swapped.t - 4.0).abs() < 1e-12);
        assert!((swapped.p_two_sided - r.p_two_sided).abs() < 1e-14);
    }

    #[test]
    fn identical_vectors_are_degenerate() {
        let a = [1.0, 2.0, 3.0];
        assert!(matches!(
            paired_t_test(&a, &a),
            Err(RedError::DegenerateTest(_))
        ));
    }

    #[test]
    fn incomplete_beta_reference_values() {
        // I_x(1, b) = 1 − (1−x)^b.
        for (x, b) in [(0.3, 0.5), (0.8, 2.0)] {
            let direct = 1.0 - (1.0f64 - x).powf(b);
            assert!((regularized_incomplete_beta(1.0, b, x) - direct).abs() < 1e-12);
        }
        // Symmetry I_x(a,b) = 1 − I_{1−x}(b,a).
        let lhs = regularized_incomplete_beta(2.5, 1.5, 0.35);
        let rhs = 1.0 - regularized_incomplete_beta(1.5, 2.5, 0.65);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn stable_tie_breaking_by_original_index() {
        let rs = RankedScores::new(vec![1.0, 0.5, 0.5, 0.2], None).unwrap();
        assert_eq!(rs.order, vec![3, 1, 2, 0]);
    }

    #[test]
    fn outlier_ranks_first_under_identity_model() {
        let model = crate::model::tests::make_standard_normal_model(2, 1);
        let mut rng = Rng::seed_from_u64(45);
        let mut x = Matrix::zeros((20, 2));
        for i in 0..19 {
            x[[i, 0]] = rng.standard_normal();
            x[[i, 1]] = rng.standard_normal();
        }
        x[[19, 0]] = 10.0;
        x[[19, 1]] = 10.0;
        let rs = anomaly_scores(&model, &x, None).unwrap();
        assert_eq!(rs.order[0], 19);

        // Scores follow rows under permutation.
        let mut perm = Matrix::zeros((20, 2));
        for i in 0..20 {
            perm.row_mut(i).assign(&x.row(19 - i));
        }
        let rs_perm = anomaly_scores(&model, &perm, None).unwrap();
        assert_eq!(rs_perm.order[0], 0);
        let mut sorted_a: Vec<u64> = rs.scores.iter().map(|s| s.to_bits()).collect();
        let mut sorted_b: Vec<u64> = rs_perm.scores.iter().map(|s| s.to_bits()).collect();
        sorted_a.sort();
        sorted_b.sort();
        assert_eq!(sorted_a, sorted_b);
    }

    #[test]
    fn nll_report_excludes_anomalies() {
        let model = crate::model::tests::make_standard_normal_model(2, 1);
        let mut rng = Rng::seed_from_u64(46);
        let x = Matrix::from_shape_fn((12, 2), |_| rng.standard_normal());
        let labels: Vec<bool> = (0..12).map(|i| i < 3).collect();
        let mut ds = crate::data::Dataset::from_matrix(x.clone());

        // Unlabeled: equals plain nll.
        let plain = test_nll_report(&model, &ds).unwrap();
        assert!((plain.mean_nll - model.nll(&x).unwrap()).abs() < 1e-12);
        assert_eq!(plain.n_scored, 12);

        // Labeled: equals nll over the label-0 subset.
        ds.labels = Some(labels);
        let report = test_nll_report(&model, &ds).unwrap();
        assert_eq!(report.n_scored, 9);
        let subset = x.slice(ndarray::s![3.., ..]).to_owned();
        assert!((report.mean_nll - model.nll(&subset).unwrap()).abs() < 1e-12);

        // All anomalous: error.
        ds.labels = Some(vec![true; 12]);
        assert!(test_nll_report(&model, &ds).is_err());
    }
}
