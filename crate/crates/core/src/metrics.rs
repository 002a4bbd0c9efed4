//! Confusion matrices and the three summary scores: overall accuracy,
//! average (per-class) accuracy and Cohen's kappa.

use std::io::Write;

use crate::error::{Error, Result};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    total: u64,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Result<Self> {
        let c = counts.len();
        if counts.iter().any(|r| r.len() != c) {
            return Err(Error::InvalidArgument("confusion matrix must be square".into()));
        }
        let total = counts.iter().flatten().sum();
        if total == 0 {
            return Err(Error::InvalidArgument("confusion matrix is empty".into()));
        }
        Ok(Self { counts, total })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth - 1][predicted - 1]
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    fn trace(&self) -> u64 {
        (0..self.classes()).map(|k| self.counts[k][k]).sum()
    }

    fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }

    /// `c` lines of `c` comma-separated counts.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        for row in &self.counts {
            let line: Vec<String> = row.iter().map(u64::to_string).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::mismatch(
            format!("{} predictions", y_true.len()),
            format!("{} predictions", y_pred.len()),
        ));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidArgument("no samples to score".into()));
    }
    let mut counts = vec![vec![0u64; classes]; classes];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t == 0 || t > classes || p == 0 || p > classes {
            return Err(Error::InvalidArgument(format!("label pair ({t}, {p}) outside 1..={classes}")));
        }
        counts[t - 1][p - 1] += 1;
    }
    ConfusionMatrix::from_counts(counts)
}

pub fn overall_accuracy(cm: &ConfusionMatrix) -> f64 {
    cm.trace() as f64 / cm.total() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageAccuracy {
    pub value: f64,
    /// Some true class had no test samples and was left out of the mean.
    pub excluded_empty: bool,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `Σ num_k/den_k` as one reduced fraction, or `None` on overflow.
fn exact_sum(terms: impl Iterator<Item = (u64, u64)>) -> Option<(u128, u128)> {
    let (mut num, mut den) = (0u128, 1u128);
    for (n, d) in terms {
        let (n, d) = (n as u128, d as u128);
        let g = gcd(den, d);
        let lcm = (den / g).checked_mul(d)?;
        num = num.checked_mul(lcm / den)?.checked_add(n.checked_mul(lcm / d)?)?;
        den = lcm;
        let r = gcd(num, den).max(1);
        num /= r;
        den /= r;
    }
    Some((num, den))
}

/// Mean per-class recall over classes that occur in the truth.
///
/// The recalls are summed as an exact fraction when it fits in 128 bits, so
/// the result is the correctly rounded mean.
pub fn average_accuracy(cm: &ConfusionMatrix) -> AverageAccuracy {
    let rows: Vec<(u64, u64)> = (0..cm.classes())
        .map(|k| (cm.counts[k][k], cm.row_sum(k)))
        .filter(|&(_, r)| r > 0)
        .collect();
    let used = rows.len();
    let value = match exact_sum(rows.iter().copied()).and_then(|(n, d)| Some((n, d.checked_mul(used as u128)?))) {
        Some((n, d)) => ratio(n, d),
        None => rows.iter().map(|&(d, r)| d as f64 / r as f64).sum::<f64>() / used as f64,
    };
    AverageAccuracy {
        value,
        excluded_empty: used < cm.classes(),
    }
}

/// `n / d` in lowest terms; rounded once when both fit in 53 bits.
fn ratio(n: u128, d: u128) -> f64 {
    let g = gcd(n, d).max(1);
    (n / g) as f64 / (d / g) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kappa {
    pub value: f64,
    /// Chance agreement was 1, so kappa is undefined and reported as 0.
    pub degenerate: bool,
}

/// `κ = (N·Σ n_kk − Σ r_k c_k) / (N² − Σ r_k c_k)`, evaluated on integer counts.
pub fn cohen_kappa(cm: &ConfusionMatrix) -> Kappa {
    let total = cm.total() as u128;
    let agree = cm.trace() as u128 * total;
    let chance: u128 = (0..cm.classes())
        .map(|k| cm.row_sum(k) as u128 * cm.col_sum(k) as u128)
        .sum();
    let denom = total * total - chance;
    if denom == 0 {
        return Kappa {
            value: 0.0,
            degenerate: true,
        };
    }
    let value = if agree >= chance {
        ratio(agree - chance, denom)
    } else {
        -ratio(chance - agree, denom)
    };
    Kappa {
        value,
        degenerate: false,
    }
}

/// OA, AA and κ of one evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    pub aa_excluded_empty: bool,
    pub kappa_degenerate: bool,
}

pub fn scores(cm: &ConfusionMatrix) -> Scores {
    let aa = average_accuracy(cm);
    let kappa = cohen_kappa(cm);
    Scores {
        oa: overall_accuracy(cm),
        aa: aa.value,
        kappa: kappa.value,
        aa_excluded_empty: aa.excluded_empty,
        kappa_degenerate: kappa.degenerate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(rows: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn confusion_examples() {
        assert_eq!(confusion(&[1, 2], &[1, 2], 2).unwrap().counts(), &[vec![1, 0], vec![0, 1]]);
        assert_eq!(confusion(&[1, 1], &[2, 2], 2).unwrap().counts(), &[vec![0, 2], vec![0, 0]]);
        let three = confusion(&[1, 2], &[1, 1], 3).unwrap();
        assert_eq!(three.counts()[2], vec![0, 0, 0]);
        assert!(confusion(&[1], &[1, 2], 2).is_err());
        assert!(confusion(&[1, 3], &[1, 2], 2).is_err());
        assert!(confusion(&[], &[], 2).is_err());
    }

    #[test]
    fn worked_example() {
        let m = cm(&[&[45, 5], &[10, 40]]);
        assert!((overall_accuracy(&m) - 0.85).abs() < 1e-15);
        assert!((average_accuracy(&m).value - 0.85).abs() < 1e-15);
        assert!((cohen_kappa(&m).value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn extremes() {
        let perfect = cm(&[&[50, 0], &[0, 50]]);
        assert_eq!(overall_accuracy(&perfect), 1.0);
        assert_eq!(average_accuracy(&perfect).value, 1.0);
        assert_eq!(cohen_kappa(&perfect).value, 1.0);
        let wrong = cm(&[&[0, 3], &[4, 0]]);
        assert_eq!(overall_accuracy(&wrong), 0.0);
        let constant = cm(&[&[10, 0], &[10, 0]]);
        assert_eq!(cohen_kappa(&constant).value, 0.0);
        assert!(!cohen_kappa(&constant).degenerate);
        let single = cm(&[&[5, 0], &[0, 0]]);
        let k = cohen_kappa(&single);
        assert!(k.degenerate);
        assert_eq!(k.value, 0.0);
    }

    #[test]
    fn empty_class_excluded_from_aa() {
        let m = cm(&[&[8, 2, 0], &[0, 0, 0], &[1, 0, 9]]);
        let aa = average_accuracy(&m);
        assert!(aa.excluded_empty);
        assert!((aa.value - 0.85).abs() < 1e-15);
    }

    #[test]
    fn csv_output() {
        let mut buf = Vec::new();
        cm(&[&[1, 2], &[3, 4]]).write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,2\n3,4\n");
    }
}
