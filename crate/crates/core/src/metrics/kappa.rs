use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Unweighted Cohen's kappa with the full contingency table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaResult<T> {
    pub po: f64,
    pub pe: f64,
    pub kappa: f64,
    pub n: u64,
    /// Categories seen in either rating list, ascending.
    pub categories: Vec<T>,
    /// `contingency[i][j]`: rater A gave `categories[i]`, rater B `categories[j]`.
    pub contingency: Vec<Vec<u64>>,
}

pub fn cohen_kappa<T: Ord + Clone>(ratings_a: &[T], ratings_b: &[T]) -> Result<KappaResult<T>, MetricError> {
    if ratings_a.len() != ratings_b.len() {
        return Err(MetricError::LengthMismatch {
            left: ratings_a.len(),
            right: ratings_b.len(),
        });
    }
    if ratings_a.is_empty() {
        return Err(MetricError::EmptyInput("rating list"));
    }
    let index: BTreeMap<&T, usize> = {
        let mut cats: Vec<&T> = ratings_a.iter().chain(ratings_b).collect();
        cats.sort();
        cats.dedup();
        cats.into_iter().enumerate().map(|(i, c)| (c, i)).collect()
    };
    let k = index.len();
    let mut table = vec![vec![0u64; k]; k];
    for (a, b) in ratings_a.iter().zip(ratings_b) {
        table[index[a]][index[b]] += 1;
    }
    let n = ratings_a.len() as u64;
    let agree: u64 = (0..k).map(|i| table[i][i]).sum();
    // Chance agreement from integer marginals: sum(row_i * col_i) / n^2.
    let chance_num: u128 = (0..k)
        .map(|i| {
            let row: u64 = table[i].iter().sum();
            let col: u64 = table.iter().map(|r| r[i]).sum();
            u128::from(row) * u128::from(col)
        })
        .sum();
    let n2 = u128::from(n) * u128::from(n);
    if chance_num == n2 {
        return Err(MetricError::DegenerateAgreement);
    }
    let po = agree as f64 / n as f64;
    let pe = chance_num as f64 / n2 as f64;
    // (po - pe) / (1 - pe) with the common n^2 factor cancelled exactly.
    let kappa = (u128::from(agree) * u128::from(n)) as f64 - chance_num as f64;
    let kappa = kappa / (n2 - chance_num) as f64;
    Ok(KappaResult {
        po,
        pe,
        kappa,
        n,
        categories: index.into_keys().cloned().collect(),
        contingency: table,
    })
}
