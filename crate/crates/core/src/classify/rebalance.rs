//! Class rebalancing by duplication or SMOTE interpolation.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::rng::{self, StageRng};

fn class_rows(y: &[i32]) -> BTreeMap<i32, Vec<usize>> {
    let mut rows: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, &label) in y.iter().enumerate() {
        rows.entry(label).or_default().push(i);
    }
    rows
}

fn gather(x: ArrayView2<'_, f64>, rows: &[usize]) -> Array2<f64> {
    x.select(ndarray::Axis(0), rows)
}

/// Duplicates minority rows (drawn with replacement) until every class has
/// the majority count, then shuffles the rows.
pub fn random_oversample(x: ArrayView2<'_, f64>, y: &[i32], seed: u64) -> Result<(Array2<f64>, Vec<i32>)> {
    let groups = class_rows(y);
    if groups.len() < 2 {
        return Err(Error::Insufficient("oversampling needs at least two classes".into()));
    }
    let target = groups.values().map(Vec::len).max().unwrap_or(0);
    let mut rng = rng::stream(seed, 0x4f56_5253);
    let mut order: Vec<usize> = (0..y.len()).collect();
    for rows in groups.values() {
        for _ in rows.len()..target {
            order.push(rows[rng::index(&mut rng, rows.len())]);
        }
    }
    rng::shuffle(&mut rng, &mut order);
    let labels = order.iter().map(|&i| y[i]).collect();
    Ok((gather(x, &order), labels))
}

/// `a + u (b - a)`.
pub fn interpolate(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>, u: f64) -> Vec<f64> {
    a.iter().zip(b.iter()).map(|(p, q)| p + u * (q - p)).collect()
}

/// SMOTE: synthetic minority rows on segments between a sample and one of
/// its `k` nearest same-class neighbours. Originals come first, in input
/// order, followed by the synthetic rows.
pub fn smote(x: ArrayView2<'_, f64>, y: &[i32], k: usize, seed: u64) -> Result<(Array2<f64>, Vec<i32>)> {
    let mut rng = rng::stream(seed, 0x534d_4f54);
    smote_with(x, y, k, &mut rng, rng::unit)
}

pub(crate) fn smote_with(
    x: ArrayView2<'_, f64>,
    y: &[i32],
    k: usize,
    rng: &mut StageRng,
    mut draw_u: impl FnMut(&mut StageRng) -> f64,
) -> Result<(Array2<f64>, Vec<i32>)> {
    if k == 0 {
        return Err(Error::invalid("smote needs k >= 1"));
    }
    let groups = class_rows(y);
    if groups.len() < 2 {
        return Err(Error::Insufficient("smote needs at least two classes".into()));
    }
    let target = groups.values().map(Vec::len).max().unwrap_or(0);
    for (label, rows) in &groups {
        if rows.len() < target && rows.len() < 2 {
            return Err(Error::Insufficient(format!(
                "smote: class {label} has a single sample; at least 2 are needed"
            )));
        }
    }

    let mut synthetic: Vec<f64> = Vec::new();
    let mut labels = y.to_vec();
    for (label, rows) in &groups {
        if rows.len() >= target {
            continue;
        }
        let k = k.min(rows.len() - 1);
        let mut neighbours: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for _ in rows.len()..target {
            let i = rows[rng::index(rng, rows.len())];
            let near = neighbours.entry(i).or_insert_with(|| nearest(x, rows, i, k));
            let j = near[rng::index(rng, near.len())];
            let u = draw_u(rng);
            synthetic.extend(interpolate(x.row(i), x.row(j), u));
            labels.push(*label);
        }
    }

    let width = x.ncols();
    let extra = Array2::from_shape_vec((synthetic.len() / width.max(1), width), synthetic)
        .map_err(|e| Error::invalid(e.to_string()))?;
    let out = ndarray::concatenate(ndarray::Axis(0), &[x, extra.view()]).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((out, labels))
}

/// The `k` rows of `candidates` nearest to row `i` (excluding `i`), by
/// Euclidean distance with ties to the lower index.
fn nearest(x: ArrayView2<'_, f64>, candidates: &[usize], i: usize, k: usize) -> Vec<usize> {
    let xi = x.row(i);
    let mut dist: Vec<(f64, usize)> = candidates
        .iter()
        .filter(|&&j| j != i)
        .map(|&j| {
            let d: f64 = xi.iter().zip(x.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            (d, j)
        })
        .collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    dist.truncate(k);
    dist.into_iter().map(|(_, j)| j).collect()
}
