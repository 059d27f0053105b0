use ndarray::ArrayView2;

/// Decides from a neuron's min and max pre-activation over the probe
/// vertices whether its hyperplane cuts the probe.
pub type CrossingPredicate = fn(min: f64, max: f64) -> bool;

/// A neuron crosses unless all its values share one strict sign; exact
/// zeros count as crossings.
#[inline]
pub fn straddles_zero(min: f64, max: f64) -> bool {
    min <= 0.0 && max >= 0.0
}

/// Number of columns (neurons) of a `vertices × neurons` pre-activation
/// matrix whose entries are not all of one strict sign.
pub fn layer_crossings(preacts: ArrayView2<'_, f64>) -> usize {
    layer_crossings_with(preacts, straddles_zero)
}

pub fn layer_crossings_with(preacts: ArrayView2<'_, f64>, predicate: CrossingPredicate) -> usize {
    if preacts.nrows() == 0 {
        return 0;
    }
    let (mins, maxs) = column_extrema(preacts);
    mins.iter().zip(&maxs).filter(|(&lo, &hi)| predicate(lo, hi)).count()
}

pub(crate) fn column_extrema(preacts: ArrayView2<'_, f64>) -> (Vec<f64>, Vec<f64>) {
    let mut mins = preacts.row(0).to_vec();
    let mut maxs = mins.clone();
    for row in preacts.rows().into_iter().skip(1) {
        for ((lo, hi), &v) in mins.iter_mut().zip(maxs.iter_mut()).zip(row.iter()) {
            if v < *lo {
                *lo = v;
            }
            if v > *hi {
                *hi = v;
            }
        }
    }
    (mins, maxs)
}
